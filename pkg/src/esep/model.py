"""Discrete DAG models: conditional probability tables, exact joint and
marginal tables, interventions and the fixed-parent construction.

Tables are numpy arrays with one axis per variable, in the variable order
of the table (insertion order of the graph), row-major.
"""

from __future__ import annotations

import csv
import io
import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .graph import Dag, GraphError, remove_incoming, remove_outgoing

ROW_TOL = 1e-12
MASS_TOL = 1e-9
ZERO_EVENT = 1e-12
LOAD_TOL = 1e-6
DEFAULT_CAP = 10**7

Assignment = Mapping[str, int]


class ModelError(ValueError):
    pass


class ZeroConditioningEvent(ModelError):
    def __init__(self, event, mass):
        self.event = dict(event)
        self.mass = mass
        super().__init__(f"conditioning event {self.event} has probability {mass:.3g}")


class TableTooLarge(ModelError):
    pass


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class JointTable:
    """Exact probability table over ordered discrete variables."""

    variables: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        probs = _frozen(self.probs)
        if probs.ndim != len(self.variables):
            raise ModelError(f"table has {probs.ndim} axes for {len(self.variables)} variables")
        if len(set(self.variables)) != len(self.variables):
            raise ModelError("duplicate variable in table")
        if probs.size and (probs < -ROW_TOL).any():
            raise ModelError("negative probability in table")
        total = probs.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ModelError(f"table mass {total!r} differs from 1")
        object.__setattr__(self, "probs", probs)

    @property
    def cards(self) -> dict[str, int]:
        return dict(zip(self.variables, self.probs.shape))

    def axis(self, v: str) -> int:
        try:
            return self.variables.index(v)
        except ValueError:
            raise ModelError(f"variable {v!r} not in table over {self.variables}") from None

    def _check_assignment(self, a: Assignment):
        for v, s in a.items():
            k = self.probs.shape[self.axis(v)]
            if not 0 <= int(s) < k:
                raise ModelError(f"state {s!r} out of range for {v!r} with {k} states")

    def prob(self, assignment: Assignment) -> float:
        """Marginal probability of a partial assignment."""
        self._check_assignment(assignment)
        idx = tuple(int(assignment[v]) if v in assignment else slice(None)
                    for v in self.variables)
        return float(self.probs[idx].sum())

    def __eq__(self, other):
        if not isinstance(other, JointTable):
            return NotImplemented
        return self.variables == other.variables and np.array_equal(self.probs, other.probs)

    def allclose(self, other: JointTable, atol: float = MASS_TOL) -> bool:
        return (self.variables == other.variables and self.probs.shape == other.probs.shape
                and np.allclose(self.probs, other.probs, rtol=0, atol=atol))

    def __repr__(self):
        return f"JointTable({self.variables}, shape={self.probs.shape})"


def marginalize(t: JointTable, keep: Iterable[str]) -> JointTable:
    keep = set(keep)
    for v in keep:
        t.axis(v)
    drop = tuple(i for i, v in enumerate(t.variables) if v not in keep)
    kept = tuple(v for v in t.variables if v in keep)
    return JointTable(kept, t.probs.sum(axis=drop))


def condition(t: JointTable, on: Assignment) -> JointTable:
    """Condition on an assignment; the assigned variables are dropped."""
    t._check_assignment(on)
    idx = tuple(int(on[v]) if v in on else slice(None) for v in t.variables)
    sub = t.probs[idx]
    mass = float(sub.sum())
    if mass <= ZERO_EVENT:
        raise ZeroConditioningEvent(on, mass)
    return JointTable(tuple(v for v in t.variables if v not in on), sub / mass)


def conditional_prob(t: JointTable, event: Assignment, given: Assignment = None) -> float:
    """P(event | given), where the two assignments must agree on shared variables."""
    given = dict(given or {})
    for v in set(event) & set(given):
        if int(event[v]) != int(given[v]):
            return 0.0
    den = t.prob(given)
    if den <= ZERO_EVENT:
        raise ZeroConditioningEvent(given, den)
    return t.prob({**given, **event}) / den


# -- conditional probability tables ------------------------------------------

@dataclass(frozen=True, eq=False)
class Cpt:
    """f(child | parents) stored with axes (parent_1, ..., parent_k, child)."""

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        table = _frozen(self.table)
        if table.ndim != len(self.parents) + 1:
            raise ModelError(f"CPT for {self.child!r} has {table.ndim} axes, expected "
                             f"{len(self.parents) + 1}")
        if (table < 0).any():
            raise ModelError(f"negative entry in CPT for {self.child!r}")
        if not np.allclose(table.sum(axis=-1), 1.0, rtol=0, atol=ROW_TOL):
            raise ModelError(f"CPT rows for {self.child!r} do not sum to 1")
        object.__setattr__(self, "table", table)

    def row(self, parent_states: Assignment) -> np.ndarray:
        return self.table[tuple(int(parent_states[p]) for p in self.parents)]

    def __eq__(self, other):
        if not isinstance(other, Cpt):
            return NotImplemented
        return (self.child == other.child and self.parents == other.parents
                and np.array_equal(self.table, other.table))


def point_mass(child: str, k: int, state: int) -> Cpt:
    row = np.zeros(k)
    row[state] = 1.0
    return Cpt(child, (), row)


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    graph: Dag
    states: dict[str, int]
    cpts: dict[str, Cpt] = field(repr=False)

    def __post_init__(self):
        g = self.graph
        states = dict(self.states)
        for v in g.vertices:
            if v not in states:
                if g.is_latent(v):
                    raise ModelError(f"no state count for latent {v!r}")
                states[v] = g.n_states(v)
            if int(states[v]) < 2:
                raise ModelError(f"variable {v!r} needs at least 2 states")
        extra = set(states) - set(g.vertices)
        if extra:
            raise ModelError(f"state counts for unknown variables {sorted(extra)}")
        for v in g.observed:
            if states[v] != g.n_states(v):
                raise ModelError(f"state count for {v!r} disagrees with graph")
        cpts = dict(self.cpts)
        if set(cpts) != set(g.vertices):
            raise ModelError("need exactly one CPT per vertex")
        for v in g.vertices:
            cpt = cpts[v]
            if cpt.child != v or cpt.parents != g.parents(v):
                raise ModelError(f"CPT for {v!r} must have parents {g.parents(v)}, "
                                 f"got {cpt.parents}")
            shape = tuple(states[p] for p in cpt.parents) + (states[v],)
            if cpt.table.shape != shape:
                raise ModelError(f"CPT for {v!r} has shape {cpt.table.shape}, expected {shape}")
        object.__setattr__(self, "states", {v: int(states[v]) for v in g.vertices})
        object.__setattr__(self, "cpts", {v: cpts[v] for v in g.vertices})

    def __eq__(self, other):
        if not isinstance(other, DiscreteModel):
            return NotImplemented
        return (self.graph == other.graph and self.states == other.states
                and self.cpts == other.cpts)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.graph.vertices

    def table_size(self) -> int:
        return int(np.prod([self.states[v] for v in self.graph.vertices], dtype=float))


def _einsum_operands(m: DiscreteModel):
    pos = {v: i for i, v in enumerate(m.graph.vertices)}
    ops = []
    for v in m.graph.vertices:
        cpt = m.cpts[v]
        ops += [cpt.table, [pos[p] for p in cpt.parents] + [pos[v]]]
    return ops, pos


def joint(m: DiscreteModel, cap: int = DEFAULT_CAP) -> JointTable:
    """Product of all CPTs over every variable, latent ones included."""
    if m.table_size() > cap:
        raise TableTooLarge(f"joint over {m.table_size()} cells exceeds cap {cap}")
    ops, pos = _einsum_operands(m)
    probs = np.einsum(*ops, list(range(len(pos))), optimize=True)
    return JointTable(m.graph.vertices, probs)


def observed_margin(m: DiscreteModel, cap: int = DEFAULT_CAP) -> JointTable:
    """Observed distribution: the CPT product with latent variables summed out."""
    obs = m.graph.observed
    size = int(np.prod([m.states[v] for v in obs], dtype=float))
    if size > cap:
        raise TableTooLarge(f"observed table of {size} cells exceeds cap {cap}")
    ops, pos = _einsum_operands(m)
    probs = np.einsum(*ops, [pos[v] for v in obs], optimize=True)
    return JointTable(obs, probs)


def _check_observed_assignment(m: DiscreteModel, a: Assignment, what: str):
    for v, s in a.items():
        if v not in m.graph:
            raise ModelError(f"{what}: unknown variable {v!r}")
        if m.graph.is_latent(v):
            raise ModelError(f"{what}: {v!r} is latent")
        if not 0 <= int(s) < m.states[v]:
            raise ModelError(f"{what}: state {s!r} out of range for {v!r}")


def intervene(m: DiscreteModel, do: Assignment) -> DiscreteModel:
    """Truncated factorization: intervened variables become parentless point masses."""
    _check_observed_assignment(m, do, "intervention")
    if not do:
        return m
    g = remove_incoming(m.graph, do)
    cpts = dict(m.cpts)
    for v, s in do.items():
        cpts[v] = point_mass(v, m.states[v], int(s))
    return DiscreteModel(g, m.states, cpts)


def interventional_query(m: DiscreteModel, y: Assignment, do: Assignment = None,
                         given: Assignment = None) -> float:
    """P(y | do(...), given), computed exactly in the intervened model."""
    do = dict(do or {})
    given = dict(given or {})
    _check_observed_assignment(m, y, "outcome")
    _check_observed_assignment(m, given, "conditioning")
    t = observed_margin(intervene(m, do))
    return conditional_prob(t, y, given)


def fix_conditioning(m: DiscreteModel, d: Assignment) -> DiscreteModel:
    """Clamp members of ``d`` wherever they appear as parents.

    Each CPT f(V | pa(V)) becomes f(V | pa(V) \\ D) with the D-parents fixed
    to their values in ``d``; CPTs of the D variables themselves are kept.
    The result factorizes over the graph with D's outgoing edges removed.
    """
    _check_observed_assignment(m, d, "fixed assignment")
    if not d:
        return m
    g = remove_outgoing(m.graph, d)
    cpts = {}
    for v, cpt in m.cpts.items():
        if any(p in d for p in cpt.parents):
            idx = tuple(int(d[p]) if p in d else slice(None) for p in cpt.parents)
            cpts[v] = Cpt(v, tuple(p for p in cpt.parents if p not in d), cpt.table[idx])
        else:
            cpts[v] = cpt
    return DiscreteModel(g, m.states, cpts)


def model_from_tables(g: Dag, tables: Mapping[str, np.ndarray]) -> DiscreteModel:
    """Build a model from raw arrays laid out as (parents..., child)."""
    states = {v: np.shape(tables[v])[-1] for v in g.vertices}
    cpts = {v: Cpt(v, g.parents(v), tables[v]) for v in g.vertices}
    return DiscreteModel(g, states, cpts)


# -- distribution table files -------------------------------------------------

@dataclass(frozen=True)
class LoadedTable:
    table: JointTable
    renormalized: bool
    raw_mass: float


def _split_rows(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ModelError("empty distribution table")
    head = lines[0]
    if "," in head:
        rows = list(csv.reader(io.StringIO("\n".join(lines))))
    elif "\t" in head:
        rows = list(csv.reader(io.StringIO("\n".join(lines)), delimiter="\t"))
    else:
        rows = [ln.split() for ln in lines]
    return [[cell.strip() for cell in row] for row in rows]


def parse_table(text: str, graph: Dag | None = None) -> LoadedTable:
    """Parse a delimited table with a header of variable names and a final
    ``p`` column.  Missing rows have probability 0.  When ``graph`` is given
    the table must cover exactly its observed variables (reordered to match)
    and state counts come from the graph."""
    rows = _split_rows(text)
    header, body = rows[0], rows[1:]
    if len(header) < 2 or header[-1] != "p":
        raise ModelError("table header must list variables followed by 'p'")
    names = header[:-1]
    if len(set(names)) != len(names):
        raise ModelError("duplicate variable in table header")
    entries = {}
    for lineno, row in enumerate(body, 2):
        if len(row) != len(header):
            raise ModelError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            key = tuple(int(x) for x in row[:-1])
            p = float(row[-1])
        except ValueError:
            raise ModelError(f"row {lineno}: malformed entry {row}") from None
        if any(s < 0 for s in key) or not p >= 0:
            raise ModelError(f"row {lineno}: negative state or probability")
        if key in entries:
            raise ModelError(f"row {lineno}: duplicate assignment {key}")
        entries[key] = p

    if graph is not None:
        order = graph.observed
        if set(order) != set(names):
            raise ModelError(f"table variables {sorted(names)} do not match observed "
                             f"vertices {sorted(order)}")
        cards = [graph.n_states(v) for v in order]
    else:
        order = tuple(names)
        cards = [max(2, 1 + max((k[i] for k in entries), default=0)) for i in range(len(names))]
    perm = [names.index(v) for v in order]
    probs = np.zeros(cards)
    for key, p in entries.items():
        idx = tuple(key[i] for i in perm)
        if any(s >= k for s, k in zip(idx, cards)):
            raise ModelError(f"assignment {key} out of range")
        probs[idx] = p
    mass = float(probs.sum())
    if abs(mass - 1.0) > LOAD_TOL:
        raise ModelError(f"probabilities sum to {mass!r}, not 1")
    renorm = mass != 1.0
    return LoadedTable(JointTable(tuple(order), probs / mass), renorm, mass)


def format_table(t: JointTable, skip_zero: bool = True) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(t.variables) + ["p"])
    for idx in itertools.product(*(range(k) for k in t.probs.shape)):
        p = float(t.probs[idx])
        if skip_zero and p == 0.0:
            continue
        w.writerow(list(idx) + [repr(p)])
    return out.getvalue()


def check_assignment_against(g: Dag, a: Assignment, what: str = "assignment") -> None:
    for v, s in a.items():
        if v not in g:
            raise GraphError(f"{what}: unknown variable {v!r}")
        if g.is_latent(v):
            raise GraphError(f"{what}: {v!r} is latent")
        if not 0 <= int(s) < g.n_states(v):
            raise GraphError(f"{what}: state {s!r} out of range for {v!r}")
