"""Bounds on p(y | do(x, d), c) and on average controlled direct effects.

With the edge X -> Y removed, let X be e-separated from Y given C after
deleting D, with no vertex of C descending from D.  Writing
den = p(x, d | c) + 1 - p(d | c):

    general:       max(0, p(x, y, d | c) / den)
                   <= p(y | do(x, d), c) <=
                   min(1, (p(x, y, d | c) + 1 - p(d | c)) / den)

    strengthened:  p(y, d | x, c)  <=  ...  <=  p(y, d | x, c) + 1 - p(d | x, c)

where the strengthened pair needs X to have no ancestor in D.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .constraints import enumerate_witnesses
from .graph import Dag, GraphError, descendants, remove_edge
from .model import ZERO_EVENT, JointTable, ModelError, check_assignment_against
from .separation import e_separated

EMPTY_TOL = 1e-7
VARIANTS = ("general", "strengthened", "auto")


class BoundsPreconditionError(GraphError):
    """A graph-side or numerical precondition of the bound formulas fails."""

    def __init__(self, condition, message):
        self.condition = condition
        super().__init__(f"{condition}: {message}")


class ModelFalsified(Exception):
    def __init__(self, report, message):
        self.report = report
        super().__init__(message)


def _items(a):
    return tuple((str(k), int(v)) for k, v in dict(a or {}).items())


@dataclass(frozen=True)
class BoundsQuery:
    x: tuple[str, int]
    y: tuple[str, int]
    d: tuple[tuple[str, int], ...] = ()
    c: tuple[tuple[str, int], ...] = ()
    variant: str = "auto"

    def __init__(self, x, y, d=None, c=None, variant="auto"):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        object.__setattr__(self, "x", (str(x[0]), int(x[1])))
        object.__setattr__(self, "y", (str(y[0]), int(y[1])))
        object.__setattr__(self, "d", _items(d))
        object.__setattr__(self, "c", _items(c))
        object.__setattr__(self, "variant", variant)

    @property
    def d_vars(self):
        return tuple(v for v, _ in self.d)

    @property
    def c_vars(self):
        return tuple(v for v, _ in self.c)


@dataclass(frozen=True)
class BoundsResult:
    lower: float
    upper: float
    variant: str
    inputs: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"invalid bounds [{self.lower}, {self.upper}]")

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol


@dataclass(frozen=True)
class AcdeResult:
    lower: float
    upper: float

    def __post_init__(self):
        if not (-1.0 - 1e-12 <= self.lower <= self.upper <= 1.0 + 1e-12):
            raise ValueError(f"invalid ACDE bounds [{self.lower}, {self.upper}]")

    @property
    def includes_zero(self) -> bool:
        return self.lower <= 0.0 <= self.upper


def bounds_admissibility(g: Dag, x: str, y: str, c_vars, d_vars) -> bool:
    """Check the graph-side conditions; return whether the strengthened form applies.

    The graph may or may not contain X -> Y; the conditions refer to the
    graph with the edge present.
    """
    c_vars, d_vars = tuple(c_vars), tuple(d_vars)
    for v in (x, y) + c_vars + d_vars:
        if v not in g:
            raise BoundsPreconditionError("unknown-vertex", f"{v!r} not in graph")
        if g.is_latent(v):
            raise BoundsPreconditionError("latent-vertex", f"{v!r} is latent")
    sets = [(x,), (y,), c_vars, d_vars]
    names = [v for s in sets for v in s]
    if len(set(names)) != len(names):
        raise BoundsPreconditionError("disjointness", "X, Y, C and D must be disjoint")
    if g.has_edge(y, x):
        raise BoundsPreconditionError("edge-orientation", f"{y} -> {x} is in the graph")
    if g.has_edge(x, y):
        g_full, g_cut = g, remove_edge(g, x, y)
    else:
        if x in descendants(g, [y]):
            raise BoundsPreconditionError("acyclicity", f"adding {x} -> {y} creates a cycle")
        g_full = Dag(g.vertices, g.edges + ((x, y),), g.latent, g.states)
        g_cut = g
    desc_d = descendants(g_full, d_vars) - set(d_vars) if d_vars else frozenset()
    bad = [v for v in c_vars if v in desc_d]
    if bad:
        raise BoundsPreconditionError("c-not-descendant-of-d",
                                      f"{bad} descend from {list(d_vars)}")
    if not e_separated(g_cut, [x], [y], c_vars, d_vars, witness=False):
        raise BoundsPreconditionError(
            "e-separation", f"with {x} -> {y} removed, {x} is not e-separated from {y} "
                            f"given {list(c_vars)} after deleting {list(d_vars)}")
    return x not in desc_d


def _probs(t: JointTable, q: BoundsQuery):
    xv, xs = q.x
    yv, ys = q.y
    c, d = dict(q.c), dict(q.d)
    pc = t.prob(c)
    return {
        "p(c)": pc,
        "p(d,c)": t.prob({**d, **c}),
        "p(x,c)": t.prob({xv: xs, **c}),
        "p(x,d,c)": t.prob({xv: xs, **d, **c}),
        "p(x,y,d,c)": t.prob({xv: xs, yv: ys, **d, **c}),
    }


def _general(pr):
    if pr["p(c)"] <= ZERO_EVENT:
        raise BoundsPreconditionError("zero-denominator", "p(c) is zero")
    pc = pr["p(c)"]
    p_d = pr["p(d,c)"] / pc
    p_xd = pr["p(x,d,c)"] / pc
    p_xyd = pr["p(x,y,d,c)"] / pc
    den = p_xd + 1.0 - p_d
    if den <= ZERO_EVENT:
        raise BoundsPreconditionError("zero-denominator", "p(x,d|c) + 1 - p(d|c) is zero")
    lower = max(0.0, p_xyd / den)
    upper = min((p_xyd + 1.0 - p_d) / den, 1.0)
    inputs = (("p(d|c)", p_d), ("p(x,d|c)", p_xd), ("p(x,y,d|c)", p_xyd))
    return lower, upper, inputs


def _strengthened(pr):
    if pr["p(x,c)"] <= ZERO_EVENT:
        raise BoundsPreconditionError("zero-denominator", "p(x,c) is zero")
    pxc = pr["p(x,c)"]
    p_yd = pr["p(x,y,d,c)"] / pxc
    p_d = pr["p(x,d,c)"] / pxc
    inputs = (("p(y,d|x,c)", p_yd), ("p(d|x,c)", p_d))
    return p_yd, p_yd + 1.0 - p_d, inputs


def _clip(lo, hi):
    lo = min(max(lo, 0.0), 1.0)
    hi = min(max(hi, lo), 1.0)
    return lo, hi


def interventional_bounds(t: JointTable, q: BoundsQuery, g: Dag) -> BoundsResult:
    """Bounds on p(y | do(x, d), c) from the observed table ``t``."""
    strong_ok = bounds_admissibility(g, q.x[0], q.y[0], q.c_vars, q.d_vars)
    check_assignment_against(g, dict([q.x, q.y, *q.d, *q.c]), "bounds query")
    variant = q.variant
    if variant == "auto":
        variant = "strengthened" if strong_ok else "general"
    if variant == "strengthened" and not strong_ok:
        raise BoundsPreconditionError("x-not-descendant-of-d",
                                      f"{q.x[0]} descends from {list(q.d_vars)}")
    pr = _probs(t, q)
    lo, hi, inputs = (_strengthened if variant == "strengthened" else _general)(pr)
    lo, hi = _clip(lo, hi)
    return BoundsResult(lo, hi, variant, inputs)


def acde_bounds(t: JointTable, q: BoundsQuery, g: Dag) -> AcdeResult:
    """Bounds on p(y | do(x=1, d), c) - p(y | do(x=0, d), c) for binary X and Y.

    The outcome state is taken from ``q.y``; the state in ``q.x`` is ignored.
    """
    for v in (q.x[0], q.y[0]):
        if v not in g or g.is_latent(v):
            raise BoundsPreconditionError("unknown-vertex", f"{v!r} is not observed")
        if g.n_states(v) != 2:
            raise BoundsPreconditionError("binary", f"{v!r} is not binary")
    arm = {}
    for xs in (0, 1):
        arm[xs] = interventional_bounds(
            t, BoundsQuery((q.x[0], xs), q.y, dict(q.d), dict(q.c), q.variant), g)
    return AcdeResult(arm[1].lower - arm[0].upper, arm[1].upper - arm[0].lower)


def iv_acde_bounds(p, x: int) -> AcdeResult:
    """Bounds on the direct effect of Z on Y at X = x from binary p[z, x, y]."""
    p = np.asarray(p, dtype=float)
    if p.shape != (2, 2, 2):
        raise ValueError("iv_acde_bounds needs binary Z, X and Y")
    if not np.allclose(p.sum(axis=(1, 2)), 1.0, rtol=0, atol=1e-9):
        raise ValueError("p(x, y | z) must be normalized for each z")
    upper = 1.0 - p[1, x, 0] - p[0, x, 1]
    lower = p[1, x, 1] + p[0, x, 0] - 1.0
    return AcdeResult(float(lower), float(upper))


# -- all witnesses -------------------------------------------------------------

@dataclass(frozen=True)
class BoundsEntry:
    """One evaluated bound for the target p(y | do(x, d), c)."""

    c: tuple[tuple[str, int], ...]
    d: tuple[tuple[str, int], ...]
    x_state: int
    y_state: int
    variant: str
    lower: float
    upper: float


@dataclass(frozen=True)
class Intersection:
    c: tuple[tuple[str, int], ...]
    d: tuple[tuple[str, int], ...]
    x_state: int
    y_state: int
    lower: float
    upper: float
    lower_from: str
    upper_from: str

    @property
    def empty(self) -> bool:
        return self.lower > self.upper + EMPTY_TOL


@dataclass(frozen=True)
class AcdeEntry:
    c: tuple[tuple[str, int], ...]
    d: tuple[tuple[str, int], ...]
    y_state: int
    lower: float
    upper: float
    includes_zero: bool


@dataclass(frozen=True)
class BoundsReport:
    x: str
    y: str
    witnesses: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...] = ()
    entries: tuple[BoundsEntry, ...] = field(default_factory=tuple)
    intersections: tuple[Intersection, ...] = field(default_factory=tuple)
    acde: tuple[AcdeEntry, ...] = field(default_factory=tuple)
    skipped: tuple[str, ...] = ()

    @property
    def falsified(self) -> bool:
        return any(i.empty for i in self.intersections)


def admissible_witnesses(g: Dag, x: str, y: str, max_c=None, max_d=None):
    """(C, D) pairs satisfying the graph-side conditions for X -> Y."""
    g_cut = remove_edge(g, x, y) if g.has_edge(x, y) else g
    out = []
    for w in enumerate_witnesses(g_cut, x, y, max_c, max_d):
        try:
            bounds_admissibility(g, x, y, w.c, w.d)
        except BoundsPreconditionError:
            continue
        out.append((w.c, w.d))
    return out


def bounds_report(g: Dag, t: JointTable, x: str, y: str, c_vars=None, d_vars=None,
                  variant: str = "auto", max_c=None, max_d=None) -> BoundsReport:
    """Evaluate bounds for every admissible witness and every state combination.

    With ``c_vars``/``d_vars`` given only that witness is used.  Under
    ``auto`` every admissible variant is evaluated and the results for each
    identical target are intersected; an empty intersection raises
    :class:`ModelFalsified`.
    """
    check_table_for_bounds(g, t)
    if c_vars is None and d_vars is None:
        wits = admissible_witnesses(g, x, y, max_c, max_d)
    else:
        c_vars, d_vars = tuple(c_vars or ()), tuple(d_vars or ())
        if not bounds_admissibility(g, x, y, c_vars, d_vars) and variant == "strengthened":
            raise BoundsPreconditionError("x-not-descendant-of-d",
                                          f"{x} descends from {list(d_vars)}")
        wits = [(g.ordered(c_vars), g.ordered(d_vars))]
    if variant == "strengthened":
        wits = [(c, d) for c, d in wits if bounds_admissibility(g, x, y, c, d)]
    variants = ("general", "strengthened") if variant == "auto" else (variant,)

    entries, inters, acdes, skipped = [], [], [], []
    binary = g.n_states(x) == 2 and g.n_states(y) == 2
    for c_vars, d_vars in wits:
        strong_ok = bounds_admissibility(g, x, y, c_vars, d_vars)
        for c_state in itertools.product(*(range(g.n_states(v)) for v in c_vars)):
            c = tuple(zip(c_vars, c_state))
            for d_state in itertools.product(*(range(g.n_states(v)) for v in d_vars)):
                d = tuple(zip(d_vars, d_state))
                per_arm = {}
                for xs in range(g.n_states(x)):
                    for ys in range(g.n_states(y)):
                        found = []
                        for var in variants:
                            if var == "strengthened" and not strong_ok:
                                continue
                            q = BoundsQuery((x, xs), (y, ys), dict(d), dict(c), var)
                            try:
                                r = interventional_bounds(t, q, g)
                            except BoundsPreconditionError as exc:
                                skipped.append(f"{var} c={dict(c)} d={dict(d)} x={xs}: {exc}")
                                continue
                            entries.append(BoundsEntry(c, d, xs, ys, var, r.lower, r.upper))
                            found.append(r)
                        if not found:
                            continue
                        lo = max(found, key=lambda r: r.lower)
                        hi = min(found, key=lambda r: r.upper)
                        inter = Intersection(c, d, xs, ys, lo.lower, hi.upper,
                                             lo.variant, hi.variant)
                        inters.append(inter)
                        per_arm[xs, ys] = inter
                if binary:
                    for ys in range(2):
                        if (0, ys) in per_arm and (1, ys) in per_arm:
                            a1, a0 = per_arm[1, ys], per_arm[0, ys]
                            lo, hi = a1.lower - a0.upper, a1.upper - a0.lower
                            acdes.append(AcdeEntry(c, d, ys, lo, hi, lo <= 0.0 <= hi))
    report = BoundsReport(x, y, tuple(wits), tuple(entries), tuple(inters), tuple(acdes),
                          tuple(skipped))
    if report.falsified:
        bad = next(i for i in inters if i.empty)
        raise ModelFalsified(report, f"bounds for c={dict(bad.c)} d={dict(bad.d)} "
                                     f"x={bad.x_state} y={bad.y_state} do not intersect")
    return report


def check_table_for_bounds(g: Dag, t: JointTable) -> None:
    if set(t.variables) != set(g.observed):
        raise ModelError(f"table variables {t.variables} do not match observed vertices "
                         f"{g.observed}")
