"""Inequality constraints implied by e-separation.

If A and B are e-separated given C after deleting D (and no vertex of C
descends from D), then for each fixed D = d the probabilities p(a, b, d | c)
must be compatible with a distribution in which A and B are independent
given C.  Per value of c this reduces to product dominance: some product
distribution Q_A(a) Q_B(b) must dominate p(a, b, d | c) entrywise.  The
smallest total mass of a dominating product is

    min over the A-simplex of  g(u) = sum_b max_a p(a, b, d | c) / u(a),

so the slice is compatible iff that minimum is at most 1.  Compatibility for
each c separately suffices, since a compatible distribution can be assembled
c by c with the observed p(c).

When A also has no descendants in D, p(b, d | a, c) must be compatible in
the stronger sense: a single r(b | c) dominating p(b, d | a, c) for every a,
which exists iff sum_b max_a p(b, d | a, c) <= 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .graph import Dag, GraphError, descendants
from .model import ZERO_EVENT, JointTable, ModelError, marginalize
from .separation import e_separated

FEAS_TOL = 1e-7
SLICE_TOL = 1e-9
N_STARTS = 8
SOLVER_SEED = 20130214


class SolverFailure(RuntimeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class SliceError(ValueError):
    pass


# -- instrumental inequality ---------------------------------------------------

def instrumental_inequality_score(p) -> float:
    """max_x sum_y max_z p(x, y | z) for an array laid out as ``p[z, x, y]``.

    The IV model requires the score to be at most 1.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 3:
        raise SliceError("expected a table p[z, x, y]")
    if (p < 0).any():
        raise SliceError("negative probability")
    sums = p.sum(axis=(1, 2))
    if not np.allclose(sums, 1.0, rtol=0, atol=SLICE_TOL):
        raise SliceError(f"p(x, y | z) not normalized for every z: {sums}")
    return float(p.max(axis=0).sum(axis=1).max())


def iv_table(t: JointTable, z: str, x: str, y: str) -> np.ndarray:
    """p(x, y | z) as an array ``[z, x, y]`` from an observed joint table."""
    m = marginalize(t, (z, x, y))
    arr = np.moveaxis(m.probs, [m.axis(z), m.axis(x), m.axis(y)], [0, 1, 2])
    pz = arr.sum(axis=(1, 2))
    if (pz <= ZERO_EVENT).any():
        raise ModelError(f"some state of {z!r} has probability zero")
    return arr / pz[:, None, None]


# -- slices ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConditionalSlice:
    """Slice probabilities for one fixed D = d, laid out as ``values[c, a, b]``.

    ``form`` is ``"weak"`` for p(a, b, d | c) and ``"strong"`` for
    p(b, d | a, c).  Multi-variable A, B, C are flattened row-major;
    ``c_states`` lists the c-assignments kept (one per leading index) and
    ``skipped_c`` those dropped as null events.
    """

    values: np.ndarray
    form: str = "weak"
    a_vars: tuple[str, ...] = ("A",)
    b_vars: tuple[str, ...] = ("B",)
    c_vars: tuple[str, ...] = ()
    fixed_d: tuple[tuple[str, int], ...] = ()
    c_states: tuple[tuple[int, ...], ...] = ((),)
    skipped_c: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3:
            raise SliceError("slice values must have shape (c, a, b)")
        if self.form not in ("weak", "strong"):
            raise SliceError(f"unknown slice form {self.form!r}")
        if (v < -SLICE_TOL).any():
            raise SliceError("negative slice probability")
        v = np.clip(v, 0.0, None)
        if self.form == "weak":
            over = v.sum(axis=(1, 2)) > 1 + SLICE_TOL
        else:
            over = (v.sum(axis=2) > 1 + SLICE_TOL).any(axis=1)
        if over.any():
            raise SliceError(f"{self.form} slice exceeds unit mass")
        if len(self.c_states) != v.shape[0]:
            object.__setattr__(self, "c_states", tuple((i,) for i in range(v.shape[0])))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_c(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CompatibilityResult:
    feasible: bool
    margin: float
    form: str
    per_c_margin: tuple[float, ...] = ()
    violating_c: tuple[int, ...] | None = None
    # per kept c: (Q_A, Q_B) for weak slices, (r(b | c),) for strong ones
    witness: tuple[tuple[tuple[float, ...], ...], ...] | None = None


def _result(form, margins, witnesses, c_states, tol):
    margins = tuple(float(m) for m in margins)
    margin = max(margins) if margins else -1.0
    feasible = margin <= tol
    violating = None
    if not feasible:
        violating = tuple(c_states[int(np.argmax(margins))])
    wit = tuple(witnesses) if feasible else None
    return CompatibilityResult(feasible, margin, form, margins, violating, wit)


def _with_slack(dom):
    dom = np.asarray(dom, dtype=float)
    slack = max(0.0, 1.0 - dom.sum())
    return tuple(float(x) for x in dom + slack / dom.size)


def strong_compatibility(s: ConditionalSlice, tol: float = FEAS_TOL) -> CompatibilityResult:
    if s.form != "strong":
        raise SliceError("strong_compatibility needs a slice of p(b, d | a, c)")
    margins, witnesses = [], []
    for vals in s.values:
        r = vals.max(axis=0)
        margins.append(r.sum() - 1.0)
        witnesses.append((_with_slack(r),))
    return _result("strong", margins, witnesses, s.c_states, tol)


# -- product dominance --------------------------------------------------------

def dominance_objective(p, u) -> float:
    """g(u) = sum_b max_a p[a, b] / u[a]; rows with no mass may have u = 0."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    rows = p.sum(axis=1) > 0
    if (u[rows] <= 0).any():
        return float("inf")
    ratio = np.zeros_like(p)
    ratio[rows] = p[rows] / u[rows, None]
    return float(ratio.max(axis=0).sum())


def _binary_min(p):
    """Exact minimizer of g over the 2-simplex; both rows carry mass."""
    p0, p1 = p
    with np.errstate(divide="ignore", invalid="ignore"):
        brk = np.where(p0 + p1 > 0, p0 / (p0 + p1), 0.0)
    knots = np.unique(np.concatenate([[0.0, 1.0], brk]))
    cands = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        mid = 0.5 * (lo + hi)
        alpha = p0[brk > mid].sum()
        beta = p1[brk <= mid].sum()
        if alpha + beta == 0:
            s = mid
        else:
            s = np.sqrt(alpha) / (np.sqrt(alpha) + np.sqrt(beta))
        cands.append(min(max(s, lo), hi))
    cands += list(knots)
    best = (float("inf"), None)
    for s in cands:
        if 0.0 < s < 1.0:
            u = np.array([s, 1.0 - s])
            val = dominance_objective(p, u)
            if val < best[0]:
                best = (val, u)
    return best


def _slsqp_min(p, rng):
    n_a, n_b = p.shape
    pos = np.argwhere(p > 0)
    logp = np.log(p[p > 0])

    def obj(z):
        return np.exp(z[n_a:]).sum()

    def obj_grad(z):
        g = np.zeros_like(z)
        g[n_a:] = np.exp(z[n_a:])
        return g

    lin = np.zeros((len(pos), n_a + n_b))
    lin[np.arange(len(pos)), pos[:, 0]] = 1.0
    lin[np.arange(len(pos)), n_a + pos[:, 1]] = 1.0

    def simplex(z):
        x = z[:n_a]
        m = x.max()
        return -(m + np.log(np.exp(x - m).sum()))

    def simplex_grad(z):
        x = z[:n_a]
        w = np.exp(x - x.max())
        g = np.zeros_like(z)
        g[:n_a] = -w / w.sum()
        return g

    cons = [
        {"type": "ineq", "fun": lambda z: lin @ z - logp, "jac": lambda z: lin},
        {"type": "ineq", "fun": simplex, "jac": simplex_grad},
    ]
    rows = p.sum(axis=1)
    starts = [np.full(n_a, 1.0 / n_a), rows / rows.sum()]
    sq = np.sqrt(p.max(axis=1))
    starts.append(sq / sq.sum())
    while len(starts) < N_STARTS:
        starts.append(rng.dirichlet(np.ones(n_a)))

    best = (float("inf"), None)
    for u0 in starts:
        u0 = np.clip(u0, 1e-6, None)
        u0 = u0 / u0.sum()
        t0 = (p / u0[:, None]).max(axis=0)
        z0 = np.concatenate([np.log(u0), np.log(t0)])
        res = minimize(obj, z0, jac=obj_grad, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500})
        for z in (res.x, z0):
            u = np.exp(z[:n_a] - z[:n_a].max())
            u = np.clip(u / u.sum(), 1e-12, None)
            u = u / u.sum()
            val = dominance_objective(p, u)
            if val < best[0]:
                best = (val, u)
    if not np.isfinite(best[0]):
        raise SolverFailure("no finite objective found", {"p": p.tolist()})
    return best


def min_dominating_mass(p, rng=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Smallest total mass lambda of a product lambda * u (x) v dominating ``p``.

    Returns ``(lambda, u, v)`` with ``u``, ``v`` on their simplices and
    ``lambda * u[a] * v[b] >= p[a, b]``.
    """
    p = np.asarray(p, dtype=float)
    n_a, n_b = p.shape
    rows = np.flatnonzero(p.sum(axis=1) > 0)
    cols = np.flatnonzero(p.sum(axis=0) > 0)
    u = np.zeros(n_a)
    if len(rows) == 0:
        u[:] = 1.0 / n_a
        return 0.0, u, np.full(n_b, 1.0 / n_b)
    q = p[np.ix_(rows, cols)]
    if len(rows) == 1:
        val, uq = q.sum(), np.ones(1)
    elif len(rows) == 2:
        val, uq = _binary_min(q)
    elif len(cols) <= 2:
        # the minimum is symmetric in the two sides; solve on the small one
        vq = np.ones(1) if len(cols) == 1 else _binary_min(q.T)[1]
        t = (q / vq[None, :]).max(axis=1)
        uq = t / t.sum()
        val = dominance_objective(q, uq)
    else:
        if rng is None:
            rng = np.random.default_rng(SOLVER_SEED)
        val, uq = _slsqp_min(q, rng)
    u[rows] = uq
    dom = np.zeros(n_b)
    dom[cols] = (q / uq[:, None]).max(axis=0)
    total = dom.sum()
    v = dom / total if total > 0 else np.full(n_b, 1.0 / n_b)
    return float(val), u, v


def weak_compatibility(s: ConditionalSlice, tol: float = FEAS_TOL) -> CompatibilityResult:
    if s.form != "weak":
        raise SliceError("weak_compatibility needs a slice of p(a, b, d | c)")
    rng = np.random.default_rng(SOLVER_SEED)
    margins, witnesses = [], []
    for vals in s.values:
        val, u, v = min_dominating_mass(vals, rng)
        margins.append(val - 1.0)
        dom = v * val
        witnesses.append((tuple(float(x) for x in u), _with_slack(dom)))
    return _result("weak", margins, witnesses, s.c_states, tol)


def compatibility(s: ConditionalSlice, tol: float = FEAS_TOL) -> CompatibilityResult:
    if s.form == "strong":
        return strong_compatibility(s, tol)
    return weak_compatibility(s, tol)


# -- witnesses ----------------------------------------------------------------

@dataclass(frozen=True)
class EsepWitness:
    """A and B e-separated given C after deleting D, with C outside D's descendants.

    ``strong`` is set when A also has no descendants in D.
    """

    a: tuple[str, ...]
    b: tuple[str, ...]
    c: tuple[str, ...] = ()
    d: tuple[str, ...] = ()
    strong: bool = False

    @property
    def independence(self) -> bool:
        """True when D is empty and the constraint is a conditional independence."""
        return not self.d


def make_witness(g: Dag, a, b, c=(), d=()) -> EsepWitness:
    """Validate a candidate witness against ``g`` and set its strong flag."""
    a, b, c, d = (g.ordered([s] if isinstance(s, str) else s) for s in (a, b, c, d))
    desc_d = descendants(g, d) - set(d) if d else frozenset()
    if set(c) & desc_d:
        raise GraphError(f"conditioning set {list(c)} contains descendants of {list(d)}")
    if not e_separated(g, a, b, c, d, witness=False):
        raise GraphError(f"{list(a)} and {list(b)} are not e-separated given {list(c)} "
                         f"after deleting {list(d)}")
    return EsepWitness(a, b, c, d, strong=not (set(a) & desc_d))


@dataclass(frozen=True)
class TestablePair:
    x: str
    y: str
    d: tuple[str, ...]
    witness: EsepWitness

    __test__ = False


def testable_pairs(g: Dag) -> list[TestablePair]:
    """Observed pairs neither adjacent nor sharing a latent parent, each with
    the deletion set of every other observed vertex."""
    obs = g.observed
    out = []
    for x, y in itertools.permutations(obs, 2):
        if g.adjacent(x, y) or g.latent_parents(x) & g.latent_parents(y):
            continue
        d = tuple(v for v in obs if v not in (x, y))
        out.append(TestablePair(x, y, d, make_witness(g, [x], [y], (), d)))
    return out


def _witness_key(g, w):
    return (len(w.d), len(w.c), [g.index(v) for v in w.d], [g.index(v) for v in w.c])


def enumerate_witnesses(g: Dag, x: str, y: str, max_c: int | None = None,
                        max_d: int | None = None) -> list[EsepWitness]:
    """All (C, D) with X e-separated from Y given C after deleting D, C free of
    D's descendants, |C| <= max_c, |D| <= max_d, keeping only D sets that are
    inclusion-minimal for their C.  Sorted by (|D|, |C|, insertion order)."""
    for v in (x, y):
        if g.is_latent(v):
            raise GraphError(f"{v!r} is latent")
    if x == y:
        raise GraphError("x and y must differ")
    if g.adjacent(x, y):
        raise GraphError(f"{x!r} and {y!r} are adjacent")
    rest = [v for v in g.observed if v not in (x, y)]
    max_c = len(rest) if max_c is None else max_c
    max_d = len(rest) if max_d is None else max_d
    desc = {v: descendants(g, [v]) - {v} for v in rest}

    valid: dict[tuple, list[tuple]] = {}
    for labels in itertools.product((0, 1, 2), repeat=len(rest)):
        c = tuple(v for v, lab in zip(rest, labels) if lab == 1)
        d = tuple(v for v, lab in zip(rest, labels) if lab == 2)
        if len(c) > max_c or len(d) > max_d:
            continue
        desc_d = set().union(*(desc[v] for v in d)) if d else set()
        if desc_d & set(c):
            continue
        if e_separated(g, [x], [y], c, d, witness=False):
            valid.setdefault(c, []).append(d)

    out = []
    for c, ds in valid.items():
        sets = [frozenset(d) for d in ds]
        for d, ds_set in zip(ds, sets):
            if any(o < ds_set for o in sets):
                continue
            desc_d = set().union(*(desc[v] for v in d)) if d else set()
            out.append(EsepWitness((x,), (y,), c, d, strong=x not in desc_d))
    out.sort(key=lambda w: _witness_key(g, w))
    return out


def all_witnesses(g: Dag, max_c: int | None = None, max_d: int | None = None):
    """Witnesses for every ordered non-adjacent observed pair."""
    out = []
    for x, y in itertools.permutations(g.observed, 2):
        if not g.adjacent(x, y):
            out += enumerate_witnesses(g, x, y, max_c, max_d)
    return out


# -- checking a distribution ----------------------------------------------------

def build_slice(t: JointTable, w: EsepWitness, d_state) -> ConditionalSlice:
    """Assemble the slice for witness ``w`` at D = ``d_state`` from a joint table."""
    d_state = tuple(int(s) for s in d_state)
    keep = w.c + w.a + w.b + w.d
    m = marginalize(t, keep)
    arr = np.moveaxis(m.probs, [m.axis(v) for v in keep], list(range(len(keep))))
    cards = arr.shape
    nc = int(np.prod(cards[:len(w.c)], dtype=int))
    na = int(np.prod(cards[len(w.c):len(w.c) + len(w.a)], dtype=int))
    nb = int(np.prod(cards[len(w.c) + len(w.a):len(w.c) + len(w.a) + len(w.b)], dtype=int))
    full = arr.reshape(nc, na, nb, -1)
    nd = cards[len(keep) - len(w.d):]
    d_flat = int(np.ravel_multi_index(d_state, nd)) if w.d else 0
    cad = full[..., d_flat]                       # p(c, a, b, d)
    p_c = full.sum(axis=(1, 2, 3))
    c_states = list(itertools.product(*(range(k) for k in cards[:len(w.c)])))
    kept = [i for i in range(nc) if p_c[i] > ZERO_EVENT]
    skipped = tuple(c_states[i] for i in range(nc) if p_c[i] <= ZERO_EVENT)
    if w.strong:
        p_ac = full.sum(axis=(2, 3))
        vals = np.zeros((len(kept), na, nb))
        for j, i in enumerate(kept):
            ok = p_ac[i] > ZERO_EVENT
            vals[j, ok] = cad[i, ok] / p_ac[i, ok, None]
        form = "strong"
    else:
        vals = np.array([cad[i] / p_c[i] for i in kept]).reshape(len(kept), na, nb)
        form = "weak"
    return ConditionalSlice(vals, form, w.a, w.b, w.c, tuple(zip(w.d, d_state)),
                            tuple(c_states[i] for i in kept), skipped)


@dataclass(frozen=True)
class SliceVerdict:
    witness: EsepWitness
    d_state: tuple[int, ...]
    form: str
    feasible: bool
    margin: float
    violating_c: tuple[int, ...] | None = None
    skipped_c: tuple[tuple[int, ...], ...] = ()
    # slice values[c][a][b] the verdict was computed from
    marginals: tuple[tuple[tuple[float, ...], ...], ...] = ()


@dataclass(frozen=True)
class CheckReport:
    verdicts: tuple[SliceVerdict, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return all(v.feasible for v in self.verdicts)

    @property
    def max_margin(self) -> float:
        return max((v.margin for v in self.verdicts), default=-1.0)

    @property
    def infeasible(self) -> tuple[SliceVerdict, ...]:
        return tuple(v for v in self.verdicts if not v.feasible)


def _nested(arr):
    return tuple(tuple(tuple(float(x) for x in row) for row in mat) for mat in arr)


def check_distribution(g: Dag, t: JointTable, witnesses=None,
                       tol: float = FEAS_TOL) -> CheckReport:
    """Evaluate every witness at every value of its deletion set."""
    if set(t.variables) != set(g.observed):
        raise ModelError(f"table variables {t.variables} do not match observed vertices "
                         f"{g.observed}")
    for v in g.observed:
        if t.cards[v] != g.n_states(v):
            raise ModelError(f"table has {t.cards[v]} states for {v!r}, graph declares "
                             f"{g.n_states(v)}")
    if witnesses is None:
        witnesses = all_witnesses(g)
    verdicts = []
    for w in witnesses:
        for d_state in itertools.product(*(range(g.n_states(v)) for v in w.d)):
            s = build_slice(t, w, d_state)
            res = compatibility(s, tol)
            verdicts.append(SliceVerdict(w, tuple(d_state), s.form, res.feasible,
                                         res.margin, res.violating_c, s.skipped_c,
                                         _nested(s.values)))
    return CheckReport(tuple(verdicts))
