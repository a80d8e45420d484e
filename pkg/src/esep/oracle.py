"""Brute-force checks used to verify the constraint and bound engines.

Everything here is exhaustive or closed-form and deliberately slow: random
models with exact tables, grid searches over product distributions, direct
search over the bilinear compatibility system of a two-by-two slice, and
replayable soundness sweeps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundsPreconditionError, admissible_witnesses, bounds_admissibility, \
    BoundsQuery, interventional_bounds
from .constraints import FEAS_TOL, CompatibilityResult, ConditionalSlice, SliceError, \
    all_witnesses, check_distribution
from .graph import Dag, descendants, remove_outgoing
from .model import ZERO_EVENT, Cpt, DiscreteModel, JointTable, conditional_prob, \
    fix_conditioning, intervene, joint, marginalize, observed_margin
from .separation import d_separated

MAX_GRID = 128
MAX_GRID_STATES = 4
CI_TOL = 1e-9
BOUND_TOL = 1e-9
ROUNDING_SLACK = 8 * np.finfo(float).eps


@dataclass(frozen=True)
class ModelGenSpec:
    graph: Dag
    seed: int = 0
    latent_states: int = 4
    states: tuple[tuple[str, int], ...] = ()
    concentration: float = 1.0


def model_seed(seed: int, index: int) -> int:
    """Seed of the ``index``-th model of a sweep started from ``seed``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def random_model(spec: ModelGenSpec) -> DiscreteModel:
    """Draw every CPT row independently from a symmetric Dirichlet."""
    g = spec.graph
    if spec.latent_states < 2:
        raise ValueError("latent variables need at least 2 states")
    if spec.states:
        g = Dag(g.vertices, g.edges, g.latent, {**g.states, **dict(spec.states)})
    states = {v: (spec.latent_states if g.is_latent(v) else g.n_states(v)) for v in g.vertices}
    rng = np.random.default_rng(spec.seed)
    cpts = {}
    for v in g.vertices:
        pa = g.parents(v)
        shape = tuple(states[p] for p in pa)
        k = states[v]
        rows = rng.dirichlet(np.full(k, spec.concentration), size=int(np.prod(shape, dtype=int)))
        rows = rows / rows.sum(axis=1, keepdims=True)
        cpts[v] = Cpt(v, pa, rows.reshape(shape + (k,)))
    return DiscreteModel(g, states, cpts)


def random_dag(rng: np.random.Generator, n_observed: int, n_latent: int = 0,
               p_edge: float = 0.5) -> Dag:
    """Random DAG on observed vertices V0.. and latent roots L0..

    Observed vertices are shuffled into a random order and each forward pair
    gets an edge with probability ``p_edge``; each latent gets at least one
    observed child.
    """
    obs = [f"V{i}" for i in range(n_observed)]
    lat = [f"L{i}" for i in range(n_latent)]
    order = [obs[i] for i in rng.permutation(n_observed)]
    edges = [(u, v) for i, u in enumerate(order) for v in order[i + 1:]
             if rng.random() < p_edge]
    for u in lat:
        if not obs:
            break
        kids = [v for v in obs if rng.random() < p_edge]
        if not kids:
            kids = [obs[int(rng.integers(n_observed))]]
        edges += [(u, v) for v in kids]
    return Dag(obs + lat, edges, lat)


# -- compatibility by exhaustive search -----------------------------------------

def simplex_grid(n: int, grid: int) -> np.ndarray:
    """All points of the n-simplex with coordinates in multiples of 1/grid."""
    if n == 1:
        return np.ones((1, 1))
    bars = np.array(list(itertools.combinations(range(grid + n - 1), n - 1)))
    edges = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), grid + n - 1)])
    return (np.diff(edges, axis=1) - 1) / grid


def brute_force_compat(s: ConditionalSlice, grid: int = 64,
                       tol: float = FEAS_TOL) -> CompatibilityResult:
    """Exhaustive compatibility check.

    Weak slices: for every Q_A on the grid, the least Q_B-mass able to
    dominate p(a, b, d | c) together with Q_A is sum_b max_a p / Q_A(a); the
    slice is compatible when some grid Q_A makes that mass at most 1.  The
    margin is the smallest such mass minus 1.  Strong slices are decided by
    their closed form.
    """
    n_c, n_a, n_b = s.values.shape
    if s.form == "strong":
        margins = [vals.max(axis=0).sum() - 1.0 for vals in s.values]
        wits = [(tuple(vals.max(axis=0)),) for vals in s.values]
        return _make_result("strong", margins, wits, s, tol)
    if max(n_a, n_b) > MAX_GRID_STATES:
        raise SliceError(f"state space {n_a}x{n_b} too large for grid search")
    if not 1 <= grid <= MAX_GRID:
        raise SliceError(f"grid must be in 1..{MAX_GRID}")
    pts = simplex_grid(n_a, grid)
    margins, wits = [], []
    for vals in s.values:
        rows = vals.sum(axis=1) > 0
        usable = (pts[:, rows] > 0).all(axis=1)
        u = pts[usable]
        ratio = np.zeros((len(u), n_a, n_b))
        ratio[:, rows] = vals[rows][None] / u[:, rows][:, :, None]
        need = ratio.max(axis=1)                      # least dominating Q_B, unnormalized
        mass = need.sum(axis=1)
        best = int(np.argmin(mass))
        margins.append(float(mass[best]) - 1.0)
        wits.append((tuple(u[best]), tuple(need[best])))
    return _make_result("weak", margins, wits, s, tol)


def _make_result(form, margins, wits, s, tol):
    margins = tuple(float(m) for m in margins)
    margin = max(margins) if margins else -1.0
    feasible = margin <= tol
    violating = None if feasible else tuple(s.c_states[int(np.argmax(margins))])
    return CompatibilityResult(feasible, margin, form, margins, violating,
                               tuple(wits) if feasible else None)


def bilinear_compatible(p0, grid: int = 64, tol: float = 1e-12) -> tuple[bool, float]:
    """Search for nonnegative fill-ins of a binary (Y, Z) slice making Y and Z independent.

    ``p0[j, k]`` holds p(X = xi, Y = j, Z = k).  We need p*(j, k) >= 0 with
    total mass 1 - sum(p0) such that q = p0 + p* has
    q[0, 0] q[1, 1] = q[1, 0] q[0, 1].  The Y-margin u0 = q[0, 0] + q[0, 1]
    is scanned on a grid; for fixed u0 the remaining unknowns satisfy a
    linear relation and feasibility is an interval check.  Returns the
    verdict and the widest feasible interval found (negative if none).
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (2, 2):
        raise SliceError("bilinear search needs a 2x2 slice")
    p000, p001 = p0[0]
    p010, p011 = p0[1]
    best = -np.inf
    for i in range(grid + 1):
        u0 = i / grid
        s0 = u0 - p000 - p001           # mass to add in row Y = 0
        s1 = 1.0 - u0 - p010 - p011     # mass to add in row Y = 1
        if s0 < -tol or s1 < -tol:
            continue
        s0, s1 = max(s0, 0.0), max(s1, 0.0)
        if u0 <= 0.0 or u0 >= 1.0:
            # degenerate Y: independence holds for any fill-in
            best = max(best, 0.0)
            continue
        # a = p*(0, 0) in [0, s0]; b = p*(1, 0) = b0 + k a must lie in [0, s1]
        b0 = (p000 * (p011 + s1) - p010 * (p001 + s0)) / u0
        k = (1.0 - u0) / u0
        lo = max(0.0, -b0 / k)
        hi = min(s0, (s1 - b0) / k)
        best = max(best, hi - lo)
    return bool(best >= -tol), float(best)


# -- Markov property ----------------------------------------------------------------

def ci_deviation(t: JointTable, a, b, c=()) -> float:
    """max |p(a, b | c) - p(a | c) p(b | c)| over c with p(c) > 0."""
    a, b, c = tuple(a), tuple(b), tuple(c)
    keep = c + a + b
    m = marginalize(t, keep)
    arr = np.moveaxis(m.probs, [m.axis(v) for v in keep], list(range(len(keep))))
    nc = int(np.prod(arr.shape[:len(c)], dtype=int))
    na = int(np.prod(arr.shape[len(c):len(c) + len(a)], dtype=int))
    arr = arr.reshape(nc, na, -1)
    worst = 0.0
    for sl in arr:
        pc = sl.sum()
        if pc <= ZERO_EVENT:
            continue
        cond = sl / pc
        dev = np.abs(cond - np.outer(cond.sum(axis=1), cond.sum(axis=0))).max()
        worst = max(worst, float(dev))
    return worst


def separation_statements(g: Dag, vertices=None):
    """Every d-separation A _||_ B | C among ``vertices`` (default: observed),
    with A, B nonempty and unordered."""
    verts = tuple(vertices if vertices is not None else g.observed)
    out = []
    n = len(verts)
    for labels in itertools.product(range(4), repeat=n):
        a = tuple(v for v, lab in zip(verts, labels) if lab == 1)
        b = tuple(v for v, lab in zip(verts, labels) if lab == 2)
        c = tuple(v for v, lab in zip(verts, labels) if lab == 3)
        if not a or not b or g.index(a[0]) > g.index(b[0]):
            continue
        if d_separated(g, a, b, c, witness=False):
            out.append((a, b, c))
    return out


def reveal_latents(m: DiscreteModel) -> Dag:
    """The model's graph with every vertex observed, so that separations
    involving latent vertices can be checked against ``joint(m)``."""
    g = m.graph
    return Dag(g.vertices, g.edges, (), m.states)


def global_markov_check(g: Dag, t: JointTable, statements=None) -> float:
    """Largest conditional-independence deviation over the graph's separations."""
    statements = separation_statements(g) if statements is None else statements
    return max((ci_deviation(t, a, b, c) for a, b, c in statements), default=0.0)


# -- fixed-parent construction -----------------------------------------------------

@dataclass(frozen=True)
class PstarReport:
    slice_max_diff: float
    markov_max_dev: float
    nondesc_max_diff: float
    failures: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.failures


def pstar_check(m: DiscreteModel, d, tol: float = CI_TOL, statements=None) -> PstarReport:
    """Verify the model obtained by clamping D = d in every conditioning set.

    Checks that (i) the joints agree on assignments with D = d, (ii) the
    clamped model satisfies every d-separation of the graph with D's outgoing
    edges removed, and (iii) the distribution of the observed non-descendants
    of D is unchanged.
    """
    d = dict(d)
    mstar = fix_conditioning(m, d)
    g_star = remove_outgoing(m.graph, d)
    failures = []

    full, full_star = joint(m), joint(mstar)
    idx = tuple(int(d[v]) if v in d else slice(None) for v in full.variables)
    slice_diff = float(np.abs(full.probs[idx] - full_star.probs[idx]).max())
    if slice_diff > tol:
        failures.append(f"joints differ by {slice_diff:.3g} on D = {d}")

    t_star = observed_margin(mstar)
    if statements is None:
        statements = separation_statements(g_star)
    markov = global_markov_check(g_star, t_star, statements)
    if markov > tol:
        failures.append(f"clamped model violates a separation of G* by {markov:.3g}")

    nondesc = [v for v in m.graph.observed if v not in descendants(m.graph, d)]
    nd_diff = 0.0
    if nondesc:
        t = observed_margin(m)
        nd_diff = float(np.abs(marginalize(t, nondesc).probs
                               - marginalize(t_star, nondesc).probs).max())
        if nd_diff > tol:
            failures.append(f"margin of non-descendants {nondesc} changed by {nd_diff:.3g}")
    return PstarReport(slice_diff, markov, nd_diff, tuple(failures))


# -- soundness sweep -------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    model_index: int
    model_seed: int
    detail: str


@dataclass(frozen=True)
class SweepReport:
    n_models: int
    seed: int
    concentration: float
    n_slices: int
    n_infeasible: int
    max_margin: float
    n_bound_checks: int
    max_bound_excess: float
    n_dominance_checks: int
    max_dominance_excess: float
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations


def bound_targets(g: Dag, max_c=None, max_d=None):
    """(x, y, C, D, strengthened_ok) for every ordered observed pair that is
    joined by x -> y or could be without creating a cycle."""
    out = []
    for x, y in itertools.permutations(g.observed, 2):
        if g.has_edge(y, x) or (not g.has_edge(x, y) and x in descendants(g, [y])):
            continue
        for c, d in admissible_witnesses(g, x, y, max_c, max_d):
            out.append((x, y, c, d, bounds_admissibility(g, x, y, c, d)))
    return out


def _states(g, vars_):
    return itertools.product(*(range(g.n_states(v)) for v in vars_))


def sweep_model(g: Dag, m: DiscreteModel, witnesses, targets, index=0, mseed=0,
                tol: float = FEAS_TOL, bound_tol: float = BOUND_TOL):
    """Run all checks on one model; returns partial sweep statistics."""
    t = observed_margin(m)
    viol = []
    rep = check_distribution(g, t, witnesses, tol)
    for v in rep.infeasible:
        w = v.witness
        viol.append(Violation("compatibility", index, mseed,
                              f"A={w.a} B={w.b} C={w.c} D={w.d} d={v.d_state} "
                              f"margin={v.margin:.3g}"))
    n_bounds = n_dom = 0
    max_excess = max_dom = -np.inf
    for x, y, c_vars, d_vars, strong_ok in targets:
        for d_state in _states(g, d_vars):
            d = dict(zip(d_vars, d_state))
            for xs in range(g.n_states(x)):
                t_do = observed_margin(intervene(m, {x: xs, **d}))
                for c_state in _states(g, c_vars):
                    c = dict(zip(c_vars, c_state))
                    if t_do.prob(c) <= ZERO_EVENT:
                        continue
                    # ratios of tiny probabilities lose absolute precision
                    p_min = min(t_do.prob(c), t.prob(c), t.prob({x: xs, **c}))
                    tol_here = bound_tol + ROUNDING_SLACK / max(p_min, ZERO_EVENT)
                    for ys in range(g.n_states(y)):
                        truth = conditional_prob(t_do, {y: ys}, c)
                        res = {}
                        for var in ("general", "strengthened") if strong_ok else ("general",):
                            q = BoundsQuery((x, xs), (y, ys), d, c, var)
                            try:
                                r = interventional_bounds(t, q, g)
                            except BoundsPreconditionError:
                                continue
                            res[var] = r
                            n_bounds += 1
                            excess = max(r.lower - truth, truth - r.upper)
                            max_excess = max(max_excess, excess)
                            if excess > tol_here:
                                viol.append(Violation(
                                    "containment", index, mseed,
                                    f"{var} p({y}={ys} | do({x}={xs}, {d}), {c}) = {truth:.6g} "
                                    f"outside [{r.lower:.6g}, {r.upper:.6g}]"))
                        if len(res) == 2:
                            n_dom += 1
                            gen, st = res["general"], res["strengthened"]
                            exc = max(gen.lower - st.lower, st.upper - gen.upper)
                            max_dom = max(max_dom, exc)
                            if exc > tol_here:
                                viol.append(Violation(
                                    "dominance", index, mseed,
                                    f"strengthened [{st.lower:.6g}, {st.upper:.6g}] not inside "
                                    f"general [{gen.lower:.6g}, {gen.upper:.6g}] for "
                                    f"x={xs} y={ys} d={d} c={c}"))
    return rep, n_bounds, float(max_excess), n_dom, float(max_dom), viol


def soundness_sweep(g: Dag, n_models: int = 200, seed: int = 0, concentration: float = 1.0,
                    latent_states: int = 4, max_c=None, max_d=None,
                    tol: float = FEAS_TOL, bound_tol: float = BOUND_TOL) -> SweepReport:
    """Check every implied constraint and bound on ``n_models`` random models.

    Model ``i`` uses seed ``model_seed(seed, i)`` and can be replayed alone.
    """
    witnesses = all_witnesses(g, max_c, max_d)
    targets = bound_targets(g, max_c, max_d)
    n_slices = n_inf = n_bounds = n_dom = 0
    max_margin = max_excess = max_dom = -np.inf
    violations = []
    for i in range(n_models):
        mseed = model_seed(seed, i)
        m = random_model(ModelGenSpec(g, mseed, latent_states, (), concentration))
        rep, nb, exc, nd, dom, viol = sweep_model(g, m, witnesses, targets, i, mseed,
                                                  tol, bound_tol)
        n_slices += len(rep.verdicts)
        n_inf += len(rep.infeasible)
        max_margin = max(max_margin, rep.max_margin)
        n_bounds += nb
        n_dom += nd
        max_excess = max(max_excess, exc)
        max_dom = max(max_dom, dom)
        violations += viol
    fin = lambda v: float(v) if np.isfinite(v) else -1.0  # noqa: E731
    return SweepReport(n_models, seed, concentration, n_slices, n_inf, fin(max_margin),
                       n_bounds, fin(max_excess), n_dom, fin(max_dom), tuple(violations))
