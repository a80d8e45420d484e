"""d-separation and e-separation (d-separation after deleting a vertex set).

:func:`d_separated` runs a linear-time reachability search over
(vertex, direction) states.  The active trail it finds may revisit a vertex;
it is turned into a simple path by splicing out the loop between the two
visits.  Splicing never blocks the junction at the repeated vertex: if the
merged junction were a blocked collider, the loop would start by leaving the
vertex along a directed path and have to turn at an active collider below it,
making the vertex itself an ancestor of the conditioning set; and if the
vertex is conditioned on, both visits were colliders, so the merged junction
is one too.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import chain

from .graph import Dag, GraphError, ancestors, induced_subgraph, remove_outgoing

BRUTEFORCE_MAX_VERTICES = 10


class QueryError(GraphError):
    """A separation query violates its disjointness/observability rules."""


@dataclass(frozen=True)
class SeparationQuery:
    a: frozenset[str]
    b: frozenset[str]
    c: frozenset[str] = frozenset()
    d: frozenset[str] = frozenset()

    def __init__(self, a, b, c=(), d=()):
        for name, val in zip("abcd", (a, b, c, d)):
            if isinstance(val, str):
                val = (val,)
            object.__setattr__(self, name, frozenset(val))

    def validate(self, g: Dag) -> None:
        if not self.a or not self.b:
            raise QueryError("A and B must be nonempty")
        sets = (self.a, self.b, self.c, self.d)
        for i in range(4):
            for j in range(i + 1, 4):
                common = sets[i] & sets[j]
                if common:
                    raise QueryError(f"sets {'ABCD'[i]} and {'ABCD'[j]} overlap on "
                                     f"{sorted(common)}")
        allv = frozenset().union(*sets)
        g._check(*allv)
        lat = g.ordered(v for v in allv if g.is_latent(v))
        if lat:
            raise QueryError(f"query sets must be observed, got latent {list(lat)}")


@dataclass(frozen=True)
class SeparationVerdict:
    separated: bool
    witness_path: tuple[str, ...] | None = None

    def __bool__(self):
        return self.separated


def _as_query(q, b=None, c=(), d=()):
    if isinstance(q, SeparationQuery):
        return q
    return SeparationQuery(q, b, c, d)


def _active_trail(g: Dag, a, b, c, want_path):
    """Search for an active trail from ``a`` to ``b`` given ``c``.

    States are (vertex, up) where ``up`` means the vertex was entered from
    one of its children (or is a start vertex).  Returns the vertex sequence
    of the trail, ``()`` when only existence was requested, or None.
    """
    anc_c = ancestors(g, c) if c else frozenset()
    parents, children = g._parents, g._children
    starts = [(v, True) for v in g.ordered(a)]
    prev = dict.fromkeys(starts)
    queue = deque(starts)
    while queue:
        state = queue.popleft()
        v, up = state
        if up and v not in c:
            nxt = chain(((p, True) for p in parents[v]), ((ch, False) for ch in children[v]))
        elif not up:
            nxt = chain(((ch, False) for ch in children[v]) if v not in c else (),
                        ((p, True) for p in parents[v]) if v in anc_c else ())
        else:
            continue
        for s in nxt:
            if s in prev:
                continue
            prev[s] = state
            if s[0] in b:
                if not want_path:
                    return ()
                trail = [s[0]]
                while (s := prev[s]) is not None:
                    trail.append(s[0])
                return _erase_loops(trail[::-1])
            queue.append(s)
    return None


def _erase_loops(trail):
    out, pos = [], {}
    for v in trail:
        if v in pos:
            for w in out[pos[v] + 1:]:
                del pos[w]
            del out[pos[v] + 1:]
        else:
            pos[v] = len(out)
            out.append(v)
    return tuple(out)


def d_separated(g: Dag, q, b=None, c=(), *, witness: bool = True) -> SeparationVerdict:
    """Test whether A and B are d-separated given C.

    ``q`` is a :class:`SeparationQuery` with an empty deletion set, or the set
    A followed by B and C.  With ``witness=False`` no path is reconstructed.
    """
    q = _as_query(q, b, c)
    q.validate(g)
    if q.d:
        raise QueryError("d_separated takes no deletion set; use e_separated")
    return _dsep(g, q.a, q.b, q.c, witness)


def _dsep(g, a, b, c, witness):
    trail = _active_trail(g, a, b, c, witness)
    if trail is None:
        return SeparationVerdict(True)
    return SeparationVerdict(False, trail or None)


def e_separated(g: Dag, q, b=None, c=(), d=(), *, witness: bool = True) -> SeparationVerdict:
    """A and B e-separated given C after deleting D: d-separation in G[V \\ D]."""
    q = _as_query(q, b, c, d)
    q.validate(g)
    sub = induced_subgraph(g, [v for v in g.vertices if v not in q.d]) if q.d else g
    return _dsep(sub, q.a, q.b, q.c, witness)


def e_separated_star(g: Dag, q, b=None, c=(), d=(), *, witness: bool = True) -> SeparationVerdict:
    """The same criterion evaluated as d-separation after cutting D's outgoing edges."""
    q = _as_query(q, b, c, d)
    q.validate(g)
    return _dsep(remove_outgoing(g, q.d), q.a, q.b, q.c, witness)


# -- brute-force oracle ------------------------------------------------------

def is_path(g: Dag, path) -> bool:
    if len(set(path)) != len(path) or any(v not in g for v in path):
        return False
    return all(g.adjacent(u, v) for u, v in zip(path, path[1:]))


def is_collider(g: Dag, left: str, mid: str, right: str) -> bool:
    return g.has_edge(left, mid) and g.has_edge(right, mid)


def path_blocked(g: Dag, path, c) -> bool:
    """Literal blocking rule: a non-collider in C, or a collider outside An(C)."""
    c = frozenset(c)
    anc_c = ancestors(g, c)
    for left, mid, right in zip(path, path[1:], path[2:]):
        if is_collider(g, left, mid, right):
            if mid not in anc_c:
                return True
        elif mid in c:
            return True
    return False


def iter_paths(g: Dag, a, b):
    """All simple paths from a vertex of ``a`` to one of ``b``, in lexicographic
    order of insertion indices."""
    b = frozenset(b)
    nbrs = {v: g.neighbors(v) for v in g.vertices}

    def extend(path, on_path):
        v = path[-1]
        for w in nbrs[v]:
            if w in on_path:
                continue
            path.append(w)
            on_path.add(w)
            if w in b:
                yield tuple(path)
            yield from extend(path, on_path)
            on_path.discard(w)
            path.pop()

    for start in g.ordered(a):
        if start in b:
            yield (start,)
        yield from extend([start], {start})


def d_separated_bruteforce(g: Dag, q, b=None, c=()) -> SeparationVerdict:
    """Enumerate every path between A and B and apply the blocking rule to each.

    Returns the lexicographically first unblocked path as witness.  Only for
    graphs with at most ``BRUTEFORCE_MAX_VERTICES`` vertices.
    """
    q = _as_query(q, b, c)
    q.validate(g)
    if q.d:
        raise QueryError("d_separated_bruteforce takes no deletion set")
    if len(g) > BRUTEFORCE_MAX_VERTICES:
        raise GraphError(f"graph too large for path enumeration ({len(g)} vertices)")
    for path in iter_paths(g, q.a, q.b):
        if not path_blocked(g, path, q.c):
            return SeparationVerdict(False, path)
    return SeparationVerdict(True)
