"""Directed acyclic graphs with latent (unobserved) root vertices.

Vertex names are strings; every iteration order in this module is the
insertion order of the vertices, so all derived outputs are reproducible.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping

DEFAULT_STATES = 2


class GraphError(ValueError):
    """Invalid graph structure or graph-description text."""


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("graph contains a cycle: " + " -> ".join(self.cycle))


class UnknownVertexError(GraphError):
    def __init__(self, names):
        self.names = tuple(names)
        super().__init__("unknown vertex: " + ", ".join(self.names))


class Dag:
    """An immutable DAG whose latent vertices are parentless.

    ``states`` gives the number of states of each observed vertex; observed
    vertices not mentioned default to binary.
    """

    __slots__ = ("_vertices", "_index", "_edges", "_latent", "_states",
                 "_parents", "_children", "_hash")

    def __init__(self, vertices: Iterable[str], edges: Iterable[tuple[str, str]] = (),
                 latent: Iterable[str] = (), states: Mapping[str, int] | None = None):
        vertices = tuple(vertices)
        seen = set()
        for v in vertices:
            if not isinstance(v, str) or not v:
                raise GraphError(f"vertex names must be nonempty strings, got {v!r}")
            if v in seen:
                raise GraphError(f"duplicate vertex name {v!r}")
            seen.add(v)
        edges = list(edges)
        latent = frozenset(latent)
        states = dict(states or {})

        unknown = {v for e in edges for v in e if v not in seen}
        unknown |= {v for v in latent if v not in seen}
        unknown |= {v for v in states if v not in seen}
        if unknown:
            raise UnknownVertexError(sorted(unknown))
        if len(set(edges)) != len(edges):
            raise GraphError("duplicate edge")
        for p, c in edges:
            if p == c:
                raise GraphError(f"self-edge on {p!r}")
            if c in latent:
                raise GraphError(f"latent vertex {c!r} has parent {p!r}")
        for v, k in states.items():
            if v in latent:
                raise GraphError(f"state count given for latent vertex {v!r}")
            if int(k) != k or k < 2:
                raise GraphError(f"vertex {v!r} needs at least 2 states, got {k!r}")

        self._init(vertices, edges, latent,
                   {v: int(states.get(v, DEFAULT_STATES)) for v in vertices if v not in latent})
        order = self.topological_order()
        if len(order) != len(vertices):
            raise CycleError(self._find_cycle())

    def _init(self, vertices, edges, latent, states):
        self._vertices = vertices
        self._index = {v: i for i, v in enumerate(vertices)}
        idx = self._index
        self._edges = tuple(sorted(edges, key=lambda e: (idx[e[0]], idx[e[1]])))
        self._latent = latent
        self._states = states
        parents = {v: [] for v in vertices}
        children = {v: [] for v in vertices}
        for p, c in self._edges:
            parents[c].append(p)
            children[p].append(c)
        self._parents = {v: tuple(ps) for v, ps in parents.items()}
        self._children = {v: tuple(cs) for v, cs in children.items()}
        self._hash = None

    @classmethod
    def _trusted(cls, vertices, edges, latent, states) -> Dag:
        # Skips validation; callers guarantee a subgraph of a valid Dag.
        g = cls.__new__(cls)
        g._init(tuple(vertices), edges, frozenset(latent), states)
        return g

    # -- accessors ---------------------------------------------------------

    @property
    def vertices(self) -> tuple[str, ...]:
        return self._vertices

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return self._edges

    @property
    def latent(self) -> tuple[str, ...]:
        return tuple(v for v in self._vertices if v in self._latent)

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(v for v in self._vertices if v not in self._latent)

    @property
    def states(self) -> dict[str, int]:
        return dict(self._states)

    def n_states(self, v: str) -> int:
        self._check(v)
        if v in self._latent:
            raise GraphError(f"latent vertex {v!r} has no declared state count")
        return self._states[v]

    def is_latent(self, v: str) -> bool:
        self._check(v)
        return v in self._latent

    def parents(self, v: str) -> tuple[str, ...]:
        self._check(v)
        return self._parents[v]

    def children(self, v: str) -> tuple[str, ...]:
        self._check(v)
        return self._children[v]

    def has_edge(self, parent: str, child: str) -> bool:
        self._check(parent, child)
        return child in self._children[parent]

    def adjacent(self, u: str, v: str) -> bool:
        return self.has_edge(u, v) or self.has_edge(v, u)

    def neighbors(self, v: str) -> tuple[str, ...]:
        """Parents and children of ``v`` in insertion order."""
        self._check(v)
        adj = set(self._parents[v]) | set(self._children[v])
        return tuple(w for w in self._vertices if w in adj)

    def latent_parents(self, v: str) -> frozenset[str]:
        return frozenset(p for p in self.parents(v) if p in self._latent)

    def index(self, v: str) -> int:
        self._check(v)
        return self._index[v]

    def ordered(self, names: Iterable[str]) -> tuple[str, ...]:
        """Sort ``names`` by insertion order."""
        names = set(names)
        self._check(*names)
        return tuple(v for v in self._vertices if v in names)

    def __contains__(self, v) -> bool:
        return v in self._index

    def __len__(self) -> int:
        return len(self._vertices)

    def _check(self, *names):
        missing = [n for n in names if n not in self._index]
        if missing:
            raise UnknownVertexError(missing)

    # -- structure ---------------------------------------------------------

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm; ties broken by insertion order."""
        indeg = {v: len(self._parents[v]) for v in self._vertices}
        ready = [v for v in self._vertices if indeg[v] == 0]
        out = []
        while ready:
            ready.sort(key=self._index.__getitem__)
            v = ready.pop(0)
            out.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        return tuple(out)

    def _find_cycle(self):
        colour = dict.fromkeys(self._vertices, 0)
        stack = []

        def visit(v):
            colour[v] = 1
            stack.append(v)
            for c in self._children[v]:
                if colour[c] == 1:
                    return stack[stack.index(c):] + [c]
                if colour[c] == 0:
                    found = visit(c)
                    if found:
                        return found
            stack.pop()
            colour[v] = 2
            return None

        for v in self._vertices:
            if colour[v] == 0:
                found = visit(v)
                if found:
                    return found
        return []

    # -- dunder ------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Dag):
            return NotImplemented
        return (self._vertices == other._vertices and self._edges == other._edges
                and self._latent == other._latent and self._states == other._states)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._vertices, self._edges, self._latent,
                               tuple(sorted(self._states.items()))))
        return self._hash

    def __repr__(self):
        parts = [f"{p}->{c}" for p, c in self._edges]
        lat = ",".join(self.latent)
        return f"Dag([{', '.join(parts)}], latent={{{lat}}})"


# -- closure operations ------------------------------------------------------

def _closure(g: Dag, seeds, step) -> frozenset[str]:
    seeds = set(seeds)
    g._check(*seeds)
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        v = stack.pop()
        for w in step[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(seen)


def ancestors(g: Dag, s: Iterable[str]) -> frozenset[str]:
    """Vertices with a directed path into ``s``, including ``s`` itself."""
    return _closure(g, s, g._parents)


def descendants(g: Dag, s: Iterable[str]) -> frozenset[str]:
    """Vertices reachable from ``s`` by directed paths, including ``s`` itself."""
    return _closure(g, s, g._children)


# -- transformations ---------------------------------------------------------

def induced_subgraph(g: Dag, keep: Iterable[str]) -> Dag:
    keep = set(keep)
    g._check(*keep)
    verts = [v for v in g.vertices if v in keep]
    edges = [(p, c) for p, c in g.edges if p in keep and c in keep]
    return Dag._trusted(verts, edges, g._latent & keep,
                        {v: k for v, k in g._states.items() if v in keep})


def _observed_subset(g: Dag, s, what):
    s = set(s)
    g._check(*s)
    bad = sorted(v for v in s if v in g._latent)
    if bad:
        raise GraphError(f"{what} must contain observed vertices only, got latent {bad}")
    return s


def remove_outgoing(g: Dag, d: Iterable[str]) -> Dag:
    """Drop every edge whose tail lies in ``d``."""
    d = _observed_subset(g, d, "deletion set")
    if not d:
        return g
    edges = [(p, c) for p, c in g.edges if p not in d]
    return Dag._trusted(g.vertices, edges, g._latent, g._states)


def remove_incoming(g: Dag, x: Iterable[str]) -> Dag:
    """Drop every edge whose head lies in ``x`` (the graph of an intervention)."""
    x = _observed_subset(g, x, "intervention set")
    if not x:
        return g
    edges = [(p, c) for p, c in g.edges if c not in x]
    return Dag._trusted(g.vertices, edges, g._latent, g._states)


def remove_edge(g: Dag, parent: str, child: str) -> Dag:
    if not g.has_edge(parent, child):
        raise GraphError(f"no edge {parent} -> {child}")
    edges = [e for e in g.edges if e != (parent, child)]
    return Dag._trusted(g.vertices, edges, g._latent, g._states)


# -- text format -------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_.']*"
_EDGE = re.compile(rf"^({_NAME})\s*(->|<->)\s*({_NAME})$")
_LATENT = re.compile(rf"^latent\s+({_NAME})$")
_VAR = re.compile(rf"^var\s+({_NAME})(?:\s+(\d+))?$")


def parse_graph(text: str) -> Dag:
    """Parse the line-oriented graph description format.

    ``A -> B`` adds an edge, ``A <-> B`` adds a fresh latent ``_L<k>`` with
    edges into both, ``latent U`` marks ``U`` unobserved and ``var X k``
    declares an observed vertex with ``k`` states.  ``#`` starts a comment.
    """
    order: list[str] = []
    declared: dict[str, str] = {}       # name -> "var" | "latent"
    states: dict[str, int] = {}
    directed: list[tuple[str, str]] = []
    bidirected: list[tuple[str, str]] = []

    def touch(name):
        if name not in order:
            order.append(name)

    def declare(name, kind, lineno):
        if name in declared:
            raise GraphError(f"line {lineno}: duplicate vertex name {name!r}")
        declared[name] = kind
        touch(name)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _LATENT.match(line):
            declare(m.group(1), "latent", lineno)
        elif m := _VAR.match(line):
            declare(m.group(1), "var", lineno)
            k = int(m.group(2)) if m.group(2) else DEFAULT_STATES
            if k < 2:
                raise GraphError(f"line {lineno}: {m.group(1)!r} needs at least 2 states")
            states[m.group(1)] = k
        elif m := _EDGE.match(line):
            a, arrow, b = m.groups()
            if a == b:
                raise GraphError(f"line {lineno}: self-edge on {a!r}")
            touch(a)
            touch(b)
            (directed if arrow == "->" else bidirected).append((a, b))
        else:
            raise GraphError(f"line {lineno}: cannot parse {raw.strip()!r}")

    latent = {v for v, kind in declared.items() if kind == "latent"}
    for p, c in directed:
        if c in latent:
            raise GraphError(f"latent vertex {c!r} has parent {p!r}")
    for a, b in bidirected:
        bad = [v for v in (a, b) if v in latent]
        if bad:
            raise GraphError(f"bidirected edge touches latent vertex {bad[0]!r}")

    vertices = list(order)
    edges = list(directed)
    taken = set(vertices)
    k = 0
    for a, b in bidirected:
        k += 1
        while f"_L{k}" in taken:
            k += 1
        name = f"_L{k}"
        taken.add(name)
        vertices.append(name)
        latent.add(name)
        edges += [(name, a), (name, b)]
    if len(set(edges)) != len(edges):
        dup = next(e for e in edges if edges.count(e) > 1)
        raise GraphError(f"duplicate edge {dup[0]} -> {dup[1]}")
    return Dag(vertices, edges, latent, states)


def format_graph(g: Dag) -> str:
    """Serialize ``g`` in the text format accepted by :func:`parse_graph`."""
    lines = [f"latent {v}" if g.is_latent(v) else f"var {v} {g.n_states(v)}"
             for v in g.vertices]
    lines += [f"{p} -> {c}" for p, c in g.edges]
    return "\n".join(lines) + "\n"
