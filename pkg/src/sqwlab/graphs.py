"""Finite digraphs for scattering walks.

Every graph here is a finite digraph whose directed edge set is closed under
reversal and contains no loops or parallel edges, so it is an undirected graph
traversed in both directions.  The walk lives on the directed edges; the
position of a neighbor in the (ascending) neighbor list of a vertex fixes the
row/column indexing of the scattering matrix placed at that vertex, and the
edge basis is sorted by (source, target).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

INF = math.inf


class Digraph:
    """Reversal-closed digraph with a fixed edge ordering.

    Parameters
    ----------
    neighbors : sequence of sequences of int
        neighbors[x] lists the vertices adjacent to x.  Lists must be
        strictly ascending (this also rules out parallel edges), must not
        contain x itself, and y in neighbors[x] must imply x in neighbors[y].
        Every vertex needs at least one neighbor.
    """

    def __init__(self, neighbors):
        nv = len(neighbors)
        if nv == 0:
            raise ValueError("graph needs at least one vertex")
        nbrs = []
        for x, ns in enumerate(neighbors):
            ns = tuple(int(y) for y in ns)
            if len(ns) == 0:
                raise ValueError(f"vertex {x} is isolated")
            if any(y < 0 or y >= nv for y in ns):
                raise ValueError(f"vertex {x} has a neighbor out of range")
            if any(ns[i] >= ns[i + 1] for i in range(len(ns) - 1)):
                raise ValueError(f"neighbor list of vertex {x} is not strictly ascending")
            if x in ns:
                raise ValueError(f"vertex {x} has a self-loop")
            nbrs.append(ns)
        for x, ns in enumerate(nbrs):
            for y in ns:
                if x not in nbrs[y]:
                    raise ValueError(f"edge ({x},{y}) lacks its reversed partner")
        self.vertex_count = nv
        self.neighbors = tuple(nbrs)
        self.degrees = tuple(len(ns) for ns in nbrs)
        self.max_degree = max(self.degrees)
        # sorted by (source, target) because sources ascend and each
        # neighbor list ascends
        self.edges = tuple((s, t) for s in range(nv) for t in nbrs[s])
        self.edge_index = {e: i for i, e in enumerate(self.edges)}

    @property
    def edge_count(self):
        return len(self.edges)

    def neighbor_position(self, x, y):
        """Index of y within the neighbor list of x."""
        return self.neighbors[x].index(y)

    def reverse(self, edge):
        s, t = edge
        return (t, s)

    def __repr__(self):
        return f"Digraph({self.vertex_count} vertices, {len(self.edges)} directed edges)"


@dataclass(frozen=True)
class BallSpec:
    """Center and radius of a vertex ball, the unit of all finite-volume cuts."""

    center: int
    radius: int

    def validate(self, g: Digraph):
        if not 0 <= self.center < g.vertex_count:
            raise ValueError(f"ball center {self.center} out of range")
        if self.radius < 0:
            raise ValueError(f"ball radius {self.radius} is negative")


def build_graph(spec, **params) -> Digraph:
    """Build one of the named graphs, or a graph from an explicit edge list.

    `spec` is either a kind string or a dict with a "kind" key; keyword
    arguments override dict entries.  Kinds and their parameters:

    - "path": size k >= 2
    - "cycle": size k >= 3
    - "torus_grid": rows a >= 3, cols b >= 3  (degree-4 discrete torus)
    - "complete": size k >= 2
    - "tree": branching b >= 1, depth h >= 1  (rooted b-ary tree)
    - "explicit": edges = iterable of directed (u, v) pairs, closed under
      reversal; pass allow_disconnected=True to accept a disconnected graph.
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    elif not isinstance(spec, dict):
        raise ValueError("graph spec must be a kind string or a dict")
    spec = {**spec, **params}
    kind = spec.pop("kind", None)
    if kind == "path":
        k = _take_int(spec, "size", low=2)
        _reject_extras("path", spec)
        nbrs = [[y for y in (x - 1, x + 1) if 0 <= y < k] for x in range(k)]
        return Digraph(nbrs)
    if kind == "cycle":
        k = _take_int(spec, "size", low=3)
        _reject_extras("cycle", spec)
        nbrs = [sorted({(x - 1) % k, (x + 1) % k}) for x in range(k)]
        return Digraph(nbrs)
    if kind == "torus_grid":
        a = _take_int(spec, "rows", low=3)
        b = _take_int(spec, "cols", low=3)
        _reject_extras("torus_grid", spec)
        nbrs = []
        for i in range(a):
            for j in range(b):
                around = {((i - 1) % a) * b + j, ((i + 1) % a) * b + j,
                          i * b + (j - 1) % b, i * b + (j + 1) % b}
                nbrs.append(sorted(around))
        return Digraph(nbrs)
    if kind == "complete":
        k = _take_int(spec, "size", low=2)
        _reject_extras("complete", spec)
        return Digraph([[y for y in range(k) if y != x] for x in range(k)])
    if kind == "tree":
        b = _take_int(spec, "branching", low=1)
        h = _take_int(spec, "depth", low=1)
        _reject_extras("tree", spec)
        children = {}
        parents = {}
        level = [0]
        count = 1
        for _ in range(h):
            nxt = []
            for p in level:
                kids = list(range(count, count + b))
                count += b
                children[p] = kids
                for c in kids:
                    parents[c] = p
                nxt.extend(kids)
            level = nxt
        nbrs = [[] for _ in range(count)]
        for p, kids in children.items():
            for c in kids:
                nbrs[p].append(c)
                nbrs[c].append(p)
        return Digraph([sorted(ns) for ns in nbrs])
    if kind == "explicit":
        edges = spec.pop("edges", None)
        allow_disconnected = bool(spec.pop("allow_disconnected", False))
        _reject_extras("explicit", spec)
        if not edges:
            raise ValueError("explicit graph needs a nonempty edge list")
        pairs = {(int(u), int(v)) for u, v in edges}
        nv = 1 + max(max(u, v) for u, v in pairs)
        nbrs = [set() for _ in range(nv)]
        for u, v in pairs:
            if (v, u) not in pairs:
                raise ValueError(f"edge ({u},{v}) lacks its reversed partner")
            nbrs[u].add(v)
        g = Digraph([sorted(ns) for ns in nbrs])
        if not allow_disconnected and _component_count(g) > 1:
            raise ValueError("explicit edge list is disconnected; pass allow_disconnected=True")
        return g
    raise ValueError(f"unknown graph kind {kind!r}")


def _take_int(spec, key, low):
    if key not in spec:
        raise ValueError(f"missing graph parameter {key!r}")
    v = spec.pop(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < low:
        raise ValueError(f"graph parameter {key!r} must be an integer >= {low}, got {v!r}")
    return v


def _reject_extras(kind, spec):
    if spec:
        raise ValueError(f"unknown parameter(s) for {kind!r} graph: {sorted(spec)}")


def _component_count(g):
    seen = [False] * g.vertex_count
    comps = 0
    for x0 in range(g.vertex_count):
        if seen[x0]:
            continue
        comps += 1
        q = deque([x0])
        seen[x0] = True
        while q:
            x = q.popleft()
            for y in g.neighbors[x]:
                if not seen[y]:
                    seen[y] = True
                    q.append(y)
    return comps


def distances_from(g: Digraph, x: int):
    """BFS distances from x to every vertex; INF marks unreachable vertices."""
    dist = [INF] * g.vertex_count
    dist[x] = 0
    q = deque([x])
    while q:
        u = q.popleft()
        du = dist[u]
        for v in g.neighbors[u]:
            if dist[v] is INF or dist[v] > du + 1:
                dist[v] = du + 1
                q.append(v)
    return dist


def graph_distance(g: Digraph, x: int, y: int):
    return distances_from(g, x)[y]


def edge_distance(g: Digraph, e, f):
    """Edge separation: the largest vertex distance among the four endpoint
    pairs.  Note this makes the separation of an edge from itself 1, not 0;
    it is a gauge of how far the *supports* spread, not a metric."""
    de0 = distances_from(g, e[0])
    de1 = distances_from(g, e[1])
    return max(de0[f[0]], de0[f[1]], de1[f[0]], de1[f[1]])


def ball_vertices(g: Digraph, x: int, r):
    dist = distances_from(g, x)
    return [y for y in range(g.vertex_count) if dist[y] <= r]


def sphere_vertices(g: Digraph, x: int, r):
    dist = distances_from(g, x)
    return [y for y in range(g.vertex_count) if dist[y] == r]


class ConsistentSubset:
    """A reversal-closed set of directed edges of a fixed graph.

    Keeps the member edges in the global (source, target) order so restricted
    operators inherit a canonical basis.  The complement is again consistent.
    """

    def __init__(self, g: Digraph, members):
        self.graph = g
        if isinstance(members, (set, frozenset)):
            mask = [e in members for e in g.edges]
        else:
            mask = [bool(b) for b in members]
            if len(mask) != len(g.edges):
                raise ValueError("member flag vector has the wrong length")
        self.mask = tuple(mask)
        for e, inside in zip(g.edges, self.mask):
            if inside != self.mask[g.edge_index[g.reverse(e)]]:
                raise ValueError(f"subset is not closed under reversal at edge {e}")
        self.edges = tuple(e for e, inside in zip(g.edges, self.mask) if inside)
        self.edge_index = {e: i for i, e in enumerate(self.edges)}

    def __contains__(self, edge):
        idx = self.graph.edge_index.get(tuple(edge))
        return idx is not None and self.mask[idx]

    def __len__(self):
        return len(self.edges)

    def complement(self):
        return ConsistentSubset(self.graph, [not b for b in self.mask])

    def neighbors_within(self, x):
        """F-neighbors of x: vertices y with (x, y) in the subset."""
        return tuple(y for y in self.graph.neighbors[x] if self.mask[self.graph.edge_index[(x, y)]])

    def interior_vertices(self):
        """Vertices all of whose incident edges belong to the subset."""
        g = self.graph
        return [x for x in range(g.vertex_count)
                if len(self.neighbors_within(x)) == g.degrees[x]]

    def boundary_vertices(self):
        """Vertices incident to the subset with at least one incident edge outside."""
        g = self.graph
        out = []
        for x in range(g.vertex_count):
            k = len(self.neighbors_within(x))
            if 0 < k < g.degrees[x]:
                out.append(x)
        return out

    def incident_vertices(self):
        return [x for x in range(self.graph.vertex_count) if self.neighbors_within(x)]


def edge_ball(g: Digraph, x: int, radius) -> ConsistentSubset:
    """Edges with both endpoints within `radius` of x.  Monotone in the
    radius, and equal to the whole edge set once the radius reaches the
    eccentricity of x."""
    dist = distances_from(g, x)
    members = [dist[s] <= radius and dist[t] <= radius for (s, t) in g.edges]
    return ConsistentSubset(g, members)
