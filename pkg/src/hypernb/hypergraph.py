"""Layered hypergraph container, oriented-incidence indexing, and local queries.

Vertices are dense 0-based integers.  Layer k stores its hyperedges as rows
of a (m_k, q_k) integer array; rows are sorted ascending and the row list is
sorted lexicographically, which is the canonical form used by the text
format.  Hyperedges are distinct within a layer; identical vertex sets in
different layers are legal and remain distinguishable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from collections import deque

import numpy as np
import scipy.sparse as sp

from .errors import InputError, LengthMismatch

__all__ = [
    "LayeredHypergraph",
    "OrientedIndex",
    "Assignment",
    "Neighborhood",
    "degrees",
    "adjacency",
    "neighborhood",
    "is_tangle_free",
    "write_hypergraph",
    "read_hypergraph",
    "write_assignment",
    "read_assignment",
]


def _canonical_layer(edges, q: int, n: int, k: int) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, q), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != q:
        raise InputError(f"layer {k}: edges must be rows of {q} vertices")
    if arr.min() < 0 or arr.max() >= n:
        raise InputError(f"layer {k}: vertex id outside [0, {n})")
    arr = np.sort(arr, axis=1)
    if np.any(arr[:, 1:] == arr[:, :-1]):
        raise InputError(f"layer {k}: hyperedge with repeated vertex")
    order = np.lexsort(arr.T[::-1])
    arr = arr[order]
    if arr.shape[0] > 1 and np.any(np.all(arr[1:] == arr[:-1], axis=1)):
        raise InputError(f"layer {k}: duplicate hyperedge within a layer")
    return arr


@dataclass(frozen=True)
class LayeredHypergraph:
    """n vertices plus one canonical edge array per layer."""

    n: int
    q_sizes: tuple[int, ...]
    layers: tuple[np.ndarray, ...]

    @classmethod
    def from_edges(cls, n: int, q_sizes, layer_edges) -> "LayeredHypergraph":
        q_sizes = tuple(int(q) for q in q_sizes)
        if len(layer_edges) != len(q_sizes):
            raise InputError("need one edge list per layer")
        layers = tuple(
            _canonical_layer(edges, q, n, k)
            for k, (edges, q) in enumerate(zip(layer_edges, q_sizes))
        )
        return cls(n=int(n), q_sizes=q_sizes, layers=layers)

    @property
    def K(self) -> int:
        return len(self.q_sizes)

    @property
    def edge_counts(self) -> tuple[int, ...]:
        return tuple(layer.shape[0] for layer in self.layers)

    @property
    def oriented_count(self) -> int:
        return sum(q * m for q, m in zip(self.q_sizes, self.edge_counts))


def degrees(g: LayeredHypergraph, k: int) -> np.ndarray:
    """Number of layer-k hyperedges containing each vertex."""
    edges = g.layers[k]
    return np.bincount(edges.ravel(), minlength=g.n).astype(np.int64)


def adjacency(g: LayeredHypergraph, k: int) -> sp.csr_matrix:
    """A_k(x, y) = number of layer-k hyperedges containing both x and y (x != y)."""
    edges = g.layers[k]
    q = g.q_sizes[k]
    m = edges.shape[0]
    if m == 0:
        return sp.csr_matrix((g.n, g.n))
    rows, cols = [], []
    for i in range(q):
        for j in range(q):
            if i != j:
                rows.append(edges[:, i])
                cols.append(edges[:, j])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    mat = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(g.n, g.n))
    return mat.tocsr()


@dataclass(frozen=True)
class OrientedIndex:
    """Dense enumeration of oriented incidences (vertex -> hyperedge).

    Ids run layer-major, then edge-major in canonical edge order, then by
    position inside the sorted edge, so they are stable for a canonical
    hypergraph.  `vid[t]` and `eid[t]` give the vertex and the global edge id
    of oriented id t; per-edge arrays map global edge ids back to
    (layer, edge-in-layer, size).
    """

    m: int
    n_edges: int
    vid: np.ndarray          # (m,) vertex of each oriented id
    eid: np.ndarray          # (m,) global edge id of each oriented id
    edge_layer: np.ndarray   # (n_edges,) layer of each global edge
    edge_q: np.ndarray       # (n_edges,) size of each global edge
    edge_local: np.ndarray   # (n_edges,) index of the edge inside its layer
    layer_id_slices: tuple[slice, ...]  # oriented-id range of each layer

    @classmethod
    def build(cls, g: LayeredHypergraph) -> "OrientedIndex":
        vid_parts, eid_parts, slices = [], [], []
        edge_layer, edge_q, edge_local = [], [], []
        eid0 = 0
        id0 = 0
        for k, edges in enumerate(g.layers):
            mk, q = edges.shape[0], g.q_sizes[k]
            vid_parts.append(edges.ravel())
            eid_parts.append(np.repeat(np.arange(eid0, eid0 + mk, dtype=np.int64), q))
            edge_layer.append(np.full(mk, k, dtype=np.int64))
            edge_q.append(np.full(mk, q, dtype=np.int64))
            edge_local.append(np.arange(mk, dtype=np.int64))
            slices.append(slice(id0, id0 + mk * q))
            eid0 += mk
            id0 += mk * q
        cat = lambda parts, dt: (np.concatenate(parts) if parts else np.zeros(0, dtype=dt))
        return cls(
            m=id0,
            n_edges=eid0,
            vid=cat(vid_parts, np.int64),
            eid=cat(eid_parts, np.int64),
            edge_layer=cat(edge_layer, np.int64),
            edge_q=cat(edge_q, np.int64),
            edge_local=cat(edge_local, np.int64),
            layer_id_slices=tuple(slices),
        )


@dataclass(frozen=True)
class Assignment:
    """Community labels, one per vertex, in [0, r)."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.labels.ndim != 1:
            raise InputError("labels must be a flat vector")
        if self.labels.size and self.labels.min() < 0:
            raise InputError("labels must be >= 0")

    @property
    def n(self) -> int:
        return self.labels.size

    def counts(self, r: int) -> np.ndarray:
        if self.labels.size and self.labels.max() >= r:
            raise LengthMismatch(f"label {self.labels.max()} outside [0, {r})")
        return np.bincount(self.labels, minlength=r)


def _incidence_lists(g: LayeredHypergraph):
    """vertex -> list of global edge ids, and global edge id -> vertex row."""
    vertex_edges = [[] for _ in range(g.n)]
    edge_vertices = []
    gid = 0
    for edges in g.layers:
        for row in edges:
            edge_vertices.append(row)
            for x in row:
                vertex_edges[x].append(gid)
            gid += 1
    return vertex_edges, edge_vertices


@dataclass(frozen=True)
class Neighborhood:
    """BFS ball around a root: distances, member edges, per-layer counts."""

    root: int
    radius: int
    vertices: np.ndarray       # sorted vertex ids in the ball
    dist: dict                 # vertex -> hyperedge distance from root
    edges: tuple[np.ndarray, ...]  # per layer, rows of member hyperedges
    layer_counts: tuple[int, ...]


def neighborhood(g: LayeredHypergraph, x: int, t: int) -> Neighborhood:
    """Ball of hyperedge-radius t around x.

    Contains every vertex at distance <= t and every hyperedge incident to a
    vertex at distance <= t - 1 (all vertices of such an edge are inside the
    ball).
    """
    if not 0 <= x < g.n:
        raise InputError(f"root {x} outside [0, {g.n})")
    vertex_edges, edge_vertices = _incidence_lists(g)
    layer_of = []
    for k, edges in enumerate(g.layers):
        layer_of.extend([k] * edges.shape[0])
    dist = {x: 0}
    used_edges = set()
    frontier = deque([x])
    while frontier:
        v = frontier.popleft()
        if dist[v] >= t:
            continue
        for gid in vertex_edges[v]:
            if gid in used_edges:
                continue
            used_edges.add(gid)
            for y in edge_vertices[gid]:
                if y not in dist:
                    dist[int(y)] = dist[v] + 1
                    frontier.append(int(y))
    per_layer = [[] for _ in range(g.K)]
    for gid in sorted(used_edges):
        per_layer[layer_of[gid]].append(edge_vertices[gid])
    edges_out = tuple(
        np.array(rows, dtype=np.int64) if rows else np.zeros((0, g.q_sizes[k]), dtype=np.int64)
        for k, rows in enumerate(per_layer)
    )
    return Neighborhood(
        root=x,
        radius=t,
        vertices=np.array(sorted(dist), dtype=np.int64),
        dist=dist,
        edges=edges_out,
        layer_counts=tuple(e.shape[0] for e in edges_out),
    )


def is_tangle_free(g: LayeredHypergraph, ell: int) -> tuple[np.ndarray, bool]:
    """Per-vertex tangle-freeness of the radius-ell balls, plus the global verdict.

    A ball is tangle-free when its vertex-hyperedge factor graph has excess
    (incidences - nodes + 1) at most 1, i.e. contains at most one cycle.  The
    factor graph is used rather than any pairwise projection because a single
    hyperedge must not count as a clique of cycles.
    """
    if ell < 1:
        raise InputError(f"radius must be >= 1, got {ell}")
    vertex_edges, edge_vertices = _incidence_lists(g)
    verdict = np.ones(g.n, dtype=bool)
    for x in range(g.n):
        dist = {x: 0}
        used = set()
        frontier = deque([x])
        incidences = 0
        while frontier:
            v = frontier.popleft()
            if dist[v] >= ell:
                continue
            for gid in vertex_edges[v]:
                if gid in used:
                    continue
                used.add(gid)
                incidences += len(edge_vertices[gid])
                for y in edge_vertices[gid]:
                    if y not in dist:
                        dist[int(y)] = dist[v] + 1
                        frontier.append(int(y))
        nodes = len(dist) + len(used)
        excess = incidences - nodes + 1
        verdict[x] = excess <= 1
    return verdict, bool(verdict.all())


def write_hypergraph(g: LayeredHypergraph) -> str:
    """Canonical text form: header `n K q_1 ... q_K`, then `k v_1 ... v_qk` lines."""
    out = io.StringIO()
    out.write(" ".join(map(str, (g.n, g.K, *g.q_sizes))) + "\n")
    for k, edges in enumerate(g.layers):
        for row in edges:
            out.write(str(k) + " " + " ".join(map(str, row)) + "\n")
    return out.getvalue()


def read_hypergraph(text: str) -> LayeredHypergraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty hypergraph file")
    header = lines[0].split()
    if len(header) < 2:
        raise InputError("header must read `n K q_1 ... q_K`")
    n, K = int(header[0]), int(header[1])
    if len(header) != 2 + K:
        raise InputError(f"header announces K={K} layers but lists {len(header) - 2} sizes")
    q_sizes = [int(q) for q in header[2:]]
    layer_edges = [[] for _ in range(K)]
    for ln in lines[1:]:
        parts = [int(p) for p in ln.split()]
        k = parts[0]
        if not 0 <= k < K:
            raise InputError(f"layer index {k} outside [0, {K})")
        if len(parts) - 1 != q_sizes[k]:
            raise InputError(f"edge line `{ln}` does not match layer size {q_sizes[k]}")
        layer_edges[k].append(parts[1:])
    return LayeredHypergraph.from_edges(n, q_sizes, layer_edges)


def write_assignment(a: Assignment) -> str:
    return "".join(f"{label}\n" for label in a.labels)


def read_assignment(text: str) -> Assignment:
    labels = [int(ln) for ln in text.splitlines() if ln.strip()]
    return Assignment(labels=np.array(labels, dtype=np.int64))
