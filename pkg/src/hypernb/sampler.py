"""Random generation: block-model hypergraphs and branching-process hypertrees.

Hypergraph sampling is exact: candidate hyperedges are stratified by
(layer, community composition).  Within one class every candidate is present
independently with the same probability, so the number present is Binomial
and, given the count, the present set is uniform over distinct candidates.
Drawing the count and then rejection-sampling distinct edges therefore
reproduces the product-Bernoulli law without enumerating all candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, PopulationCap, ProbabilityOverflow
from .hypergraph import Assignment, LayeredHypergraph
from .model import ModelParams, compositions, multinomial
from .rng import STREAM_GW, STREAM_HSBM, STREAM_LABELS, substream

__all__ = [
    "SampleConfig",
    "HyperTree",
    "largest_remainder_counts",
    "sample_hsbm",
    "sample_gw_tree",
    "child_composition_table",
]

_INT64_CHUNK = 2 ** 62


@dataclass(frozen=True)
class SampleConfig:
    params: ModelParams
    n: int
    seed: int
    label_mode: str = "deterministic-blocks"

    def __post_init__(self):
        if self.label_mode not in ("deterministic-blocks", "shuffled"):
            raise InputError(f"unknown label mode {self.label_mode!r}")
        if self.n < max((layer.q for layer in self.params.layers), default=2):
            raise InputError("n must be at least the largest hyperedge size")


def largest_remainder_counts(pi: np.ndarray, n: int) -> np.ndarray:
    """Integer class sizes summing to n, closest to pi * n (largest remainder,
    ties to the lower index)."""
    raw = np.asarray(pi, dtype=float) * n
    base = np.floor(raw).astype(np.int64)
    rest = n - int(base.sum())
    if rest:
        frac = raw - base
        order = sorted(range(len(pi)), key=lambda i: (-frac[i], i))
        for i in order[:rest]:
            base[i] += 1
    return base


def _binomial_exact(rng: np.random.Generator, trials: int, p: float) -> int:
    """Binomial draw with arbitrarily large integer trial counts."""
    if p == 0.0 or trials == 0:
        return 0
    total = 0
    while trials > 0:
        chunk = min(trials, _INT64_CHUNK)
        total += int(rng.binomial(chunk, p))
        trials -= chunk
    return total


def _draw_distinct_edges(rng, pools, comp, count, q):
    """`count` distinct vertex sets of community profile `comp`, uniform.

    Sequential rejection on duplicates, vectorized in batches; inclusion
    probabilities are tiny so rejections are rare.
    """
    out = np.zeros((count, q), dtype=np.int64)
    seen = set()
    got = 0
    while got < count:
        batch = (count - got) + (count - got) // 8 + 8
        ok = np.ones(batch, dtype=bool)
        cols = []
        for i, c in enumerate(comp):
            if c == 0:
                continue
            pick = rng.integers(0, pools[i].size, size=(batch, c))
            if c > 1:
                srt = np.sort(pick, axis=1)
                ok &= np.all(srt[:, 1:] != srt[:, :-1], axis=1)
            cols.append(pools[i][pick])
        rows = np.sort(np.concatenate(cols, axis=1)[ok], axis=1)
        for row in rows:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                out[got] = row
                got += 1
                if got == count:
                    break
    return out


def sample_hsbm(cfg: SampleConfig) -> tuple[LayeredHypergraph, Assignment]:
    """Sample one layered block-model hypergraph plus its ground-truth labels.

    Community sizes are the largest-remainder rounding of pi * n; labels are
    contiguous blocks or a seeded shuffle.  Each (layer, composition) class
    owns an independent substream, so the output is reproducible regardless
    of traversal order.
    """
    params, n, seed = cfg.params, cfg.n, cfg.seed
    sizes = largest_remainder_counts(params.pi, n)
    labels = np.repeat(np.arange(params.r, dtype=np.int64), sizes)
    if cfg.label_mode == "shuffled":
        perm = substream(seed, STREAM_LABELS).permutation(n)
        shuffled = np.empty(n, dtype=np.int64)
        shuffled[perm] = labels
        labels = shuffled
    pools = [np.flatnonzero(labels == i) for i in range(params.r)]

    layer_edges = []
    for k, layer in enumerate(params.layers):
        q = layer.q
        denom = math.comb(n, q - 1)
        edges = []
        for ci, comp in enumerate(compositions(q, params.r)):
            p = layer.tensor.value(comp)
            if p == 0.0:
                continue
            p_edge = p / denom
            if p_edge > 1.0:
                raise ProbabilityOverflow(
                    f"layer {k} composition {comp}: inclusion probability {p_edge:.3g} > 1"
                )
            candidates = 1
            for i, c in enumerate(comp):
                candidates *= math.comb(int(sizes[i]), c)
            if candidates == 0:
                continue
            rng = substream(seed, STREAM_HSBM, k, ci)
            count = _binomial_exact(rng, candidates, p_edge)
            if count:
                edges.append(_draw_distinct_edges(rng, pools, comp, count, q))
        layer_edges.append(np.concatenate(edges, axis=0) if edges else np.zeros((0, q), np.int64))
    g = LayeredHypergraph.from_edges(n, [layer.q for layer in params.layers], layer_edges)
    return g, Assignment(labels=labels)


def child_composition_table(params: ModelParams):
    """Per (layer, parent type): compositions of the q-1 children and their
    probabilities mult(comp) * p_(parent, comp) * prod pi^comp / d."""
    table = []
    for layer in params.layers:
        comps = compositions(layer.q - 1, params.r)
        per_type = []
        for i in range(params.r):
            probs = np.zeros(len(comps))
            for ci, comp in enumerate(comps):
                key = list(comp)
                key[i] += 1
                p = layer.tensor.value(tuple(key))
                if p:
                    weight = multinomial(comp)
                    for j, c in enumerate(comp):
                        if c:
                            weight *= params.pi[j] ** c
                    probs[ci] = p * weight
            total = probs.sum()
            if total > 0:
                probs = probs / total
            per_type.append((comps, probs))
        table.append(per_type)
    return table


@dataclass
class HyperTree:
    """Rooted layered hypertree truncated at a fixed depth.

    Node arrays are parallel; node 0 is the root.  Each non-root node hangs
    off exactly one parent hyperedge; a layer-k hyperedge contributes q_k - 1
    children and carries the layer tag used for path weights.
    """

    root_type: int
    depth: int
    node_type: np.ndarray
    node_depth: np.ndarray
    node_parent: np.ndarray      # -1 for the root
    node_edge: np.ndarray        # parent hyperedge id, -1 for the root
    node_pathw: np.ndarray       # product of layer weights along the root path
    edge_layer: np.ndarray
    edge_parent: np.ndarray      # parent node of each hyperedge

    @property
    def n_nodes(self) -> int:
        return self.node_type.size

    def generation(self, t: int) -> np.ndarray:
        return np.flatnonzero(self.node_depth == t)


def sample_gw_tree(params: ModelParams, root_type: int, depth: int, seed: int,
                   node_cap: int = 10 ** 7) -> HyperTree:
    """Sample a layered branching-process hypertree truncated at `depth`.

    Per vertex and layer the hyperedge offspring count is Poisson(d_k); each
    hyperedge draws a child-type composition from the table above and orders
    the children uniformly.
    """
    if depth < 0:
        raise InputError("depth must be >= 0")
    if not 0 <= root_type < params.r:
        raise InputError(f"root type {root_type} outside [0, {params.r})")
    rng = substream(seed, STREAM_GW)
    table = child_composition_table(params)
    d_vec = params.degrees
    w_vec = params.weights

    node_type = [root_type]
    node_depth = [0]
    node_parent = [-1]
    node_edge = [-1]
    node_pathw = [1.0]
    edge_layer = []
    edge_parent = []

    frontier = [0]
    for t in range(depth):
        next_frontier = []
        for v in frontier:
            tv = node_type[v]
            pw = node_pathw[v]
            counts = rng.poisson(d_vec)
            for k, mk in enumerate(counts):
                if mk == 0:
                    continue
                comps, probs = table[k][tv]
                picks = rng.choice(len(comps), size=mk, p=probs)
                for ci in picks:
                    eid = len(edge_layer)
                    edge_layer.append(k)
                    edge_parent.append(v)
                    child_types = np.repeat(np.arange(params.r), comps[ci])
                    child_types = rng.permutation(child_types)
                    for ct in child_types:
                        node_type.append(int(ct))
                        node_depth.append(t + 1)
                        node_parent.append(v)
                        node_edge.append(eid)
                        node_pathw.append(pw * w_vec[k])
                        next_frontier.append(len(node_type) - 1)
            if len(node_type) > node_cap:
                raise PopulationCap(
                    f"tree exceeded {node_cap} nodes at depth {t + 1}; parameters too hot"
                )
        frontier = next_frontier
    return HyperTree(
        root_type=root_type,
        depth=depth,
        node_type=np.array(node_type, dtype=np.int64),
        node_depth=np.array(node_depth, dtype=np.int64),
        node_parent=np.array(node_parent, dtype=np.int64),
        node_edge=np.array(node_edge, dtype=np.int64),
        node_pathw=np.array(node_pathw, dtype=float),
        edge_layer=np.array(edge_layer, dtype=np.int64),
        edge_parent=np.array(edge_parent, dtype=np.int64),
    )
