"""Monte Carlo verification of the branching-process functional identities.

The normalized generation functionals Z_t = mu^{-t} f_{phi,t} form a
martingale with closed-form cross-moments; this module samples trees, builds
the empirical statistics, and compares them to the closed forms at a 4
standard-error tolerance.

Large sample counts never materialize individual trees: particles of one
tree that share (type, layer profile of the root path) are exchangeable and
evolve independently, so the whole generation collapses to class counts.
Poisson offspring sums and thinning make the aggregated evolution exactly
distributed as the per-node definition; `test_treecheck` cross-validates the
two samplers on moments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DepthExceeded, IndexOutOfRange, InputError, PopulationCap
from .model import ModelParams, SpectralConstants, compositions
from .rng import STREAM_TREECHECK, substream
from .sampler import HyperTree, child_composition_table

__all__ = [
    "QThree",
    "TreeFunctionalReport",
    "q3_tensor",
    "q3_combination",
    "q3_apply",
    "q3_pi_contract",
    "y_vec",
    "eval_functional",
    "cross_moment_theory",
    "increment_theory",
    "simulate_generation_counts",
    "martingale_check",
]


@dataclass(frozen=True)
class QThree:
    """Per-layer 3-tensors of pair interactions inside one hyperedge, plus the
    squared-weight combination used by second-moment formulas."""

    per_layer: tuple
    weighted: np.ndarray


def _layer_q3(layer, pi: np.ndarray) -> np.ndarray:
    """Q3[i, j, l] = pi_j pi_l sum over completions of p_(i,j,l,...) with
    multinomial weights; zero for pairwise layers (no second neighbor inside
    an edge)."""
    r = pi.size
    out = np.zeros((r, r, r))
    if layer.q < 3:
        return out
    from .model import multinomial, _pi_power

    for comp in compositions(layer.q - 3, r):
        wcomp = multinomial(comp) * _pi_power(pi, comp)
        if wcomp == 0.0:
            continue
        base = np.array(comp)
        for i in range(r):
            for j in range(r):
                for ll in range(r):
                    key = base.copy()
                    key[i] += 1
                    key[j] += 1
                    key[ll] += 1
                    p = layer.tensor.value(tuple(key))
                    if p:
                        out[i, j, ll] += p * wcomp
    return out * pi[None, :, None] * pi[None, None, :]


def q3_tensor(params: ModelParams) -> QThree:
    per_layer = tuple(_layer_q3(layer, params.pi) for layer in params.layers)
    return QThree(per_layer=per_layer,
                  weighted=q3_combination(params, params.weights ** 2, per_layer))


def q3_combination(params: ModelParams, a, per_layer=None) -> np.ndarray:
    """sum_k a_k (q_k - 1)(q_k - 2) Q3^(k)."""
    a = np.asarray(a, dtype=float)
    if per_layer is None:
        per_layer = tuple(_layer_q3(layer, params.pi) for layer in params.layers)
    out = np.zeros((params.r,) * 3)
    for ak, layer, q3 in zip(a, params.layers, per_layer):
        out += ak * (layer.q - 1) * (layer.q - 2) * q3
    return out


def q3_apply(q3: np.ndarray, phi: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """Contract the two neighbor slots: out[i] = sum_{j,l} q3[i,j,l] phi_j phi2_l."""
    return np.einsum("ijl,j,l->i", q3, phi, phi2)


def q3_pi_contract(q3: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Contract the parent slot with the type distribution; for a layer tensor
    this recovers Pi Q^(k) exactly."""
    return np.einsum("ijl,i->jl", q3, pi)


def y_vec(params: ModelParams, consts: SpectralConstants,
          phi: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """Second-moment source vector K (phi o phi2) + Q3 x phi x phi2."""
    q3w = q3_tensor(params).weighted
    return consts.K_mat @ (phi * phi2) + q3_apply(q3w, phi, phi2)


def eval_functional(tree: HyperTree, xi: np.ndarray, t: int) -> float:
    """sum over generation-t vertices of (path weight) * xi(type)."""
    if t > tree.depth:
        raise DepthExceeded(f"tree sampled to depth {tree.depth}, requested {t}")
    xi = np.asarray(xi, dtype=float)
    gen = tree.generation(t)
    if gen.size == 0:
        return 0.0
    return float(np.sum(tree.node_pathw[gen] * xi[tree.node_type[gen]]))


def cross_moment_theory(params: ModelParams, consts: SpectralConstants,
                        i: int, j: int, t: int, root_type: int) -> float:
    """Closed form for E[Z_t Z'_t] conditioned on the root type."""
    phi_i = consts.phi[:, i]
    phi_j = consts.phi[:, j]
    mu_i, mu_j = consts.mu[i], consts.mu[j]
    y = y_vec(params, consts, phi_i, phi_j)
    total = phi_i[root_type] * phi_j[root_type]
    term = y.copy()
    for s in range(t):
        total += term[root_type] / (mu_i * mu_j) ** (s + 1)
        term = consts.K_mat @ term
    return float(total)


def increment_theory(params: ModelParams, consts: SpectralConstants,
                     i: int, t: int, root_type: int) -> float:
    """Closed form for E[(Z_{t+1} - Z_t)^2] conditioned on the root type
    (the unnormalized version is the t-fold variance propagation of the
    second-moment source vector)."""
    phi_i = consts.phi[:, i]
    mu_i = consts.mu[i]
    y = y_vec(params, consts, phi_i, phi_i)
    term = y.copy()
    for _ in range(t):
        term = consts.K_mat @ term
    return float(term[root_type] / mu_i ** (2 * (t + 1)))


def _weight_classes(K: int, depth: int):
    """All layer-count profiles of root paths up to the given depth."""
    return {prof: idx for idx, prof in enumerate(
        p for t in range(depth + 1) for p in compositions(t, K))}


def simulate_generation_counts(params: ModelParams, root_type: int, depth: int,
                               M: int, seed: int, node_cap: int = 10 ** 7):
    """Joint class-count trajectories of M independent trees.

    Returns (profiles, counts) where counts[t] is an (M, r, n_profiles) int64
    array of generation-t vertices per (type, root-path layer profile).
    Exactness: particles sharing a class are exchangeable, each spawns
    Poisson(d_k) layer-k edges, so a class of size c spawns Poisson(c d_k)
    edges thinned into compositions independently; children counts follow
    from the composition.
    """
    if depth < 0:
        raise InputError("depth must be >= 0")
    if not 0 <= root_type < params.r:
        raise InputError(f"root type {root_type} outside [0, {params.r})")
    rng = substream(seed, STREAM_TREECHECK, root_type)
    table = child_composition_table(params)
    d_vec = params.degrees
    r, K = params.r, params.K
    profiles = _weight_classes(K, depth)
    n_prof = len(profiles)
    counts = [np.zeros((M, r, n_prof), dtype=np.int64) for _ in range(depth + 1)]
    root_prof = profiles[(0,) * K]
    counts[0][:, root_type, root_prof] = 1
    totals = np.ones(M, dtype=np.int64)
    for t in range(depth):
        cur = counts[t]
        nxt = counts[t + 1]
        for a in range(r):
            for prof, pidx in profiles.items():
                if sum(prof) != t:
                    continue
                c = cur[:, a, pidx]
                if not c.any():
                    continue
                for k in range(K):
                    if d_vec[k] == 0.0:
                        continue
                    comps, probs = table[k][a]
                    child_prof = list(prof)
                    child_prof[k] += 1
                    cidx = profiles[tuple(child_prof)]
                    for comp, p in zip(comps, probs):
                        if p == 0.0:
                            continue
                        edges = rng.poisson(c * (d_vec[k] * p))
                        for b in range(r):
                            if comp[b]:
                                nxt[:, b, cidx] += edges * comp[b]
        totals = totals + nxt.sum(axis=(1, 2))
        if totals.max() > node_cap:
            raise PopulationCap(
                f"a tree exceeded {node_cap} nodes at depth {t + 1}")
    return profiles, counts


def _z_trajectories(params: ModelParams, consts: SpectralConstants, i: int,
                    profiles, counts) -> np.ndarray:
    """Z_t per tree from class counts: sum of counts * path weight * phi_i(type),
    normalized by mu_i^t."""
    w = params.weights
    mu_i = consts.mu[i]
    phi_i = consts.phi[:, i]
    depth = len(counts) - 1
    M = counts[0].shape[0]
    n_prof = len(profiles)
    pathw = np.zeros(n_prof)
    for prof, idx in profiles.items():
        pw = 1.0
        for k, c in enumerate(prof):
            pw *= w[k] ** c
        pathw[idx] = pw
    Z = np.zeros((depth + 1, M))
    for t in range(depth + 1):
        contrib = counts[t].astype(float) * phi_i[None, :, None] * pathw[None, None, :]
        Z[t] = contrib.sum(axis=(1, 2)) / mu_i ** t
    return Z


@dataclass(frozen=True)
class TreeFunctionalReport:
    """Empirical vs closed-form statistics of the generation functionals.

    All per-root-type entries are arrays over depths 0..t_max (means, cross
    moments) or 0..t_max-1 (increments); `ok` aggregates every 4-SE check.
    """

    i: int
    j: int
    t_max: int
    M: int
    seed: int
    root_stats: dict
    ok: bool


def martingale_check(params: ModelParams, consts: SpectralConstants, i: int, j: int,
                     t_max: int, M: int, seed: int,
                     node_cap: int = 10 ** 7) -> TreeFunctionalReport:
    """Verify, per root type and within 4 SE: (a) flat martingale means equal
    to the eigenvector entry, (b) the closed-form cross second moments,
    (c) the closed-form increment second moments.
    """
    if M < 10 ** 3:
        raise InputError(f"need at least 1000 samples, got {M}")
    if not (0 <= i < consts.r0 and 0 <= j < consts.r0):
        raise IndexOutOfRange(f"eigen indices ({i}, {j}) outside [0, {consts.r0})")
    if consts.mu[i] == 0.0 or consts.mu[j] == 0.0:
        raise IndexOutOfRange("zero eigenvalue cannot normalize the functional")
    root_stats = {}
    all_ok = True
    for a in range(params.r):
        profiles, counts = simulate_generation_counts(
            params, a, t_max, M, seed, node_cap=node_cap)
        Zi = _z_trajectories(params, consts, i, profiles, counts)
        Zj = Zi if j == i else _z_trajectories(params, consts, j, profiles, counts)
        sqM = np.sqrt(M)
        mean_i = Zi.mean(axis=1)
        se_i = Zi.std(axis=1, ddof=1) / sqM
        target_mean = consts.phi[a, i]
        flat_ok = True
        for t in range(t_max):
            diff = Zi[t + 1] - Zi[t]
            se_d = max(diff.std(ddof=1) / sqM, 1e-15)
            flat_ok &= abs(diff.mean()) <= 4.0 * se_d
        mean_ok = all(
            abs(mean_i[t] - target_mean) <= 4.0 * max(se_i[t], 1e-15)
            for t in range(t_max + 1))
        cross_emp = np.empty(t_max + 1)
        cross_se = np.empty(t_max + 1)
        cross_th = np.empty(t_max + 1)
        for t in range(t_max + 1):
            prod = Zi[t] * Zj[t]
            cross_emp[t] = prod.mean()
            cross_se[t] = prod.std(ddof=1) / sqM
            cross_th[t] = cross_moment_theory(params, consts, i, j, t, a)
        cross_ok = all(
            abs(cross_emp[t] - cross_th[t]) <= 4.0 * max(cross_se[t], 1e-15)
            for t in range(t_max + 1))
        incr_emp = np.empty(t_max)
        incr_se = np.empty(t_max)
        incr_th = np.empty(t_max)
        for t in range(t_max):
            sq = (Zi[t + 1] - Zi[t]) * (Zj[t + 1] - Zj[t])
            incr_emp[t] = sq.mean()
            incr_se[t] = sq.std(ddof=1) / sqM
            mu_ij = consts.mu[i] * consts.mu[j]
            y = y_vec(params, consts, consts.phi[:, i], consts.phi[:, j])
            term = y.copy()
            for _ in range(t):
                term = consts.K_mat @ term
            incr_th[t] = term[a] / mu_ij ** (t + 1)
        incr_ok = all(
            abs(incr_emp[t] - incr_th[t]) <= 4.0 * max(incr_se[t], 1e-15)
            for t in range(t_max))
        root_stats[a] = {
            "mean": mean_i, "se": se_i, "target_mean": target_mean,
            "cross_emp": cross_emp, "cross_se": cross_se, "cross_theory": cross_th,
            "incr_emp": incr_emp, "incr_se": incr_se, "incr_theory": incr_th,
            "flat_ok": bool(flat_ok), "mean_ok": bool(mean_ok),
            "cross_ok": bool(cross_ok), "incr_ok": bool(incr_ok),
        }
        all_ok &= flat_ok and mean_ok and cross_ok and incr_ok
    return TreeFunctionalReport(i=i, j=j, t_max=t_max, M=M, seed=seed,
                                root_stats=root_stats, ok=bool(all_ok))
