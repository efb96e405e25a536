"""Layer-weight selection: unweighted baseline, the two-community closed
form, and derivative-free numeric search for the general case.

The search objective is the squared top eigenvalue of the weighted signal
matrix restricted to the complement of the all-ones direction, divided by
the variance scale vartheta(w).  It is evaluated by deflating the symmetric
conjugate of the signal matrix, which is numerically stable for mixed-sign
weights; the value is invariant under rescaling of w, so results are
reported with sup-norm 1 and the largest-magnitude entry positive.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NoImprovementWarning, NotApplicable
from .model import ModelParams
from .rng import STREAM_WEIGHTS, substream

__all__ = [
    "WeightResult",
    "snr_objective",
    "weights_unit",
    "weights_optimal_r2",
    "weights_numeric",
]


@dataclass(frozen=True)
class WeightResult:
    w: np.ndarray
    achieved_snr: float
    above_ks: bool
    method: str
    tie: bool = False


def _deflated_extremes(params: ModelParams, w: np.ndarray) -> np.ndarray:
    """|eigenvalues| of the weighted signal matrix on the complement of the
    all-ones direction, sorted descending."""
    pi = params.pi
    sqrt_pi = np.sqrt(pi)
    Dw = np.zeros((params.r, params.r))
    for wk, layer in zip(w, params.layers):
        Dw += wk * (layer.q - 1) * layer.D
    sym = sqrt_pi[:, None] * Dw * sqrt_pi[None, :]
    psi1 = sqrt_pi  # unit: sum pi = 1
    proj = np.eye(params.r) - np.outer(psi1, psi1)
    deflated = proj @ sym @ proj
    vals = np.abs(np.linalg.eigvalsh(deflated))
    return np.sort(vals)[::-1][: params.r - 1] if params.r > 1 else np.zeros(0)


def snr_objective(params: ModelParams, w) -> float:
    """max_i mu_i^2 / vartheta over the eigenspaces orthogonal to all-ones."""
    w = np.asarray(w, dtype=float)
    vartheta_w = float(sum(wk ** 2 * (layer.q - 1) * layer.d
                         for wk, layer in zip(w, params.layers)))
    if vartheta_w <= 0.0:
        return 0.0
    ext = _deflated_extremes(params, w)
    if ext.size == 0:
        return 0.0
    return float(ext[0] ** 2 / vartheta_w)


def _normalize(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    peak = np.max(np.abs(w))
    if peak == 0.0:
        return w.copy()
    w = w / peak
    if w[int(np.argmax(np.abs(w)))] < 0:
        w = -w
    return w


def _result(params: ModelParams, w: np.ndarray, method: str) -> WeightResult:
    w = _normalize(w)
    snr = snr_objective(params, w)
    ext = _deflated_extremes(params, w)
    tie = bool(ext.size >= 2 and ext[0] > 0 and (ext[0] - ext[1]) <= 1e-9 * ext[0])
    return WeightResult(w=w, achieved_snr=snr, above_ks=snr > 1.0, method=method, tie=tie)


def weights_unit(params: ModelParams) -> WeightResult:
    """Unweighted baseline w = 1."""
    return _result(params, np.ones(params.K), "unit")


def weights_optimal_r2(params: ModelParams) -> WeightResult:
    """Closed-form optimum for two communities: w_k = mu2_k / d_k.

    With r = 2 all layers share the second eigenvector (the complement of
    all-ones is one-dimensional), and Cauchy-Schwarz gives the achieved value
    sum_k (q_k - 1) mu2_k^2 / d_k.
    """
    if params.r != 2:
        raise NotApplicable(f"closed form needs exactly 2 communities, got r={params.r}")
    mu2 = np.array([np.trace(layer.Q) - layer.d for layer in params.layers])
    d = params.degrees
    w = np.where(d > 0, mu2 / np.where(d > 0, d, 1.0), 0.0)
    return _result(params, w, "r2")


def weights_numeric(params: ModelParams, restarts: int = 32, tol: float = 1e-9,
                    seed: int = 0) -> WeightResult:
    """Derivative-free maximization of the scale-free SNR objective.

    Nelder-Mead from seeded starts including the all-ones vector, the
    two-community closed form when applicable, and the coordinate vectors;
    eigenvalue crossings make the objective non-smooth, so restarts do the
    global work.  Never returns below the unweighted baseline: if no restart
    improves on it, the baseline is returned with a warning.
    """
    K = params.K
    if K == 1:
        return _result(params, np.ones(1), "numeric")

    def neg(wvec):
        norm = np.linalg.norm(wvec)
        if norm < 1e-12:
            return 0.0
        return -snr_objective(params, wvec / norm)

    starts = [np.ones(K)]
    if params.r == 2:
        closed = weights_optimal_r2(params).w
        if np.any(closed != 0.0):
            starts.append(closed)
    starts.extend(np.eye(K))
    rng = substream(seed, STREAM_WEIGHTS)
    while len(starts) < restarts:
        starts.append(rng.standard_normal(K))
    starts = starts[:max(restarts, len(starts))]

    best_w, best_f = None, -np.inf
    for start in starts:
        res = minimize(neg, np.asarray(start, dtype=float), method="Nelder-Mead",
                       options={"xatol": tol, "fatol": 1e-14, "maxiter": 4000,
                                "maxfev": 8000})
        f = -res.fun
        if f > best_f + 0.0:
            best_f, best_w = f, res.x
    baseline = snr_objective(params, np.ones(K))
    if best_w is None or best_f < baseline - 1e-12:
        warnings.warn("no restart improved on the unweighted baseline",
                      NoImprovementWarning, stacklevel=2)
        return _result(params, np.ones(K), "numeric")
    return _result(params, best_w, "numeric")
