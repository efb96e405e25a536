"""Two-way reconstruction from aggregated vectors, and the overlap metric."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidThreshold, LengthMismatch, ZeroVector
from .hypergraph import Assignment
from .model import SpectralConstants
from .rng import STREAM_ROUND, substream

__all__ = [
    "ClusterConfig",
    "select_informative",
    "tilt_probabilities",
    "round_randomized",
    "round_sign",
    "overlap",
    "default_threshold",
    "choose_gamma",
]


@dataclass(frozen=True)
class ClusterConfig:
    mode: str = "sign"            # "sign" or "alg1"
    T: float | None = None        # default 2 sqrt(2) r sqrt(gamma) when None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("sign", "alg1"):
            raise InvalidThreshold(f"unknown rounding mode {self.mode!r}")
        if self.T is not None and self.T <= 0:
            raise InvalidThreshold(f"threshold must be positive, got {self.T}")


def _perron_aligned(y: np.ndarray, n: int) -> bool:
    norm = np.linalg.norm(y)
    if norm == 0.0:
        raise ZeroVector("aggregated vector is zero")
    return abs(float(np.sum(y))) / (math.sqrt(n) * norm) > 1.0 / math.log(n)


def select_informative(y1: np.ndarray, y2: np.ndarray, n: int | None = None):
    """Pick the community-informative vector among the top two aggregated
    vectors: drop the first when it aligns with the all-ones direction beyond
    the 1/log n test, then rescale so ||u||^2 = n.

    Returns (u, which) with which in {0, 1} naming the chosen input.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if n is None:
        n = y1.size
    if _perron_aligned(y1, n):
        u, which = y2, 1
    else:
        u, which = y1, 0
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ZeroVector("selected vector is zero")
    return u * (math.sqrt(n) / norm), which


def choose_gamma(consts: SpectralConstants, y1: np.ndarray | None = None,
                 n: int | None = None) -> float:
    """Overlap constant entering the rounding threshold: the second one when
    the leading aggregated direction is the uninformative all-ones (decided
    by the same 1/log n alignment test used for vector selection), the first
    otherwise."""
    if y1 is not None:
        aligned = _perron_aligned(np.asarray(y1, dtype=float), n or y1.size)
    else:
        lead = consts.phi[:, 0]
        aligned = np.allclose(lead, lead[0], rtol=1e-8, atol=1e-10)
    idx = 1 if aligned else 0
    if idx >= consts.r0:
        idx = consts.r0 - 1
    return float(consts.gamma[idx])


def default_threshold(r: int, gamma: float) -> float:
    return 2.0 * math.sqrt(2.0) * r * math.sqrt(gamma)


def tilt_probabilities(u: np.ndarray, T: float) -> np.ndarray:
    """P(x in V+) = 1/2 + u(x) 1_{|u(x)| <= T} / (2T); entries beyond the clamp
    fall back to a fair coin."""
    if T <= 0:
        raise InvalidThreshold(f"threshold must be positive, got {T}")
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) <= T
    return 0.5 + np.where(inside, u, 0.0) / (2.0 * T)


def round_randomized(u: np.ndarray, T: float, seed: int = 0) -> Assignment:
    """Randomized two-way rounding, independent per vertex with a seeded
    counter-based stream."""
    p_plus = tilt_probabilities(u, T)
    rng = substream(seed, STREAM_ROUND)
    draws = rng.random(p_plus.size)
    return Assignment(labels=np.where(draws < p_plus, 0, 1).astype(np.int64))


def round_sign(u: np.ndarray, seed: int = 0) -> Assignment:
    """Deterministic sign rounding; exact zeros get a seeded fair coin."""
    u = np.asarray(u, dtype=float)
    labels = np.where(u > 0, 0, 1).astype(np.int64)
    zeros = np.flatnonzero(u == 0.0)
    if zeros.size:
        rng = substream(seed, STREAM_ROUND, 1)
        labels[zeros] = rng.integers(0, 2, size=zeros.size)
    return Assignment(labels=labels)


def overlap(truth: Assignment, est: Assignment, r: int) -> float:
    """Fraction of correctly labeled vertices, maximized over label
    permutations; exhaustive for r <= 8, optimal assignment on the confusion
    matrix beyond."""
    a = truth.labels
    b = est.labels
    if a.size != b.size:
        raise LengthMismatch(f"assignments have lengths {a.size} != {b.size}")
    n = a.size
    if n == 0:
        raise LengthMismatch("empty assignments")
    conf = np.zeros((r, r), dtype=np.int64)
    np.add.at(conf, (a, b), 1)
    if r <= 8:
        best = 0
        for perm in permutations(range(r)):
            hits = sum(conf[t, perm[t]] for t in range(r))
            best = max(best, hits)
    else:
        rows, cols = linear_sum_assignment(-conf)
        best = int(conf[rows, cols].sum())
    return best / n
