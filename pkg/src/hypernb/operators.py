"""Operators on oriented incidences: the weighted non-backtracking walk
matrix B, the edge reversal J, the 2Kn reduced form, and the deflated
symmetric pencil H(lambda), plus the determinant identity verifier tying
them together.

B acts on vectors indexed by oriented incidences (x -> e).  The matvec is a
two-pass evaluation: aggregate t(y) = sum_{fni y} w_f u(y -> f) per vertex,
then (Bu)(x -> e) = sum_{y in e, y != x} [t(y) - w_e u(y -> e)], which equals
the definitional double sum at cost O(sum_e q_e).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .errors import DimensionMismatch, PoleError
from .hypergraph import LayeredHypergraph, OrientedIndex, adjacency, degrees
from .rng import STREAM_PROBE, substream

__all__ = [
    "NonBacktracking",
    "ReducedNB",
    "BetheHessian",
    "build_nb",
    "build_reduced",
    "bethe_hessian",
    "bethe_hessian_poles",
    "j_spectrum_counts",
    "parity_time_residual",
    "ihara_bass_verify",
    "IharaBassResult",
    "eigvec_lift_and_aggregate",
    "aggregate_from_reduced",
]


def _scatter(index: np.ndarray, values: np.ndarray, size: int) -> np.ndarray:
    """bincount that tolerates complex values."""
    if np.iscomplexobj(values):
        return (np.bincount(index, weights=values.real, minlength=size)
                + 1j * np.bincount(index, weights=values.imag, minlength=size))
    return np.bincount(index, weights=values, minlength=size)


class NonBacktracking:
    """Matvec view of the weighted non-backtracking operator.

    Entry ((x -> e), (y -> f)) equals the weight of f's layer iff
    y in e \\ {x} and f != e; never materialized except through `to_dense`.
    """

    def __init__(self, g: LayeredHypergraph, w):
        self.g = g
        self.w = np.asarray(w, dtype=float)
        if self.w.shape != (g.K,):
            raise DimensionMismatch(f"need {g.K} layer weights, got {self.w.shape}")
        self.idx = OrientedIndex.build(g)
        self.m = self.idx.m
        self._w_edge = self.w[self.idx.edge_layer]          # per global edge
        self._q_edge = self.idx.edge_q.astype(np.int64)
        self._w_oid = self._w_edge[self.idx.eid]            # per oriented id

    def _check(self, u):
        u = np.asarray(u)
        if u.shape != (self.m,):
            raise DimensionMismatch(f"vector has shape {u.shape}, operator dim {self.m}")
        return u

    def matvec(self, u):
        u = self._check(u)
        vid, eid = self.idx.vid, self.idx.eid
        t = _scatter(vid, self._w_oid * u, self.g.n)
        ge = _scatter(eid, u, self.idx.n_edges)
        te = _scatter(eid, t[vid], self.idx.n_edges)
        return te[eid] - t[vid] - self._w_edge[eid] * (ge[eid] - u)

    def rmatvec(self, u):
        u = self._check(u)
        vid, eid = self.idx.vid, self.idx.eid
        ju = _scatter(eid, u, self.idx.n_edges)[eid] - u
        h = _scatter(vid, ju, self.g.n)
        return self._w_edge[eid] * (h[vid] - ju)

    def reversal_apply(self, u):
        """J u: swap to the other endpoints of the same hyperedge."""
        u = self._check(u)
        return _scatter(self.idx.eid, u, self.idx.n_edges)[self.idx.eid] - u

    def reversal_inv_apply(self, u):
        """J^{-1} u via the per-edge closed form (J - (q-2) I) / (q-1)."""
        u = self._check(u)
        ge = _scatter(self.idx.eid, u, self.idx.n_edges)
        return ge[self.idx.eid] / (self._q_edge[self.idx.eid] - 1) - u

    def weight_diag_apply(self, u):
        """D_w u: scale each oriented incidence by its edge weight."""
        u = self._check(u)
        return self._w_oid * u

    def restrict_to_vertices(self, u, k: int | None = None):
        """S u (or S_k u): sum incidences (x -> e) onto their start vertex x."""
        u = self._check(u)
        if k is None:
            return _scatter(self.idx.vid, u, self.g.n)
        sl = self.idx.layer_id_slices[k]
        return _scatter(self.idx.vid[sl], u[sl], self.g.n)

    def aslinop(self) -> LinearOperator:
        return LinearOperator(shape=(self.m, self.m), matvec=self.matvec,
                              rmatvec=self.rmatvec, dtype=float)

    def to_dense(self, dtype=float) -> np.ndarray:
        out = np.zeros((self.m, self.m), dtype=dtype)
        basis = np.zeros(self.m)
        for j in range(self.m):
            basis[j] = 1.0
            out[:, j] = self.matvec(basis)
            basis[j] = 0.0
        return out


def build_nb(g: LayeredHypergraph, w) -> NonBacktracking:
    return NonBacktracking(g, w)


def j_spectrum_counts(g: LayeredHypergraph) -> dict[int, int]:
    """Exact eigenvalue multiplicities of the reversal operator J: q_k - 1
    with multiplicity m_k per layer, and -1 with multiplicity
    sum_k (q_k - 1) m_k."""
    counts: dict[int, int] = {}
    minus = 0
    for q, m in zip(g.q_sizes, g.edge_counts):
        counts[q - 1] = counts.get(q - 1, 0) + m
        minus += (q - 1) * m
    counts[-1] = counts.get(-1, 0) + minus
    return counts


def parity_time_residual(g: LayeredHypergraph, w, k: int, dense_cutoff: int = 1500,
                         probes: int = 8, seed: int = 0) -> float:
    """Entrywise-max residual of D_w B^k J - J (B^T)^k D_w.

    Dense evaluation below `dense_cutoff` oriented incidences; otherwise the
    max is probed on random vectors (a lower estimate, adequate for an exact
    identity whose residual is numerical noise).
    """
    if k < 0:
        raise DimensionMismatch("power must be >= 0")
    op = NonBacktracking(g, w)

    def lhs(u):
        v = op.reversal_apply(u)
        for _ in range(k):
            v = op.matvec(v)
        return op.weight_diag_apply(v)

    def rhs(u):
        v = op.weight_diag_apply(u)
        for _ in range(k):
            v = op.rmatvec(v)
        return op.reversal_apply(v)

    if op.m == 0:
        return 0.0
    if op.m <= dense_cutoff:
        basis = np.zeros(op.m)
        worst = 0.0
        for j in range(op.m):
            basis[j] = 1.0
            worst = max(worst, float(np.max(np.abs(lhs(basis) - rhs(basis)))))
            basis[j] = 0.0
        return worst
    rng = substream(seed, STREAM_PROBE)
    worst = 0.0
    for _ in range(probes):
        z = rng.standard_normal(op.m)
        z /= np.max(np.abs(z))
        worst = max(worst, float(np.max(np.abs(lhs(z) - rhs(z)))))
    return worst


class ReducedNB:
    """2Kn block form sharing B's nontrivial spectrum.

    Block (k, l) is w_l [[0, D_k - delta I], [-(q-1) delta I, A_k - (q-2) delta I]]
    acting on stacked per-layer pairs (reverse part, forward part).
    """

    def __init__(self, g: LayeredHypergraph, w):
        self.g = g
        self.w = np.asarray(w, dtype=float)
        if self.w.shape != (g.K,):
            raise DimensionMismatch(f"need {g.K} layer weights, got {self.w.shape}")
        self.n = g.n
        self.K = g.K
        self.dim = 2 * g.K * g.n
        self.adj = [adjacency(g, k) for k in range(g.K)]
        self.deg = [degrees(g, k).astype(float) for k in range(g.K)]

    def block(self, z, k: int, part: int):
        """part 0 = reverse component of layer k, part 1 = forward component."""
        n = self.n
        start = (2 * k + part) * n
        return z[start:start + n]

    def matvec(self, z):
        z = np.asarray(z)
        if z.shape != (self.dim,):
            raise DimensionMismatch(f"vector has shape {z.shape}, operator dim {self.dim}")
        n, K, w = self.n, self.K, self.w
        fwd = [self.block(z, k, 1) for k in range(K)]
        rev = [self.block(z, k, 0) for k in range(K)]
        y = np.zeros(n, dtype=z.dtype)
        for wl, f in zip(w, fwd):
            y = y + wl * f
        out = np.empty_like(z)
        for k in range(K):
            qk = self.g.q_sizes[k]
            out[2 * k * n:(2 * k + 1) * n] = self.deg[k] * y - w[k] * fwd[k]
            out[(2 * k + 1) * n:(2 * k + 2) * n] = (
                self.adj[k] @ y - w[k] * (qk - 1) * rev[k] - w[k] * (qk - 2) * fwd[k]
            )
        return out

    def aslinop(self) -> LinearOperator:
        return LinearOperator(shape=(self.dim, self.dim), matvec=self.matvec, dtype=float)

    def to_sparse(self) -> sp.csr_matrix:
        n, K, w = self.n, self.K, self.w
        eye = sp.identity(n, format="csr")
        blocks = [[None] * (2 * K) for _ in range(2 * K)]
        for k in range(K):
            Dk = sp.diags(self.deg[k])
            for ll in range(K):
                qll = self.g.q_sizes[ll]
                delta = 1.0 if k == ll else 0.0
                blocks[2 * k][2 * ll + 1] = w[ll] * (Dk - delta * eye)
                low = w[ll] * (self.adj[k] - delta * (qll - 2) * eye)
                blocks[2 * k + 1][2 * ll + 1] = low
                if k == ll:
                    blocks[2 * k + 1][2 * ll] = -w[ll] * (qll - 1) * eye
        return sp.bmat(blocks, format="csr")


def build_reduced(g: LayeredHypergraph, w) -> ReducedNB:
    return ReducedNB(g, w)


def bethe_hessian_poles(g: LayeredHypergraph, w) -> list[float]:
    w = np.asarray(w, dtype=float)
    poles = []
    for q, wk in zip(g.q_sizes, w):
        poles.append(float(wk))
        poles.append(float(-wk * (q - 1)))
    return poles


def _check_poles(g, w, lam):
    for p in bethe_hessian_poles(g, w):
        if abs(lam - p) <= 1e-9 * max(1.0, abs(p)):
            raise PoleError(f"lambda = {lam} hits the pole {p} of the deflated pencil")


@dataclass(frozen=True)
class BetheHessian:
    lam: float | complex
    H: sp.csr_matrix


def bethe_hessian(g: LayeredHypergraph, w, lam, allow_complex: bool = False) -> BetheHessian:
    """Deflated symmetric pencil H(lambda) on the vertex space.

    H(lambda) = I - sum_k [w_k lambda / delta_k] A_k
                  + sum_k [w_k^2 (q_k - 1) / delta_k] D_k
    with delta_k = (lambda - w_k)(lambda + w_k (q_k - 1)).  Aggregated vectors
    of B-eigenpairs at lambda lie in its kernel.  The clustering path only
    needs real lambda; complex values serve the identity verifier.
    """
    w = np.asarray(w, dtype=float)
    if not allow_complex and (isinstance(lam, complex) or np.iscomplexobj(lam)):
        raise PoleError("complex lambda requires allow_complex=True")
    _check_poles(g, w, lam)
    H = sp.identity(g.n, format="csr", dtype=complex if allow_complex else float)
    if allow_complex:
        H = H.astype(complex)
    for k in range(g.K):
        qk = g.q_sizes[k]
        wk = w[k]
        delta = (lam - wk) * (lam + wk * (qk - 1))
        H = H - (wk * lam / delta) * adjacency(g, k)
        H = H + (wk ** 2 * (qk - 1) / delta) * sp.diags(degrees(g, k).astype(float))
    return BetheHessian(lam=lam, H=H.tocsr())


@dataclass(frozen=True)
class IharaBassResult:
    ok: bool
    lhs_logmod: float
    lhs_phase: float
    rhs_logmod: float
    rhs_phase: float
    logmod_rel_diff: float
    phase_diff: float
    singular: bool


def _wrap_phase(x: float) -> float:
    return math.atan2(math.sin(x), math.cos(x))


def ihara_bass_verify(g: LayeredHypergraph, w, lam, tol: float = 1e-8) -> IharaBassResult:
    """Check det(lam I - B) against the reduced determinant times the explicit
    per-layer polynomial factors, in log-modulus + phase form.

    Negative factor exponents (possible when a layer has fewer edges than
    vertices) are handled transparently: the comparison happens on complex
    logarithms, so factors move across the identity without overflow.
    """
    w = np.asarray(w, dtype=float)
    _check_poles(g, w, complex(lam))
    op = NonBacktracking(g, w)
    lam = complex(lam)
    if op.m == 0:
        lhs_sign, lhs_log = complex(1.0), 0.0
    else:
        lhs_sign, lhs_log = np.linalg.slogdet(lam * np.eye(op.m) - op.to_dense())
    red = ReducedNB(g, w).to_sparse().toarray()
    rhs_sign, rhs_log = np.linalg.slogdet(lam * np.eye(red.shape[0]) - red)
    factor = complex(0.0)
    for k in range(g.K):
        qk, mk, wk = g.q_sizes[k], g.edge_counts[k], w[k]
        e1 = (qk - 1) * mk - g.n
        e2 = mk - g.n
        factor += e1 * cmath.log(lam - wk) + e2 * cmath.log(lam + wk * (qk - 1))
    rhs_logmod = float(rhs_log) + factor.real
    rhs_phase = _wrap_phase(cmath.phase(complex(rhs_sign)) + factor.imag)
    lhs_logmod = float(lhs_log)
    lhs_phase = _wrap_phase(cmath.phase(complex(lhs_sign)))
    singular = not (np.isfinite(lhs_logmod) and np.isfinite(rhs_logmod))
    if singular:
        return IharaBassResult(False, lhs_logmod, lhs_phase, rhs_logmod, rhs_phase,
                               float("inf"), float("inf"), True)
    rel = abs(lhs_logmod - rhs_logmod) / max(1.0, abs(lhs_logmod), abs(rhs_logmod))
    dphi = abs(_wrap_phase(lhs_phase - rhs_phase))
    return IharaBassResult(rel <= tol and dphi <= tol, lhs_logmod, lhs_phase,
                           rhs_logmod, rhs_phase, rel, dphi, False)


def eigvec_lift_and_aggregate(g: LayeredHypergraph, w, lam, v):
    """Map a B-eigenpair (lam, v) to the reduced eigenvector and the n-dim
    aggregated vector.

    Per layer, the reverse component applies the closed-form block inverse of
    J before restricting to start vertices; the forward component restricts
    directly.  The aggregated vector is the weight-mixed forward sum.  Errors
    out on the pencil poles, where the aggregation is undefined.
    """
    w = np.asarray(w, dtype=float)
    op = NonBacktracking(g, w)
    v = np.asarray(v)
    if v.shape != (op.m,):
        raise DimensionMismatch(f"eigenvector has shape {v.shape}, operator dim {op.m}")
    if np.iscomplexobj(v) or isinstance(lam, complex):
        _check_poles(g, w, complex(lam))
    else:
        _check_poles(g, w, float(lam))
    jinv_v = op.reversal_inv_apply(v)
    n, K = g.n, g.K
    tilde = np.zeros(2 * K * n, dtype=v.dtype)
    y = np.zeros(n, dtype=v.dtype)
    for k in range(K):
        rev = op.restrict_to_vertices(jinv_v, k)
        fwd = op.restrict_to_vertices(v, k)
        tilde[2 * k * n:(2 * k + 1) * n] = rev
        tilde[(2 * k + 1) * n:(2 * k + 2) * n] = fwd
        y = y + w[k] * fwd
    return tilde, y


def aggregate_from_reduced(g: LayeredHypergraph, w, tilde_v):
    """Aggregated vector from a reduced-operator eigenvector: the weight-mixed
    sum of the forward blocks."""
    w = np.asarray(w, dtype=float)
    tilde_v = np.asarray(tilde_v)
    n = g.n
    if tilde_v.shape != (2 * g.K * n,):
        raise DimensionMismatch(
            f"reduced eigenvector has shape {tilde_v.shape}, expected ({2 * g.K * n},)")
    y = np.zeros(n, dtype=tilde_v.dtype)
    for k in range(g.K):
        y = y + w[k] * tilde_v[(2 * k + 1) * n:(2 * k + 2) * n]
    return y
