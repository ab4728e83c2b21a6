"""Dense fp64 linear-algebra primitives shared by the rest of the package.

Everything here operates on plain ``numpy`` arrays.  Matrices above the
dense-SVD size cutoff are handled with block subspace iteration so memory
stays bounded; below it LAPACK's bidiagonalization SVD is used directly.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, ParameterError

# Largest dimension for which a full dense SVD is used.
DENSE_SVD_CUTOFF = 2048

# Power/subspace iteration controls.
_RAYLEIGH_TOL = 1e-12
_MAX_POWER_ITER = 10_000


def as_matrix(a):
    """Validate and return ``a`` as a 2-D float64 array with finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise InputError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError("matrix contains NaN or Inf entries")
    return m


@dataclass
class TruncatedSVD:
    """Leading singular triplets: ``U @ diag(S) @ V.T`` approximates the input."""

    U: np.ndarray  # (n1, r), orthonormal columns
    S: np.ndarray  # (r,), nonincreasing, nonnegative
    V: np.ndarray  # (n2, r), orthonormal columns

    @property
    def rank(self):
        return self.S.size

    def reconstruct(self):
        return (self.U * self.S) @ self.V.T


def _fix_signs(U, V):
    """Make the first nonzero entry of each left singular vector nonnegative."""
    for j in range(U.shape[1]):
        col = U[:, j]
        big = np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300)
        idx = np.argmax(big)
        if big[idx] and col[idx] < 0:
            U[:, j] = -col
            V[:, j] = -V[:, j]
    return U, V


def _dense_svd(A):
    # divide-and-conquer driver; the tests cross-check against the classic
    # bidiagonalization driver (gesvd), which is several times slower
    return np.linalg.svd(A, full_matrices=False)


def _subspace_svd(A, r):
    """Block subspace iteration with a small-matrix finishing step."""
    n1, n2 = A.shape
    k = min(min(n1, n2), r + 10)
    rng = np.random.default_rng(0)
    V = np.linalg.qr(rng.standard_normal((n2, k)))[0]
    prev = None
    for _ in range(_MAX_POWER_ITER):
        U = np.linalg.qr(A @ V)[0]
        V, R = np.linalg.qr(A.T @ U)
        est = np.sort(np.abs(np.diag(R)))[::-1][:r]
        if prev is not None and np.all(np.abs(est - prev) <= _RAYLEIGH_TOL * max(est[0], 1e-300)):
            break
        prev = est
    W = A @ V
    Uw, S, Vwt = np.linalg.svd(W, full_matrices=False)
    return Uw[:, :r], S[:r], (V @ Vwt.T)[:, :r]


def top_r_svd(A, r):
    """Leading ``r`` singular triplets of ``A``, deterministically signed."""
    A = as_matrix(A)
    n1, n2 = A.shape
    if not 1 <= r <= min(n1, n2):
        raise ParameterError(f"rank {r} out of range for shape {A.shape}")
    if max(n1, n2) <= DENSE_SVD_CUTOFF:
        U, S, Vt = _dense_svd(A)
        U, S, V = U[:, :r], S[:r], Vt[:r].T
    else:
        U, S, V = _subspace_svd(A, r)
    U, V = _fix_signs(U.copy(), V.copy())
    return TruncatedSVD(U=U, S=np.maximum(S, 0.0), V=V)


def _power_start(n):
    # All-ones blended with a fixed seeded perturbation: deterministic, and
    # generic even when the constant vector is orthogonal to the top
    # singular vector (where a pure all-ones start stalls).
    rng = np.random.default_rng(20240801)
    v = np.ones(n) + 1e-2 * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def operator_norm(A):
    """Largest singular value via power iteration on the smaller Gram matrix."""
    A = as_matrix(A)
    n1, n2 = A.shape
    tall = n2 <= n1
    v = _power_start(n2 if tall else n1)
    rho_prev = -1.0
    for _ in range(_MAX_POWER_ITER):
        w = A @ v if tall else A.T @ v
        rho = float(w @ w)
        if rho == 0.0:
            return 0.0
        if abs(rho - rho_prev) <= _RAYLEIGH_TOL * rho:
            break
        rho_prev = rho
        u = A.T @ w if tall else A @ w
        v = u / np.linalg.norm(u)
    return float(np.sqrt(rho))


def two_inf_norm(A):
    """Largest Euclidean row norm."""
    A = as_matrix(A)
    return float(np.sqrt((A * A).sum(axis=1).max()))


def orthogonal_procrustes(Z, Zstar):
    """Orthogonal ``R`` minimizing ``||Z - Zstar @ R||_F`` and the attained value.

    ``R`` comes from the SVD of ``Zstar.T @ Z``; this is the classical
    closed-form solution.
    """
    Z = as_matrix(Z)
    Zstar = as_matrix(Zstar)
    if Z.shape != Zstar.shape:
        raise ParameterError(f"shape mismatch: {Z.shape} vs {Zstar.shape}")
    U, _, Vt = np.linalg.svd(Zstar.T @ Z)
    R = U @ Vt
    residual = float(np.linalg.norm(Z - Zstar @ R))
    return R, residual
