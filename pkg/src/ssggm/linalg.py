"""Dense Cholesky factors with O(k^2) append/remove and the block-inverse
updates used to keep ``Sigma = Omega^{-1}`` current after a column replacement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .core import NotPositiveDefiniteError, NumericalError

PIVOT_RTOL = 1e-12


@dataclass
class CholFactor:
    """Lower-triangular ``L`` with ``L @ L.T`` equal to the factored matrix."""

    L: np.ndarray

    @property
    def k(self) -> int:
        return self.L.shape[0]

    def matrix(self) -> np.ndarray:
        return self.L @ self.L.T

    @classmethod
    def empty(cls) -> "CholFactor":
        return cls(np.zeros((0, 0)))


def chol_factor(A) -> CholFactor:
    """Factor a symmetric positive-definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot falls below ``1e-12`` times the largest diagonal entry;
        ``index`` names the failing pivot.
    """
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    if A.shape != (k, k):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if k == 0:
        return CholFactor.empty()
    tol = PIVOT_RTOL * max(float(np.max(np.diag(A))), 0.0)
    L = np.zeros((k, k))
    for i in range(k):
        row = L[i, :i]
        d2 = A[i, i] - row @ row
        if not d2 > tol:
            raise NotPositiveDefiniteError("matrix is not positive definite", index=i)
        L[i, i] = math.sqrt(d2)
        if i + 1 < k:
            L[i + 1:, i] = (A[i + 1:, i] - L[i + 1:, :i] @ row) / L[i, i]
    return CholFactor(L)


def chol_append(F: CholFactor, col, diag: float) -> CholFactor:
    """Factor of ``[[A, col], [col.T, diag]]`` given the factor of ``A``."""
    col = np.asarray(col, dtype=float).reshape(-1)
    k = F.k
    if col.size != k:
        raise ValueError(f"border column has length {col.size}, expected {k}")
    if k:
        l = solve_triangular(F.L, col, lower=True, check_finite=False)
        scale = max(float(diag), float(np.max(np.einsum("ij,ij->i", F.L, F.L))))
    else:
        l = col
        scale = float(diag)
    d2 = float(diag) - float(l @ l)
    if not d2 > PIVOT_RTOL * max(scale, 0.0):
        raise NotPositiveDefiniteError("bordered matrix is not positive definite", index=k)
    L = np.zeros((k + 1, k + 1))
    L[:k, :k] = F.L
    L[k, :k] = l
    L[k, k] = math.sqrt(d2)
    return CholFactor(L)


def chol_update(L: np.ndarray, x: np.ndarray) -> None:
    """In-place rank-one update ``L L' + x x'`` by plane rotations."""
    x = np.array(x, dtype=float)
    k = L.shape[0]
    for i in range(k):
        a, b = L[i, i], x[i]
        r = math.hypot(a, b)
        c, s = a / r, b / r
        L[i, i] = r
        if i + 1 < k:
            li = L[i + 1:, i].copy()
            L[i + 1:, i] = c * li + s * x[i + 1:]
            x[i + 1:] = c * x[i + 1:] - s * li


def chol_remove(F: CholFactor, idx: int) -> CholFactor:
    """Factor of the matrix with row and column ``idx`` deleted."""
    k = F.k
    if not 0 <= idx < k:
        raise IndexError(f"index {idx} out of range for a factor of size {k}")
    if k == 1:
        return CholFactor.empty()
    L = np.delete(np.delete(F.L, idx, axis=0), idx, axis=1)
    trailing = L[idx:, idx:]
    chol_update(trailing, F.L[idx + 1:, idx])
    L[idx:, idx:] = trailing
    return CholFactor(L)


def chol_solve(F: CholFactor, b) -> np.ndarray:
    """Solve ``L L' x = b``."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != F.k:
        raise ValueError(f"right-hand side has length {b.shape[0]}, expected {F.k}")
    if F.k == 0:
        return b.copy()
    y = solve_triangular(F.L, b, lower=True, check_finite=False)
    return solve_triangular(F.L, y, lower=True, trans="T", check_finite=False)


def forward(F: CholFactor, b) -> np.ndarray:
    """``L^{-1} b``."""
    if F.k == 0:
        return np.zeros(0)
    return solve_triangular(F.L, np.asarray(b, dtype=float), lower=True, check_finite=False)


def backward(F: CholFactor, b) -> np.ndarray:
    """``L^{-T} b``."""
    if F.k == 0:
        return np.zeros(0)
    return solve_triangular(F.L, np.asarray(b, dtype=float), lower=True, trans="T", check_finite=False)


def logdet(F: CholFactor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(F.L)))) if F.k else 0.0


def inverse_drop_rowcol(sigma: np.ndarray, j: int) -> np.ndarray:
    """``(Omega_{-j,-j})^{-1}`` from ``sigma = Omega^{-1}`` in O(p^2)."""
    s_jj = sigma[j, j]
    if not s_jj > 0:
        raise NumericalError(f"sigma[{j},{j}] = {s_jj} is not positive")
    keep = np.delete(np.arange(sigma.shape[0]), j)
    col = sigma[keep, j]
    return sigma[np.ix_(keep, keep)] - np.outer(col, col) / s_jj


def inverse_after_column_replace(ainv_sub: np.ndarray, omega_col_new, omega_diag_new: float, j: int) -> np.ndarray:
    """Inverse of the precision matrix after column ``j`` is replaced.

    ``ainv_sub`` is ``(Omega_{-j,-j})^{-1}``, which a column replacement leaves
    unchanged; the result is assembled without any O(p^3) work.
    """
    omega_col_new = np.asarray(omega_col_new, dtype=float)
    v = ainv_sub @ omega_col_new
    gamma = float(omega_diag_new - v @ omega_col_new)
    if not gamma > 0:
        raise NotPositiveDefiniteError(f"Schur complement {gamma} is not positive", index=j)
    p = ainv_sub.shape[0] + 1
    keep = np.delete(np.arange(p), j)
    out = np.empty((p, p))
    out[np.ix_(keep, keep)] = ainv_sub + np.outer(v, v) / gamma
    out[keep, j] = out[j, keep] = -v / gamma
    out[j, j] = 1.0 / gamma
    return out
