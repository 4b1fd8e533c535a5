"""Symmetric eigendecomposition (cyclic Jacobi) and the plaintext SVD oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

EPS = 2.0 ** -52


class NonConvergenceError(ArithmeticError):
    def __init__(self, sweeps: int):
        super().__init__(f"Jacobi iteration did not converge within {sweeps} sweeps")
        self.sweeps = sweeps


@dataclass(frozen=True)
class EigenResult:
    values: np.ndarray    # descending
    vectors: np.ndarray   # orthonormal columns, matching order
    sweeps: int


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    rank: int

    def truncate(self, k: int) -> "SvdFactors":
        return SvdFactors(self.U[:, :k], self.sigma[:k], self.V[:, :k], min(k, self.rank))

    def reconstruct(self) -> np.ndarray:
        k = len(self.sigma)
        return (self.U[:, :k] * self.sigma) @ self.V[:, :k].T


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column non-negative."""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        i = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[i, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def jacobi_eigen(A, tol: float = 1e-12, max_sweeps: int = 100) -> EigenResult:
    a = np.array(A, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix must be symmetric")
    v = np.eye(a.shape[0])
    sweeps = kernels.jacobi_sweeps(a, v, tol, max_sweeps)
    if sweeps < 0:
        raise NonConvergenceError(max_sweeps)
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return EigenResult(values[order], fix_signs(v[:, order]), sweeps)


def numerical_rank(eigenvalues: np.ndarray, size: int) -> int:
    """Count eigenvalues above ``size * eps * lambda_max``."""
    if len(eigenvalues) == 0 or eigenvalues[0] <= 0:
        return 0
    return int(np.sum(eigenvalues > size * EPS * eigenvalues[0]))


def singular_values(eigenvalues: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(eigenvalues, 0.0))


def gram(A) -> tuple[list[list[int]], list[list[int]]]:
    """Exact integer ``A A^T`` and ``A^T A`` (Python ints, no overflow)."""
    rows = [[int(x) for x in r] for r in A]
    cols = [list(c) for c in zip(*rows)]
    gu = [[sum(x * y for x, y in zip(ri, rj)) for rj in rows] for ri in rows]
    gv = [[sum(x * y for x, y in zip(ci, cj)) for cj in cols] for ci in cols]
    return gu, gv


def _clusters(sigma: np.ndarray, rank: int, rel: float = 1e-8) -> set[int]:
    out = set()
    for k in range(rank - 1):
        if sigma[k] - sigma[k + 1] <= rel * sigma[0]:
            out.update((k, k + 1))
    return out


def svd_oracle(A) -> SvdFactors:
    """Reference SVD from Jacobi on both Gram matrices, with paired signs.

    Each right vector is flipped so that ``u_k^T A v_k > 0``; inside a
    cluster of (near-)equal singular values the right vectors are replaced
    by ``A^T u_k / sigma_k`` because the two eigenbases need not line up.
    """
    A = np.asarray(A)
    l, N = A.shape
    gu, gv = gram(A)
    eu = jacobi_eigen(gu)
    ev = jacobi_eigen(gv)
    Af = A.astype(np.float64)
    rank = numerical_rank(eu.values, max(l, N))
    k = min(l, N)
    sigma = singular_values(eu.values[:k])
    sigma[rank:] = 0.0
    U = eu.vectors
    V = ev.vectors.copy()
    shared = _clusters(sigma, rank)
    for j in range(rank):
        if j in shared:
            V[:, j] = Af.T @ U[:, j] / sigma[j]
        elif U[:, j] @ Af @ V[:, j] < 0:
            V[:, j] = -V[:, j]
    return SvdFactors(U, sigma, V, rank)
