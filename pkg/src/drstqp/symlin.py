"""Symmetric-matrix core: svec/smat, Jacobi eigensolver, simplex geometry.

Matrices are plain ``numpy`` arrays of shape ``(n, n)``; :func:`as_sym`
validates them.  The vectorization layout used everywhere in the package is
diagonal first, then the strict upper triangle in row-major order with the
off-diagonal entries scaled by sqrt(2), so that the Frobenius inner product
of two matrices equals the Euclidean inner product of their images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DomainError, NoConvergence, NonTriangularLength, NotPSD

SQRT2 = math.sqrt(2.0)
SIMPLEX_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


def as_sym(A: Any, *, tol: float = 1e-12) -> np.ndarray:
    """Return ``A`` as a float symmetric matrix, rejecting asymmetric or non-finite input."""
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    scale = 1.0 + np.max(np.abs(A))
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise DomainError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def dim_from_svec(m: int) -> int:
    """Invert ``m = n(n+1)/2``; raise if ``m`` is not triangular."""
    n = int(round((math.isqrt(8 * m + 1) - 1) / 2))
    if m < 1 or n * (n + 1) // 2 != m:
        raise NonTriangularLength(f"length {m} is not a triangular number")
    return n


def _upper_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def svec(A: Any) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    iu, ju = _upper_indices(n)
    return np.concatenate([np.diag(A).copy(), SQRT2 * A[iu, ju]])


def smat(v: Any) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    n = dim_from_svec(v.size)
    A = np.diag(v[:n])
    iu, ju = _upper_indices(n)
    off = v[n:] / SQRT2
    A[iu, ju] = off
    A[ju, iu] = off
    return A


def svec_batch(As: np.ndarray) -> np.ndarray:
    """svec applied to a stack of matrices of shape ``(N, n, n)``."""
    As = np.asarray(As, dtype=float)
    n = As.shape[-1]
    iu, ju = _upper_indices(n)
    diag = np.diagonal(As, axis1=-2, axis2=-1)
    return np.concatenate([diag, SQRT2 * As[..., iu, ju]], axis=-1)


def frob_inner(A: Any, B: Any) -> float:
    return float(np.trace(np.asarray(A, dtype=float).T @ np.asarray(B, dtype=float)))


# -- JSON codec: {"n": n, "upper": [...]} with raw (unscaled) entries in svec order


def sym_to_json(A: Any) -> dict:
    A = as_sym(A)
    n = A.shape[0]
    iu, ju = _upper_indices(n)
    upper = np.concatenate([np.diag(A), A[iu, ju]])
    return {"n": n, "upper": [float(x) for x in upper]}


def sym_from_json(obj: dict) -> np.ndarray:
    n = int(obj["n"])
    upper = np.asarray(obj["upper"], dtype=float)
    if upper.size != svec_dim(n):
        raise NonTriangularLength(f"expected {svec_dim(n)} entries for n={n}, got {upper.size}")
    if not np.all(np.isfinite(upper)):
        raise DomainError("matrix has non-finite entries")
    A = np.diag(upper[:n])
    iu, ju = _upper_indices(n)
    A[iu, ju] = upper[n:]
    A[ju, iu] = upper[n:]
    return A


# -- eigen-decomposition


@dataclass(frozen=True)
class EigDecomp:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns
    sweeps: int

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def _offdiag_norm(A: np.ndarray) -> float:
    iu, ju = _upper_indices(A.shape[0])
    return math.sqrt(2.0) * float(np.linalg.norm(A[iu, ju]))


def eig_sym(A: Any, tol: float = 1e-12, max_sweeps: int = 100) -> EigDecomp:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Sweeps over all (p, q) pairs, annihilating each off-diagonal entry with a
    plane rotation, until the off-diagonal Frobenius mass is at most
    ``tol * (1 + ||A||_F)``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    A = as_sym(A).copy()
    n = A.shape[0]
    V = np.eye(n)
    threshold = tol * (1.0 + float(np.linalg.norm(A)))
    sweeps = 0
    while _offdiag_norm(A) > threshold:
        if sweeps >= max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                # negligible next to the diagonal: drop it rather than rotate
                if abs(apq) <= 1e-18 * (abs(A[p, p]) + abs(A[q, q])) or abs(apq) < 1e-300:
                    A[p, q] = A[q, p] = 0.0
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    lam = np.diag(A).copy()
    order = np.argsort(lam, kind="stable")
    return EigDecomp(lam[order], V[:, order], sweeps)


def sym_sqrt(A: Any, clamp_tol: float = 1e-12) -> np.ndarray:
    """PSD square root via :func:`eig_sym`, clamping round-off negatives to zero.

    Raises :class:`NotPSD` when an eigenvalue is below ``-clamp_tol * (1 + ||A||)``.
    """
    A = as_sym(A)
    dec = eig_sym(A)
    floor = -clamp_tol * (1.0 + float(np.linalg.norm(A)))
    if dec.lam_min < floor:
        raise NotPSD(f"matrix has eigenvalue {dec.lam_min:.3e} < 0")
    lam = np.clip(dec.eigenvalues, 0.0, None)
    V = dec.eigenvectors
    return (V * np.sqrt(lam)) @ V.T


# -- simplex


def as_simplex(x: Any) -> np.ndarray:
    """Validate a point of the standard simplex.

    Entries must be nonnegative (up to ``SIMPLEX_TOL``); a sum within
    ``RENORMALIZE_TOL`` of one is renormalized, anything further off is rejected.
    """
    x = np.array(x, dtype=float).ravel()
    if x.size < 1 or not np.all(np.isfinite(x)):
        raise DomainError("simplex point must be a finite nonempty vector")
    if np.min(x) < -SIMPLEX_TOL:
        raise DomainError("simplex point has negative entries")
    x = np.clip(x, 0.0, None)
    total = float(x.sum())
    if abs(total - 1.0) > RENORMALIZE_TOL:
        raise DomainError(f"simplex point sums to {total!r}, not 1")
    return x / total


def project_simplex(v: Any) -> np.ndarray:
    """Euclidean projection onto the standard simplex (sort and threshold)."""
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise DomainError("cannot project a non-finite vector")
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, n + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    x = np.maximum(v - tau, 0.0)
    # absorb round-off so the output sums to one
    return x / x.sum()


def project_simplex_rows(V: Any) -> np.ndarray:
    """:func:`project_simplex` applied to every row of a 2-d array."""
    V = np.asarray(V, dtype=float)
    if not np.all(np.isfinite(V)):
        raise DomainError("cannot project a non-finite vector")
    n = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    k = np.arange(1, n + 1)
    cond = U - css / k > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(V.shape[0]), rho] / (rho + 1)
    X = np.maximum(V - tau[:, None], 0.0)
    return X / X.sum(axis=1, keepdims=True)


def barycenter(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)
