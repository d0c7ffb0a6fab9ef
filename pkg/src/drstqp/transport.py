"""Wasserstein distances and ambiguity-set geometry.

Covers the closed-form Gaussian W2, exact equal-weight discrete W_p by
assignment, the inner supremum of a linear payoff over a Wasserstein ball
(mean plus radius times the dual norm), its translation worst case, and the
normal-cone tests for the max-norm and l1 balls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, NotOnBoundary, SizeMismatch, ZeroDirection
from .symlin import as_sym, sym_sqrt

BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Norm:
    """Ground norm on R^m: ``"euclid"`` (Frobenius on svec), ``"l1"``, ``"linf"`` or ``"lp"``."""

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("euclid", "l1", "linf", "lp"):
            raise DomainError(f"unknown norm kind {self.kind!r}")
        if self.kind == "lp" and (self.p is None or not 1.0 < self.p < math.inf):
            raise DomainError("lp norm needs 1 < p < inf")

    @classmethod
    def lp(cls, p: float) -> "Norm":
        if p == 1:
            return L1
        if p == 2:
            return EUCLID
        if math.isinf(p):
            return LINF
        return cls("lp", float(p))

    def dual(self) -> "Norm":
        if self.kind == "l1":
            return LINF
        if self.kind == "linf":
            return L1
        if self.kind == "lp":
            return Norm.lp(self.p / (self.p - 1.0))
        return self

    def __call__(self, z: Any, axis: int | None = None) -> Any:
        z = np.asarray(z, dtype=float)
        if self.kind == "euclid":
            return np.linalg.norm(z, axis=axis)
        if self.kind == "l1":
            return np.sum(np.abs(z), axis=axis)
        if self.kind == "linf":
            return np.max(np.abs(z), axis=axis)
        return np.sum(np.abs(z) ** self.p, axis=axis) ** (1.0 / self.p)


EUCLID = Norm("euclid")
FROBENIUS = EUCLID
L1 = Norm("l1")
LINF = Norm("linf")


def parse_norm(text: str) -> Norm:
    t = text.lower()
    if t in ("frob", "frobenius", "euclid", "l2", "2"):
        return EUCLID
    if t in ("l1", "1"):
        return L1
    if t in ("linf", "inf", "max"):
        return LINF
    if t.startswith("l"):
        return Norm.lp(float(t[1:]))
    raise DomainError(f"cannot parse norm {text!r}")


@dataclass(frozen=True)
class AmbiguitySpec:
    """Wasserstein ball description: ground norm, order ``p`` and radius.

    ``radius`` is a positive float, or a decision-dependent radius object from
    :mod:`drstqp.d3ro`.
    """

    norm: Norm = EUCLID
    order: float = 2.0
    radius: Any = 1.0

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("Wasserstein order must be >= 1")
        if isinstance(self.radius, (int, float)) and not self.radius > 0:
            raise DomainError("constant radius must be positive")


@dataclass(frozen=True)
class DiscreteDist:
    """Equal-weight discrete distribution on R^m."""

    atoms: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] < 1:
            raise DomainError("need a nonempty list of atoms of common dimension")
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)

    @property
    def N(self) -> int:
        return self.atoms.shape[0]

    def mean(self) -> np.ndarray:
        return self.atoms.mean(axis=0)

    def to_json(self) -> list:
        return self.atoms.tolist()

    @classmethod
    def from_json(cls, obj: Sequence) -> "DiscreteDist":
        return cls(np.asarray(obj, dtype=float))


def _as_dist(P: Any) -> DiscreteDist:
    return P if isinstance(P, DiscreteDist) else DiscreteDist(P)


def dual_norm(c: Any, norm: Norm = EUCLID) -> float:
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise DomainError("non-finite direction")
    return float(norm.dual()(c))


def inner_sup_linear(c: Any, mean: Any, theta: float, norm: Norm = EUCLID) -> float:
    """sup of E[c^T xi] over the Wasserstein ball: ``c^T mean + theta * ||c||_*``."""
    c = np.asarray(c, dtype=float)
    mean = np.asarray(mean, dtype=float)
    if c.shape != mean.shape:
        raise SizeMismatch(f"direction {c.shape} and mean {mean.shape} differ")
    if not theta > 0:
        raise DomainError("theta must be positive")
    return float(c @ mean) + theta * dual_norm(c, norm)


def w2_gaussian(mu1: Any, Sigma1: Any, mu2: Any, Sigma2: Any) -> float:
    """Closed-form 2-Wasserstein distance between two Gaussians."""
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    S1 = as_sym(Sigma1)
    S2 = as_sym(Sigma2)
    if mu1.shape != mu2.shape or S1.shape != S2.shape or S1.shape[0] != mu1.size:
        raise SizeMismatch("Gaussian parameters have inconsistent shapes")
    root1 = sym_sqrt(S1)
    sym_sqrt(S2)  # PSD check
    cross = sym_sqrt(root1 @ S2 @ root1)
    w2sq = float(np.sum((mu1 - mu2) ** 2) + np.trace(S1) + np.trace(S2) - 2.0 * np.trace(cross))
    return math.sqrt(max(w2sq, 0.0))


def discrete_wp(P: Any, Q: Any, p: float = 2.0, norm: Norm = EUCLID) -> float:
    """Exact W_p between equal-size, equal-weight discrete distributions.

    Optimal couplings of uniform measures with the same number of atoms are
    permutations (Birkhoff), so an assignment solve is exact.
    """
    P = _as_dist(P)
    Q = _as_dist(Q)
    if P.N != Q.N or P.atoms.shape[1] != Q.atoms.shape[1]:
        raise SizeMismatch(f"atom sets differ: {P.atoms.shape} vs {Q.atoms.shape}")
    if p < 1:
        raise DomainError("p must be >= 1")
    diff = P.atoms[:, None, :] - Q.atoms[None, :, :]
    cost = norm(diff, axis=2) ** p
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean() ** (1.0 / p))


def w2_dirac_to_empirical(z: Any, P: Any) -> float:
    """Squared W2 between a point mass and an empirical measure (every atom moves to ``z``)."""
    P = _as_dist(P)
    z = np.asarray(z, dtype=float).ravel()
    if z.size != P.atoms.shape[1]:
        raise SizeMismatch("point and atoms differ in dimension")
    return float(np.mean(np.sum((P.atoms - z) ** 2, axis=1)))


def worst_case_shift(P: Any, c: Any, theta: float) -> DiscreteDist:
    """Translate every atom by ``theta * c / ||c||_2`` (Euclidean worst case)."""
    P = _as_dist(P)
    c = np.asarray(c, dtype=float).ravel()
    nc = float(np.linalg.norm(c))
    if nc == 0.0:
        raise ZeroDirection("worst-case direction must be nonzero")
    if not theta > 0:
        raise DomainError("theta must be positive")
    return DiscreteDist(P.atoms + (theta / nc) * c)


def linf_maximal_element(mean: Any, theta: float) -> np.ndarray:
    """Corner ``mean + theta * 1`` of the max-norm ball; its normal cone is the nonnegative orthant."""
    if not theta > 0:
        raise DomainError("theta must be positive")
    return np.asarray(mean, dtype=float) + theta


def l1_normal_cone_member(w: Any, z: Any, v: Any, theta: float, tol: float = BOUNDARY_TOL) -> bool:
    """Is ``v`` in the normal cone of the l1 ball B_theta(w) at the boundary point ``z``?

    The cone is generated by the product of subdifferentials of ``|z_i - w_i|``:
    ``v = lam * g`` with ``g_i = sign(z_i - w_i)`` where that is nonzero and
    ``g_i`` in [-1, 1] otherwise.
    """
    w = np.asarray(w, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    if not (w.shape == z.shape == v.shape):
        raise SizeMismatch("w, z and v must share a dimension")
    s = z - w
    if abs(float(np.sum(np.abs(s))) - theta) > tol:
        raise NotOnBoundary(f"||z - w||_1 = {np.sum(np.abs(s))!r} differs from theta = {theta!r}")
    active = np.abs(s) > tol
    scale = tol * (1.0 + float(np.max(np.abs(v))))
    if not np.any(active):
        return bool(np.all(np.abs(v) <= scale))
    lam_candidates = np.sign(s[active]) * v[active]
    lam = float(lam_candidates[0])
    if np.any(np.abs(lam_candidates - lam) > scale) or lam < -scale:
        return False
    return bool(np.all(np.abs(v[~active]) <= max(lam, 0.0) + scale))
