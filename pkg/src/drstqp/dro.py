"""Decision-independent DRStQP: deterministic equivalents and worst cases.

The payoff x^T Q x is linear in svec(Q), so the inner supremum over a
Wasserstein ball is ``x^T Qbar x + theta * ||svec(x x^T)||_*``.  Under the
Frobenius ground norm the dual norm of svec(x x^T) is x^T x, which gives the
StQP on ``Qbar + theta I`` for every order p.  Under the max norm (on svec
coordinates) the dual is l1 and, on the simplex,
``||svec(x x^T)||_1 = 1/sqrt2 + (1 - 1/sqrt2) x^T x``, an affine function of
x^T x again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DomainError
from .randmat import EmpiricalEnsemble, sample_mean
from .specfun import inv_gamma_p, inv_norm_cdf
from .stqp import StqpSolution, solve_stqp
from .symlin import SQRT2, as_simplex, as_sym, svec
from .transport import EUCLID, LINF, AmbiguitySpec, inner_sup_linear


@dataclass(frozen=True)
class DroModel:
    ensemble: EmpiricalEnsemble
    spec: AmbiguitySpec = AmbiguitySpec()

    @property
    def qbar(self) -> np.ndarray:
        return sample_mean(self.ensemble)

    @property
    def n(self) -> int:
        return self.ensemble.n

    @property
    def theta(self) -> float:
        r = self.spec.radius
        return float(r.value if isinstance(r, UnifiedRadius) else r)


def _qbar(model: Any) -> np.ndarray:
    if isinstance(model, DroModel):
        return model.qbar
    if isinstance(model, EmpiricalEnsemble):
        return sample_mean(model)
    return as_sym(model)


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not theta > 0 or math.isinf(theta):
        raise DomainError(f"theta must be positive and finite, got {theta!r}")
    return theta


def reformulate_frobenius(model: Any, theta: float, p: float = 2.0) -> np.ndarray:
    """``Qbar + theta I``.  The order ``p`` is accepted and has no effect."""
    if p < 1:
        raise DomainError("Wasserstein order must be >= 1")
    theta = _check_theta(theta)
    Qbar = _qbar(model)
    return Qbar + theta * np.eye(Qbar.shape[0])


def maxnorm_shift(n: int, theta: float) -> np.ndarray:
    """Worst-case translation under the max norm: ``(theta/sqrt2)(E + (sqrt2 - 1) I)``.

    Its svec image is ``theta * 1``, the upper corner of the max-norm ball.
    """
    theta = _check_theta(theta)
    return (theta / SQRT2) * (np.ones((n, n)) + (SQRT2 - 1.0) * np.eye(n))


def reformulate_maxnorm(model: Any, theta: float) -> tuple[float, np.ndarray]:
    """``(theta/sqrt2, Qbar + theta (sqrt2 - 1)/sqrt2 I)``; the value is constant + StQP value."""
    theta = _check_theta(theta)
    Qbar = _qbar(model)
    return theta / SQRT2, Qbar + theta * (SQRT2 - 1.0) / SQRT2 * np.eye(Qbar.shape[0])


def deterministic_equivalent(model: DroModel, theta: float | None = None) -> tuple[float, np.ndarray]:
    """Single entry point: ``(constant, matrix)`` for the model's ground norm."""
    theta = model.theta if theta is None else theta
    if model.spec.norm == EUCLID:
        return 0.0, reformulate_frobenius(model, theta, model.spec.order)
    if model.spec.norm == LINF:
        return reformulate_maxnorm(model, theta)
    raise DomainError(f"no closed-form reformulation for the {model.spec.norm.kind} norm")


def inner_sup_at(model: Any, x: Any, theta: float, norm=EUCLID) -> float:
    """Worst-case expected payoff at fixed x, from the dual-norm formula on svec coordinates."""
    x = as_simplex(x)
    return inner_sup_linear(svec(np.outer(x, x)), svec(_qbar(model)), _check_theta(theta), norm)


def expected_payoff(ens: EmpiricalEnsemble, x: Any) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.mean(np.einsum("i,kij,j->k", x, ens.samples, x)))


def worst_case_stqp_dist(ens: EmpiricalEnsemble, x: Any, theta: float) -> EmpiricalEnsemble:
    """Translate every sample by ``(theta / x^T x) x x^T`` (Frobenius worst case at x)."""
    x = as_simplex(x)
    theta = _check_theta(theta)
    shift = (theta / float(x @ x)) * np.outer(x, x)
    return EmpiricalEnsemble(ens.samples + shift, ens.seed, None)


def worst_case_maxnorm_dist(ens: EmpiricalEnsemble, theta: float) -> EmpiricalEnsemble:
    """Max-norm worst case; the same translation serves every decision x."""
    return EmpiricalEnsemble(ens.samples + maxnorm_shift(ens.n, theta), ens.seed, None)


@dataclass(frozen=True)
class DroSolution:
    theta: float
    constant: float
    matrix: np.ndarray
    stqp: StqpSolution

    @property
    def value(self) -> float:
        return self.constant + self.stqp.value

    @property
    def x(self) -> np.ndarray:
        return self.stqp.x

    def to_json(self) -> dict:
        out = self.stqp.to_json()
        out.update(theta=self.theta, constant=self.constant, value=self.value)
        return out


def solve_dro(model: DroModel, theta: float | None = None, engine: str = "auto", rng=None) -> DroSolution:
    theta = model.theta if theta is None else float(theta)
    const, M = deterministic_equivalent(model, theta)
    return DroSolution(theta, const, M, solve_stqp(M, engine=engine, rng=rng))


# -- unification with robust and chance-constrained models


@dataclass(frozen=True)
class Robust:
    theta: float


@dataclass(frozen=True)
class Direct:
    theta: float


@dataclass(frozen=True)
class ChanceGOE:
    """Nominal matrix perturbed by ``beta`` times a GOE matrix, chance level ``alpha``."""

    beta: float
    alpha: float


@dataclass(frozen=True)
class ChanceWishart:
    """Nominal matrix perturbed by ``beta`` times a Wishart W_n(I, k) matrix."""

    beta: float
    k: int
    alpha: float


@dataclass(frozen=True)
class UnifiedRadius:
    source: Any
    value: float

    def to_json(self) -> dict:
        kind = type(self.source).__name__
        return {"source": kind, "params": self.source.__dict__, "theta": self.value}


def unify_radius(source: Any) -> UnifiedRadius:
    """Radius that turns a robust or chance-constrained StQP into the DRStQP on ``Qbar + theta I``.

    The chance-constrained radii assume the stated perturbation models around
    a nominal matrix, which then plays the role of Qbar.
    """
    if isinstance(source, (Robust, Direct)):
        return UnifiedRadius(source, _check_theta(source.theta))
    if isinstance(source, ChanceGOE):
        if not 0.5 < source.alpha < 1.0:
            raise DomainError("GOE chance level must lie in (0.5, 1)")
        if not source.beta > 0:
            raise DomainError("beta must be positive")
        return UnifiedRadius(source, SQRT2 * source.beta * inv_norm_cdf(source.alpha))
    if isinstance(source, ChanceWishart):
        if not 0.0 < source.alpha < 1.0 or not source.beta > 0 or source.k < 1:
            raise DomainError("need beta > 0, k >= 1 and alpha in (0, 1)")
        return UnifiedRadius(source, 2.0 * source.beta * inv_gamma_p(source.k / 2.0, source.alpha))
    raise DomainError(f"unknown radius source {source!r}")


# -- minimax gap and the general quadratic case


def minimax_gap_demo(n: int, theta: float) -> tuple[float, float]:
    """(maximin, minimax) for the single nominal sample ``-I``.

    Nature moving first can only spread the radius evenly over the diagonal,
    giving ``theta/sqrt(n) - 1``; the decision maker moving first faces
    ``theta x^T x - x^T x``, minimized at a vertex, giving ``theta - 1``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must lie in (0, 1)")
    maximin = theta / math.sqrt(n) - 1.0
    minimax = theta - 1.0
    if n >= 2 and not maximin < minimax:
        raise AssertionError("maximin should be strictly below minimax for n >= 2")
    return maximin, minimax


def general_drqp_value(Qbar: Any, cbar: Any, omega: float, theta: float, x: Any) -> float:
    """Worst-case payoff of ``x^T Q x + c^T x + omega`` with (Q, c, omega) jointly uncertain."""
    Qbar = as_sym(Qbar)
    x = np.asarray(x, dtype=float)
    cbar = np.asarray(cbar, dtype=float)
    if x.shape != cbar.shape or x.size != Qbar.shape[0]:
        raise DomainError("dimensions of Qbar, cbar and x disagree")
    v = float(x @ x)
    return float(x @ Qbar @ x + cbar @ x + omega) + _check_theta(theta) * math.sqrt(v * v + v + 1.0)


def general_drqp_gradient(Qbar: Any, cbar: Any, theta: float, x: Any) -> np.ndarray:
    Qbar = as_sym(Qbar)
    x = np.asarray(x, dtype=float)
    v = float(x @ x)
    return 2.0 * Qbar @ x + np.asarray(cbar, dtype=float) + theta * (2.0 * v + 1.0) * x / math.sqrt(v * v + v + 1.0)
