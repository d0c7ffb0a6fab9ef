"""DRStQP with a decision-dependent radius theta(x).

With the Frobenius ground norm the robust objective is
``x^T Qbar x + theta(x) x^T x``.  Supported radii:

* ``Const(theta)``: the ordinary StQP on ``Qbar + theta I``;
* ``InvNormSq(gamma)``: ``gamma / x^T x``, which only adds the constant gamma;
* ``InvQuad(R)``: ``1 / x^T R x`` for a strictly copositive R;
* ``GammaOverQ(gamma)``: ``gamma / x^T Qbar x`` for a strictly copositive Qbar,
  giving ``f = u + gamma v / u`` with ``u = x^T Qbar x`` and ``v = x^T x``.

The last two are fractional and generally nonconvex; :func:`solve_d3` uses
multi-start projected gradient descent, with an exhaustive simplex grid as a
safeguard for n <= 8.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Any, Union

import numpy as np

from .errors import DomainError, NonCopositive, NonpositiveDenominator, NotPD
from .randmat import RngLike, as_stream
from .stqp import StqpSolution, solve_stqp, solve_support_enum, support_of
from .symlin import as_sym, barycenter, eig_sym, project_simplex, project_simplex_rows

ARMIJO_STEP0 = 1.0
ARMIJO_SHRINK = 0.5
ARMIJO_SLOPE = 1e-4
PG_TOL = 1e-9
PG_MAX_ITER = 5000
STALL_ITERS = 20
GRID_RES = 24
GRID_MAX_N = 8
_GRID_CHUNK = 200_000


@dataclass(frozen=True)
class Const:
    theta: float


@dataclass(frozen=True)
class InvNormSq:
    gamma: float


@dataclass(frozen=True)
class InvQuad:
    R: np.ndarray


@dataclass(frozen=True)
class GammaOverQ:
    gamma: float


RadiusFn = Union[Const, InvNormSq, InvQuad, GammaOverQ]


def radius_value(radius: RadiusFn, Qbar: Any, x: Any) -> float:
    """theta(x) for the given radius functional."""
    x = np.asarray(x, dtype=float)
    if isinstance(radius, Const):
        return float(radius.theta)
    if isinstance(radius, InvNormSq):
        return radius.gamma / float(x @ x)
    if isinstance(radius, InvQuad):
        return 1.0 / _positive(float(x @ as_sym(radius.R) @ x))
    if isinstance(radius, GammaOverQ):
        return radius.gamma / _positive(float(x @ as_sym(Qbar) @ x))
    raise DomainError(f"unknown radius {radius!r}")


def _positive(u: float) -> float:
    if not u > 0:
        raise NonpositiveDenominator(f"quadratic form in the denominator is {u!r}")
    return u


# -- f(x) = x^T Q x + c * x^T x / x^T M x, covering both fractional radii


@dataclass(frozen=True)
class _Fractional:
    Q: np.ndarray
    c: float
    M: np.ndarray

    def value(self, x: np.ndarray) -> float:
        w = _positive(float(x @ self.M @ x))
        return float(x @ self.Q @ x) + self.c * float(x @ x) / w

    def gradient(self, x: np.ndarray) -> np.ndarray:
        Mx = self.M @ x
        w = _positive(float(x @ Mx))
        v = float(x @ x)
        return 2.0 * (self.Q @ x) + 2.0 * self.c * (w * x - v * Mx) / (w * w)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        M = self.M
        Mx = M @ x
        w = _positive(float(x @ Mx))
        v = float(x @ x)
        n = x.size
        xxT = np.outer(x, x)
        A = (
            w * w * np.eye(n)
            - 2.0 * w * (M @ xxT + xxT @ M)
            - v * w * M
            + 4.0 * v * np.outer(Mx, Mx)
        )
        H = 2.0 * self.Q + (2.0 * self.c / w**3) * A
        return 0.5 * (H + H.T)

    # row-wise versions for batches of points
    def values(self, X: np.ndarray) -> np.ndarray:
        w = np.einsum("ij,jk,ik->i", X, self.M, X)
        u = np.einsum("ij,jk,ik->i", X, self.Q, X)
        v = np.einsum("ij,ij->i", X, X)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = u + self.c * v / w
        return np.where(w > 0, f, np.inf)

    def gradients(self, X: np.ndarray) -> np.ndarray:
        MX = X @ self.M
        w = np.einsum("ij,ij->i", X, MX)[:, None]
        v = np.einsum("ij,ij->i", X, X)[:, None]
        return 2.0 * (X @ self.Q) + 2.0 * self.c * (w * X - v * MX) / (w * w)


def _gamma_over_q(Qbar: Any, gamma: float) -> _Fractional:
    Qbar = as_sym(Qbar)
    return _Fractional(Qbar, float(gamma), Qbar)


def d3_objective(Qbar: Any, gamma: float, x: Any) -> float:
    """``u + gamma v / u`` with ``u = x^T Qbar x`` and ``v = x^T x``."""
    return _gamma_over_q(Qbar, gamma).value(np.asarray(x, dtype=float))


def d3_gradient(Qbar: Any, gamma: float, x: Any) -> np.ndarray:
    """``2 Qbar x + 2 gamma (u x - v Qbar x) / u^2``."""
    return _gamma_over_q(Qbar, gamma).gradient(np.asarray(x, dtype=float))


def d3_hessian(Qbar: Any, gamma: float, x: Any) -> np.ndarray:
    """``2 Qbar + (2 gamma / u^3) A(x)`` with
    ``A = u^2 I - 2u (Qbar x x^T + x x^T Qbar) - v u Qbar + 4 v Qbar x x^T Qbar``.
    """
    return _gamma_over_q(Qbar, gamma).hessian(np.asarray(x, dtype=float))


# -- spectral thresholds


@dataclass(frozen=True)
class SpectralRegime:
    beta: float
    beta_max: float
    beta_conv: float | None
    lam_min: float  # of Qbar_beta = Q_nom + beta R
    lam_max: float
    C_const: float | None
    gamma_conv: float | None

    @property
    def label(self) -> str:
        """``"indefinite"`` below beta_max, ``"convex"`` once Qbar_beta is PD, else ``"transition"``."""
        if self.lam_min > 0:
            return "convex"
        if self.beta < self.beta_max:
            return "indefinite"
        return "transition"

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["label"] = self.label
        if math.isinf(self.beta_max):
            d["beta_max"] = "inf"
        return d


def convexity_constant(lam_min: float, lam_max: float, n: int) -> float:
    """``n (2/lmin + 10 lmax/lmin^2 + 8 lmax^2/lmin^3)``."""
    if not lam_min > 0:
        raise NotPD("the constant needs a positive definite matrix")
    return n * (2.0 / lam_min + 10.0 * lam_max / lam_min**2 + 8.0 * lam_max**2 / lam_min**3)


def spectral_regime(Q_nom: Any, R: Any, beta: float, with_conv: bool = True) -> SpectralRegime:
    """Thresholds for ``Qbar_beta = Q_nom + beta R``.

    ``beta_max`` is the Weyl bound below which Qbar_beta stays indefinite
    (+inf when Q_nom is PSD); ``beta_conv`` is the exact level from which
    Qbar_beta is PSD.  ``gamma_conv`` is set only when Qbar_beta is PD.
    """
    Q_nom = as_sym(Q_nom)
    R = as_sym(R)
    if Q_nom.shape != R.shape:
        raise DomainError("Q_nom and R differ in shape")
    n = Q_nom.shape[0]
    lmin_nom = eig_sym(Q_nom).lam_min
    decR = eig_sym(R)
    beta_max = -lmin_nom / decR.lam_max if lmin_nom < 0 and decR.lam_max > 0 else math.inf
    beta_conv = None
    if with_conv:
        if decR.lam_min <= 0:
            raise NotPD(f"R has eigenvalue {decR.lam_min:.3e} <= 0")
        V = decR.eigenvectors
        R_isqrt = (V / np.sqrt(decR.eigenvalues)) @ V.T
        beta_conv = -eig_sym(R_isqrt @ Q_nom @ R_isqrt).lam_min
    dec = eig_sym(Q_nom + beta * R)
    C = gamma_conv = None
    if dec.lam_min > 0:
        C = convexity_constant(dec.lam_min, dec.lam_max, n)
        gamma_conv = 2.0 * dec.lam_min / C
    return SpectralRegime(float(beta), beta_max, beta_conv, dec.lam_min, dec.lam_max, C, gamma_conv)


# -- solver


def require_strictly_copositive(M: Any, what: str = "matrix") -> float:
    """Minimum of x^T M x over the simplex; raise unless it is positive."""
    M = as_sym(M)
    sol = solve_support_enum(M) if M.shape[0] <= 20 else solve_stqp(M, "replicator")
    if not sol.value > 0:
        raise NonCopositive(f"{what} is not strictly copositive (simplex minimum {sol.value:.3e})")
    return sol.value


def simplex_grid(n: int, res: int = GRID_RES):
    """Yield chunks of all points of the simplex with coordinates in (1/res) Z."""
    bars = itertools.combinations(range(res + n - 1), n - 1)
    while True:
        chunk = list(itertools.islice(bars, _GRID_CHUNK))
        if not chunk:
            return
        B = np.asarray(chunk, dtype=float).reshape(len(chunk), n - 1)
        edges = np.hstack([np.full((len(chunk), 1), -1.0), B, np.full((len(chunk), 1), res + n - 1.0)])
        yield (np.diff(edges, axis=1) - 1.0) / res


def _best_grid_point(F: _Fractional, n: int, res: int) -> tuple[np.ndarray, float]:
    best_x, best_v = None, math.inf
    for X in simplex_grid(n, res):
        vals = F.values(X)
        r = int(np.argmin(vals))
        if vals[r] < best_v:
            best_x, best_v = X[r].copy(), float(vals[r])
    return best_x, best_v


def _pg_residuals(F: _Fractional, X: np.ndarray) -> np.ndarray:
    return np.linalg.norm(X - project_simplex_rows(X - F.gradients(X)), axis=1)


def projected_gradient(
    F: _Fractional, X0: np.ndarray, tol: float = PG_TOL, max_iter: int = PG_MAX_ITER
) -> tuple[np.ndarray, np.ndarray, int]:
    """Armijo projected gradient from every row of ``X0`` (run as one batch).

    The first trial step is 1; later iterations start from the
    Barzilai-Borwein step ``s^T s / s^T y`` of the previous move.  The step is
    halved until ``f(x+) <= f(x) + slope * grad^T (x+ - x)``.  A row stops when
    its projected-gradient norm reaches ``tol`` or when ``STALL_ITERS``
    consecutive steps lower f by no more than round-off.
    """
    X = np.array(X0, dtype=float)
    fX = F.values(X)
    G_all = F.gradients(X)
    step0 = np.full(X.shape[0], ARMIJO_STEP0)
    active = np.ones(X.shape[0], dtype=bool)
    stall = np.zeros(X.shape[0], dtype=int)
    it = 0
    for it in range(1, max_iter + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        Xa, G = X[idx], G_all[idx]
        res = np.linalg.norm(Xa - project_simplex_rows(Xa - G), axis=1)
        done = res <= tol
        active[idx[done]] = False
        idx, Xa, G = idx[~done], Xa[~done], G[~done]
        if idx.size == 0:
            break
        step = step0[idx].copy()
        pending = np.ones(idx.size, dtype=bool)
        Xn = Xa.copy()
        fn = fX[idx].copy()
        for _ in range(80):
            p = np.nonzero(pending)[0]
            if p.size == 0:
                break
            cand = project_simplex_rows(Xa[p] - step[p, None] * G[p])
            fc = F.values(cand)
            ok = fc <= fX[idx[p]] + ARMIJO_SLOPE * np.einsum("ij,ij->i", G[p], cand - Xa[p])
            Xn[p[ok]] = cand[ok]
            fn[p[ok]] = fc[ok]
            pending[p[ok]] = False
            step[p[~ok]] *= ARMIJO_SHRINK
        # rows whose line search failed have stalled at round-off level
        active[idx[pending]] = False
        Gn = F.gradients(Xn)
        S = Xn - Xa
        Y = Gn - G
        sy = np.einsum("ij,ij->i", S, Y)
        ss = np.einsum("ij,ij->i", S, S)
        with np.errstate(divide="ignore", invalid="ignore"):
            bb = np.where(sy > 0, ss / sy, ARMIJO_STEP0)
        step0[idx] = np.clip(bb, 1e-10, 1e10)
        flat = fn >= fX[idx] - 4e-16 * (1.0 + np.abs(fX[idx]))
        stall[idx] = np.where(flat, stall[idx] + 1, 0)
        active[idx[stall[idx] >= STALL_ITERS]] = False
        X[idx] = Xn
        fX[idx] = fn
        G_all[idx] = Gn
    return X, fX, it


def _pick(X: np.ndarray, fX: np.ndarray) -> int:
    """Lowest value; near-ties go to the lexicographically smallest point."""
    best = float(np.min(fX))
    near = np.nonzero(fX <= best + 1e-12 * (1.0 + abs(best)))[0]
    keys = X[near]
    order = np.lexsort(keys.T[::-1])
    return int(near[order[0]])


def solve_d3(
    Qbar: Any,
    radius: RadiusFn,
    starts: int = 20,
    rng: RngLike | None = None,
    grid: bool | None = None,
    check_copositive: bool = True,
    extra_starts: Any = None,
) -> StqpSolution:
    """Minimize ``x^T Qbar x + theta(x) x^T x`` over the simplex.

    Rows of ``extra_starts`` join the start set.  Descent never increases
    the objective, so warm-starting a sweep with neighbouring solutions keeps
    the reported values consistent with each other.
    """
    t0 = time.perf_counter()
    Qbar = as_sym(Qbar)
    n = Qbar.shape[0]
    if isinstance(radius, Const):
        if not radius.theta > 0:
            raise DomainError("constant radius must be positive")
        sol = solve_stqp(Qbar + radius.theta * np.eye(n), rng=rng, extra_starts=extra_starts)
        return StqpSolution(sol.x, sol.value, sol.support, sol.engine, sol.kkt_residual,
                            time.perf_counter() - t0, {**sol.meta, "radius": "const"})
    if isinstance(radius, InvNormSq):
        sol = solve_stqp(Qbar, rng=rng, extra_starts=extra_starts)
        return StqpSolution(sol.x, sol.value + radius.gamma, sol.support, sol.engine, sol.kkt_residual,
                            time.perf_counter() - t0, {**sol.meta, "radius": "invnorm"})
    if isinstance(radius, InvQuad):
        R = as_sym(radius.R)
        if R.shape != Qbar.shape:
            raise DomainError("R and Qbar differ in shape")
        if check_copositive:
            require_strictly_copositive(R, "R")
        F = _Fractional(Qbar, 1.0, R)
        tag = "invquad"
    elif isinstance(radius, GammaOverQ):
        if radius.gamma < 0:
            raise DomainError("gamma must be nonnegative")
        if check_copositive:
            require_strictly_copositive(Qbar, "Qbar")
        F = _gamma_over_q(Qbar, radius.gamma)
        tag = "goq"
    else:
        raise DomainError(f"unknown radius {radius!r}")

    if rng is None:
        from .randmat import RngSpec

        rng = RngSpec(0)
    parts = [barycenter(n)[None, :], np.eye(n)]
    if starts > 0:
        parts.append(as_stream(rng).dirichlet_ones(n, starts))
    use_grid = (n <= GRID_MAX_N) if grid is None else grid
    if use_grid:
        gx, _ = _best_grid_point(F, n, GRID_RES)
        parts.append(gx[None, :])
    if extra_starts is not None:
        E = np.atleast_2d(np.asarray(extra_starts, dtype=float))
        if E.shape[1] != n:
            raise DomainError("start points have the wrong dimension")
        parts.append(project_simplex_rows(E))
    X0 = np.vstack(parts)
    X, fX, iters = projected_gradient(F, X0)
    r = _pick(X, fX)
    x = project_simplex(X[r])
    meta = {
        "radius": tag,
        "starts": int(X0.shape[0]),
        "iterations": iters,
        "grid": bool(use_grid),
        "label": "grid-safeguarded" if use_grid else "local",
    }
    x.setflags(write=False)
    return StqpSolution(
        x=x,
        value=F.value(x),
        support=support_of(x),
        engine="projected-gradient",
        kkt_residual=float(_pg_residuals(F, x[None, :])[0]),
        runtime=time.perf_counter() - t0,
        meta=meta,
    )


def d3_value(Qbar: Any, radius: RadiusFn, x: Any) -> float:
    """Robust objective ``x^T Qbar x + theta(x) x^T x`` at a given point."""
    x = np.asarray(x, dtype=float)
    return float(x @ as_sym(Qbar) @ x) + radius_value(radius, Qbar, x) * float(x @ x)
