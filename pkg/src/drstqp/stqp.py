"""Standard quadratic programs min_{x in simplex} x^T Q x.

Two engines:

* :func:`solve_support_enum` visits every nonempty support ``S``, solves the
  bordered KKT system on the face, and keeps the best feasible candidate.
  The global minimum is a KKT point in the relative interior of some face, so
  this is exact up to linear-solve round-off (practical up to n = 20).
* :func:`solve_replicator` runs discrete replicator dynamics on the shifted
  payoff ``c E - Q`` (positive entries), then polishes the limit point by the
  KKT solve on its support.  Local only.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .errors import DegenerateValue, DimensionTooLarge, DomainError
from .randmat import RngLike, as_stream
from .symlin import as_simplex, as_sym, barycenter, project_simplex

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-8
ENUM_MAX_N = 20
AUTO_ENUM_MAX_N = 15
AUTO_LOCAL_STARTS = 50
_FEAS_TOL = 1e-12
_CHUNK = 20_000


@dataclass(frozen=True)
class StqpSolution:
    x: np.ndarray
    value: float
    support: tuple[int, ...]
    engine: str
    kkt_residual: float
    runtime: float
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.x.size

    def to_json(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "value": self.value,
            "support": list(self.support),
            "engine": self.engine,
            "kkt_residual": self.kkt_residual,
            "runtime": self.runtime,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StqpSolution":
        return cls(
            np.asarray(obj["x"], dtype=float),
            float(obj["value"]),
            tuple(int(i) for i in obj["support"]),
            obj["engine"],
            float(obj["kkt_residual"]),
            float(obj["runtime"]),
            dict(obj.get("meta", {})),
        )


def quad(Q: np.ndarray, x: np.ndarray) -> float:
    return float(x @ Q @ x)


def support_of(x: np.ndarray, support_tol: float = SUPPORT_TOL) -> tuple[int, ...]:
    return tuple(int(i) for i in np.nonzero(x > support_tol)[0])


def kkt_residual(Q: np.ndarray, x: np.ndarray) -> float:
    """Projected-gradient residual ``||x - P(x - 2Qx)||``; zero exactly at KKT points."""
    return float(np.linalg.norm(x - project_simplex(x - 2.0 * (Q @ x))))


def _finish(Q, x, engine, t0, support_tol, meta=None) -> StqpSolution:
    x = np.asarray(x, dtype=float)
    x.setflags(write=False)
    return StqpSolution(
        x=x,
        value=quad(Q, x),
        support=support_of(x, support_tol),
        engine=engine,
        kkt_residual=kkt_residual(Q, x),
        runtime=time.perf_counter() - t0,
        meta=meta or {},
    )


# -- exact engine


def face_kkt(Q: np.ndarray, S: Iterable[int]) -> np.ndarray | None:
    """Stationary point of x^T Q x on the face ``S`` (x_S >= 0), or None if infeasible.

    Solves ``Q_S x_S = lam 1, 1^T x_S = 1``; singular faces fall back to least
    squares and are accepted only if the residual and sign checks pass.
    """
    S = list(S)
    k = len(S)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = Q[np.ix_(S, S)]
    K[:k, k] = -1.0
    K[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        log.debug("singular face %s, least-squares fallback", S)
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        if np.linalg.norm(K @ sol - rhs) > 1e-9 * (1.0 + np.linalg.norm(K)):
            return None
    xs = sol[:k]
    if not np.all(np.isfinite(xs)) or np.min(xs) < -_FEAS_TOL:
        return None
    x = np.zeros(Q.shape[0])
    x[S] = np.clip(xs, 0.0, None)
    return x / x.sum()


def _batch_face_values(Q: np.ndarray, combos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Candidate points and values for a chunk of equal-size supports.

    Rows whose system is singular or infeasible get value +inf.
    """
    C, k = combos.shape
    K = np.zeros((C, k + 1, k + 1))
    K[:, :k, :k] = Q[combos[:, :, None], combos[:, None, :]]
    K[:, :k, k] = -1.0
    K[:, k, :k] = 1.0
    rhs = np.zeros((C, k + 1))
    rhs[:, k] = 1.0
    xs = np.full((C, k), np.nan)
    try:
        xs = np.linalg.solve(K, rhs[..., None])[..., 0][:, :k]
    except np.linalg.LinAlgError:
        # at least one singular face in the chunk: redo it one face at a time
        for r in range(C):
            x = face_kkt(Q, combos[r])
            if x is not None:
                xs[r] = x[combos[r]]
    ok = np.all(np.isfinite(xs), axis=1) & (np.nan_to_num(xs, nan=-1.0).min(axis=1) >= -_FEAS_TOL)
    xs = np.where(ok[:, None], np.clip(np.nan_to_num(xs), 0.0, None), 0.0)
    sums = xs.sum(axis=1)
    ok &= sums > 0
    xs[ok] /= sums[ok, None]
    QS = K[:, :k, :k]
    vals = np.einsum("ci,cij,cj->c", xs, QS, xs)
    vals[~ok] = np.inf
    return xs, vals


def solve_support_enum(Q: Any, support_tol: float = SUPPORT_TOL, max_n: int = ENUM_MAX_N) -> StqpSolution:
    """Exact global StQP solution by enumerating all 2^n - 1 supports.

    Supports are visited by size, then lexicographically; a later candidate
    replaces the incumbent only if it is lower by more than a round-off margin,
    so ties go to the smaller (then lexicographically first) support.
    """
    t0 = time.perf_counter()
    Q = as_sym(Q)
    n = Q.shape[0]
    if n > max_n:
        raise DimensionTooLarge(f"support enumeration is limited to n <= {max_n}, got {n}")
    margin = 1e-12 * (1.0 + float(np.max(np.abs(Q))))
    best_val = math.inf
    best_x = None
    faces = 0
    for k in range(1, n + 1):
        it = itertools.combinations(range(n), k)
        while True:
            chunk = list(itertools.islice(it, _CHUNK))
            if not chunk:
                break
            combos = np.asarray(chunk, dtype=np.intp).reshape(len(chunk), k)
            faces += len(chunk)
            xs, vals = _batch_face_values(Q, combos)
            r = int(np.argmin(vals))  # first minimal index keeps lexicographic order
            if vals[r] < best_val - margin:
                best_val = float(vals[r])
                best_x = np.zeros(n)
                best_x[combos[r]] = xs[r]
    return _finish(Q, best_x, "enum", t0, support_tol, {"faces": faces})


# -- local engine


def replicator_shift(Q: np.ndarray) -> float:
    """Constant c with ``c E - Q`` entrywise >= 1."""
    return 1.0 + float(np.max(np.abs(Q)))


def _replicator_run(P: np.ndarray, X: np.ndarray, max_iter: int, tol: float) -> tuple[np.ndarray, int, np.ndarray]:
    """Vectorized replicator iterations on the rows of ``X`` for payoff ``P`` > 0."""
    active = np.ones(X.shape[0], dtype=bool)
    iters = np.zeros(X.shape[0], dtype=int)
    X = X.copy()
    for _ in range(max_iter):
        if not active.any():
            break
        Xa = X[active]
        PX = Xa @ P
        Xn = Xa * PX / np.sum(Xa * PX, axis=1, keepdims=True)
        Xn /= Xn.sum(axis=1, keepdims=True)
        step = np.abs(Xn - Xa).sum(axis=1)
        X[active] = Xn
        iters[active] += 1
        idx = np.nonzero(active)[0]
        active[idx[step <= tol]] = False
    return X, int(iters.max(initial=0)), ~active


def _polish(Q: np.ndarray, x: np.ndarray, polish_tol: float) -> np.ndarray:
    S = np.nonzero(x > polish_tol)[0]
    cand = face_kkt(Q, S)
    if cand is not None and quad(Q, cand) <= quad(Q, x) + 1e-12 * (1.0 + abs(quad(Q, x))):
        return cand
    return x


def solve_replicator(
    Q: Any,
    x0: Any = None,
    max_iter: int = 10_000,
    tol: float = 1e-13,
    support_tol: float = SUPPORT_TOL,
    polish: bool = True,
    polish_tol: float = 1e-6,
) -> StqpSolution:
    """Local StQP solution by replicator dynamics started at ``x0`` (default barycenter).

    Faces are invariant under the dynamics, so a vertex start stays put.
    Non-convergence is not an error: the last iterate is returned with
    ``meta["converged"] = False``.
    """
    t0 = time.perf_counter()
    Q = as_sym(Q)
    n = Q.shape[0]
    x0 = barycenter(n) if x0 is None else as_simplex(x0)
    if x0.size != n:
        raise DomainError("start point has the wrong dimension")
    c = replicator_shift(Q)
    X, iters, conv = _replicator_run(c - Q, x0[None, :], max_iter, tol)
    x = X[0]
    if polish:
        x = _polish(Q, x, polish_tol)
    return _finish(Q, x, "replicator", t0, support_tol, {"shift": c, "iterations": iters, "converged": bool(conv[0])})


def _as_starts(X: Any, n: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != n:
        raise DomainError("start points have the wrong dimension")
    return np.vstack([as_simplex(x) for x in X]) if X.shape[0] else X


def solve_replicator_multistart(
    Q: Any,
    starts: int,
    rng: RngLike,
    max_iter: int = 10_000,
    tol: float = 1e-13,
    support_tol: float = SUPPORT_TOL,
    polish_tol: float = 1e-6,
    extra_starts: Any = None,
) -> StqpSolution:
    """Best of the barycenter plus ``starts - 1`` uniform-simplex starts.

    Rows of ``extra_starts`` are appended as additional starting points; the
    dynamics never decrease x^T P x, so the result is no worse than any of them.
    """
    t0 = time.perf_counter()
    Q = as_sym(Q)
    n = Q.shape[0]
    if starts < 1:
        raise DomainError("need at least one start")
    parts = [barycenter(n)[None, :], as_stream(rng).dirichlet_ones(n, starts - 1)]
    if extra_starts is not None:
        parts.append(np.atleast_2d(_as_starts(extra_starts, n)))
    X0 = np.vstack(parts)
    c = replicator_shift(Q)
    X, iters, conv = _replicator_run(c - Q, X0, max_iter, tol)
    best_x, best_val = None, math.inf
    for x in X:
        x = _polish(Q, x, polish_tol)
        v = quad(Q, x)
        if v < best_val:
            best_x, best_val = x, v
    meta = {"shift": c, "starts": starts, "iterations": iters, "converged": int(conv.sum())}
    return _finish(Q, best_x, "replicator", t0, support_tol, meta)


def solve_stqp(
    Q: Any,
    engine: str = "auto",
    rng: RngLike | None = None,
    starts: int = AUTO_LOCAL_STARTS,
    support_tol: float = SUPPORT_TOL,
    extra_starts: Any = None,
) -> StqpSolution:
    """Dispatch: ``"enum"``, ``"replicator"`` or ``"auto"`` (exact for n <= 15, local beyond).

    ``extra_starts`` only matters for the replicator engine.
    """
    Q = as_sym(Q)
    n = Q.shape[0]
    if engine == "auto":
        engine = "enum" if n <= AUTO_ENUM_MAX_N else "replicator"
    if engine == "enum":
        return solve_support_enum(Q, support_tol)
    if engine == "replicator":
        if rng is None:
            from .randmat import RngSpec

            rng = RngSpec(0)
        sol = solve_replicator_multistart(Q, starts, rng, support_tol=support_tol, extra_starts=extra_starts)
        sol.meta["label"] = "local"
        return sol
    raise DomainError(f"unknown engine {engine!r}")


# -- Motzkin-Straus


@dataclass(frozen=True)
class Clique:
    indices: tuple[int, ...]
    weight: float  # 1 / (2 (1 - x^T A x))
    support_weight: float | None  # sum of vertex weights over the support, when weights are known


def extract_clique(
    x: Any, A: Any, support_tol: float = SUPPORT_TOL, weights: Any = None
) -> Clique:
    """Read the clique and its weight off a maximizer of x^T A x over the simplex."""
    x = as_simplex(x)
    A = as_sym(A)
    val = quad(A, x)
    if val >= 1.0 - 1e-12:
        raise DegenerateValue(f"x^T A x = {val!r} is not below one")
    S = support_of(x, support_tol)
    sw = None if weights is None else float(np.sum(np.asarray(weights, dtype=float)[list(S)]))
    return Clique(S, 1.0 / (2.0 * (1.0 - val)), sw)
