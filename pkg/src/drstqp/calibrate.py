"""Out-of-sample radius formulas, Orlicz norms and Monte-Carlo coverage.

Every radius here certifies, with probability at least 1 - beta over the
sample, that ``y^T (Qbar_N - E[Q]) y <= theta`` for a fixed unit vector y.
Constants that only exist up to an unspecified absolute factor (``c1, c2``
of the exponential-decay bound, ``C`` of the sub-Gaussian and
sub-exponential bounds) default to 1, so those radii are useful for scaling
behaviour only.  The martingale bound and the transportation bound are fully
explicit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import Diverged, DomainError, TransportGuardError
from .randmat import EnsembleModel, RngSpec, Stream, _draw, as_stream
from .symlin import eig_sym, svec_batch

GOE_TRANSPORT_C = 2.0
DEFAULT_A = 1.5
ORLICZ_MC = 2**20
ORLICZ_T_MAX = 1e6
# share of the psi-sum carried by the top 0.1% of samples at the fitted t;
# calibrated so that psi2 of N(0,1) stays below and psi2 of chi^2 lands above
ORLICZ_TOP_SHARE = 0.16


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta!r}")


def _check_N(N: int) -> None:
    if N < 1:
        raise DomainError("N must be >= 1")


def radius_exp_decay(c1: float, c2: float, a: float, m: int, N: int, beta: float) -> float:
    """Light-tail radius: exponent ``1/max(m, 2)`` once N passes ``log(c1/beta)/c2``, else ``1/a``."""
    _check_beta(beta)
    _check_N(N)
    if not (c1 > 0 and c2 > 0):
        raise DomainError("c1 and c2 must be positive")
    if not a > 1 or m < 1:
        raise DomainError("need a > 1 and m >= 1")
    L = math.log(c1 / beta)
    if L <= 0:
        raise DomainError("log(c1/beta) must be positive")
    base = L / (c2 * N)
    expo = 1.0 / max(m, 2) if N >= L / c2 else 1.0 / a
    return base**expo


def radius_transport(c: float, N: int, beta: float) -> float:
    """``sqrt(2 c log(1/beta) / N)``; use c = 2 for GOE perturbations."""
    _check_beta(beta)
    _check_N(N)
    if not c > 0:
        raise DomainError("c must be positive")
    return math.sqrt(2.0 * c * math.log(1.0 / beta) / N)


def radius_subexp_uniform(C: float, K: float, m: int, N: int, beta: float) -> float:
    """``C K (sqrt((m + L)/N) + (m + L)/N)`` with ``L = log(2/beta)``; K is a psi_1 norm."""
    _check_beta(beta)
    _check_N(N)
    if C <= 0 or K < 0 or m < 1:
        raise DomainError("need C > 0, K >= 0, m >= 1")
    s = (m + math.log(2.0 / beta)) / N
    return C * K * (math.sqrt(s) + s)


def radius_martingale(R: float, N: int, beta: float) -> float:
    """``2 sqrt2 R sqrt(2 L / N) + R L / N`` with ``L = log(2/beta)``; no dimension enters."""
    _check_beta(beta)
    _check_N(N)
    if not R > 0:
        raise DomainError("R must be positive")
    L = math.log(2.0 / beta)
    return 2.0 * math.sqrt(2.0) * R * math.sqrt(2.0 * L / N) + R * L / N


def radius_subgauss(C: float, K: float, m: int, N: int, beta: float) -> float:
    """``C K (sqrt(m/N) + sqrt(L/N))`` with ``L = log(2/beta)``; K is a psi_2 norm."""
    _check_beta(beta)
    _check_N(N)
    if C <= 0 or K < 0 or m < 1:
        raise DomainError("need C > 0, K >= 0, m >= 1")
    return C * K * (math.sqrt(m / N) + math.sqrt(math.log(2.0 / beta) / N))


_KINDS = {
    "expdecay": ("c1", "c2", "a", "m"),
    "transport": ("c",),
    "subgauss": ("C", "K", "m"),
    "subexp": ("C", "K", "m"),
    "martingale": ("R",),
}


@dataclass(frozen=True)
class RadiusBound:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown bound kind {self.kind!r}")
        missing = set(_KINDS[self.kind]) - set(self.params)
        if missing:
            raise DomainError(f"{self.kind} bound is missing {sorted(missing)}")

    def evaluate(self, N: int, beta: float) -> float:
        p = self.params
        if self.kind == "expdecay":
            return radius_exp_decay(p["c1"], p["c2"], p["a"], int(p["m"]), N, beta)
        if self.kind == "transport":
            return radius_transport(p["c"], N, beta)
        if self.kind == "subgauss":
            return radius_subgauss(p["C"], p["K"], int(p["m"]), N, beta)
        if self.kind == "subexp":
            return radius_subexp_uniform(p["C"], p["K"], int(p["m"]), N, beta)
        return radius_martingale(p["R"], N, beta)

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}


def transport_bound(c: float = GOE_TRANSPORT_C) -> RadiusBound:
    return RadiusBound("transport", {"c": c})


def _involves_wishart(model: EnsembleModel) -> bool:
    if model.kind == "wishart":
        return True
    return model.kind == "shifted" and _involves_wishart(model.inner)


def check_bound_applies(bound: RadiusBound, model: EnsembleModel) -> None:
    """Wishart samples satisfy neither a transportation inequality nor exponential decay."""
    if bound.kind in ("transport", "expdecay") and _involves_wishart(model):
        raise TransportGuardError(f"the {bound.kind} radius does not hold for Wishart perturbations")


def growth_bound(Q: Any, p: float) -> float:
    """Right side ``M + L ||svec Q||^p`` of the growth lemma with ``(M, L) = (1/q, 1/p)``.

    Bounds ``|y^T Q y|`` for every unit y (Young's inequality on ``||Q||_F``).
    """
    if p < 1:
        raise DomainError("p must be >= 1")
    M = 0.0 if p == 1 else 1.0 - 1.0 / p
    return M + (1.0 / p) * float(np.linalg.norm(np.asarray(Q, dtype=float))) ** p


# -- Orlicz norms

Sampler = Callable[[Stream, int], np.ndarray]


def normal_sampler(mu: float = 0.0, sigma: float = 1.0) -> Sampler:
    return lambda s, size: mu + sigma * s.normal(size)


def chi2_sampler(k: int) -> Sampler:
    """chi^2(k), the law of a diagonal entry of a Wishart W_n(I, k) matrix."""
    return lambda s, size: np.sum(s.normal((size, k)) ** 2, axis=1)


def _psi_exponent(psi: str) -> int:
    if psi in ("psi1", "1", 1):
        return 1
    if psi in ("psi2", "2", 2):
        return 2
    raise DomainError(f"psi must be psi1 or psi2, got {psi!r}")


def _log_mean_exp(y: np.ndarray) -> float:
    top = float(np.max(y))
    return top + math.log(float(np.mean(np.exp(y - top))))


@dataclass(frozen=True)
class OrliczEstimate:
    t: float
    top_share: float
    diverged: bool


def orlicz_estimate(
    sampler: Sampler,
    psi: str,
    mc: int = ORLICZ_MC,
    rng: Any = None,
    rel_tol: float = 1e-2,
    t_max: float = ORLICZ_T_MAX,
    share_threshold: float = ORLICZ_TOP_SHARE,
) -> OrliczEstimate:
    """Monte-Carlo ``inf{t : E exp((|xi|/t)^k) <= 2}`` by bisection on one common sample.

    A finite sample always yields a finite t, so non-membership is detected
    from the shape of the sum at the fitted t: if the top 0.1% of samples carry
    more than ``share_threshold`` of ``sum exp((|xi|/t)^k)``, the expectation
    is driven by a tail that the sample cannot resolve and the estimate is
    flagged as diverged.  This is a heuristic and is documented as such.
    """
    if mc < 10_000:
        raise DomainError("mc must be at least 1e4")
    k = _psi_exponent(psi)
    stream = as_stream(rng if rng is not None else RngSpec(0))
    z = np.abs(np.asarray(sampler(stream, mc), dtype=float).ravel())
    if not np.all(np.isfinite(z)):
        raise DomainError("sampler produced non-finite values")
    if float(np.max(z)) == 0.0:
        return OrliczEstimate(0.0, 0.0, False)
    log2 = math.log(2.0)

    def holds(t: float) -> bool:
        return _log_mean_exp((z / t) ** k) <= log2

    hi = float(np.max(z))
    while not holds(hi):
        hi *= 2.0
        if hi > t_max:
            return OrliczEstimate(math.inf, 1.0, True)
    lo = hi / 2.0
    while holds(lo):
        hi, lo = lo, lo / 2.0
        if lo < 1e-300:
            break
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if holds(mid):
            hi = mid
        else:
            lo = mid
    t = math.sqrt(lo * hi)
    y = (z / t) ** k
    w = np.exp(y - np.max(y))
    top = max(1, mc // 1000)
    share = float(np.sum(np.partition(w, mc - top)[mc - top:]) / np.sum(w))
    return OrliczEstimate(t, share, share > share_threshold)


def orlicz_norm(sampler: Sampler, psi: str, mc: int = ORLICZ_MC, rng: Any = None, **kw) -> float:
    """psi_1 or psi_2 norm estimate; raises :class:`Diverged` when the variable is not in the class."""
    est = orlicz_estimate(sampler, psi, mc, rng, **kw)
    if est.diverged:
        raise Diverged(f"{psi} norm does not appear finite (top-tail share {est.top_share:.3f} at t={est.t:.4g})")
    return est.t


# -- coverage


@dataclass(frozen=True)
class CoverageReport:
    trials: int
    hits: int
    coverage: float
    target: float
    theta_used: float
    model: str
    event: str
    wilson_low: float
    wilson_high: float
    norms: np.ndarray = field(compare=False, repr=False)

    def to_json(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "norms"}
        d["theta_used"] = _json_float(self.theta_used)
        return d

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "hit", "norm", "theta"])
            for i, v in enumerate(self.norms):
                w.writerow([i, int(v <= self.theta_used), repr(float(v)), _json_float(self.theta_used)])


def _json_float(v: float):
    return "inf" if math.isinf(v) else float(v)


def wilson_interval(hits: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials < 1:
        raise DomainError("trials must be >= 1")
    p = hits / trials
    den = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def true_mean(model: EnsembleModel) -> np.ndarray:
    if model.kind == "goe":
        return np.zeros((model.n, model.n))
    if model.kind == "wishart":
        return model.k * np.eye(model.n)
    if model.kind == "shifted":
        return model.base + model.scale * true_mean(model.inner)
    raise DomainError(f"unknown model kind {model.kind!r}")


EVENTS = ("frobenius", "spectral", "pointwise")


def event_statistic(D: np.ndarray, event: str, y: np.ndarray | None = None) -> np.ndarray:
    """Per-trial statistic compared with theta; ``D`` has shape (trials, n, n).

    * ``frobenius``: ``||svec D||_2``, the sufficient uniform event;
    * ``spectral``: ``lambda_max(D)``, the exact supremum of ``y^T D y`` over the sphere;
    * ``pointwise``: ``y^T D y`` at one fixed unit vector (the event each radius certifies).

    Since ``y^T D y <= lambda_max(D) <= ||D||_F``, the three hit sets are nested.
    """
    if event == "frobenius":
        return np.linalg.norm(svec_batch(D), axis=1)
    if event == "spectral":
        return np.array([eig_sym(d).lam_max for d in D])
    if event == "pointwise":
        n = D.shape[1]
        y = np.full(n, 1.0 / math.sqrt(n)) if y is None else np.asarray(y, dtype=float)
        y = y / np.linalg.norm(y)
        return np.einsum("i,kij,j->k", y, D, y)
    raise DomainError(f"event must be one of {EVENTS}")


def coverage_deviations(model: EnsembleModel, N: int, trials: int, rng: RngSpec) -> np.ndarray:
    """``Qbar_N - E[Q]`` for each trial; trial t draws from stream ``rng.child(t)``."""
    _check_N(N)
    if trials < 1:
        raise DomainError("trials must be >= 1")
    mu = true_mean(model)
    out = np.empty((trials, model.n, model.n))
    for t in range(trials):
        out[t] = _draw(model, N, rng.child(t).stream_rng()).mean(axis=0) - mu
    return out


def coverage_mc(
    model: EnsembleModel,
    N: int,
    trials: int,
    beta: float,
    bound: RadiusBound | float,
    rng: RngSpec,
    event: str = "frobenius",
    y: Sequence[float] | None = None,
) -> CoverageReport:
    """Fraction of trials in which the calibrated radius covers the true mean."""
    _check_beta(beta)
    if isinstance(bound, RadiusBound):
        check_bound_applies(bound, model)
        theta = bound.evaluate(N, beta)
    else:
        theta = float(bound)
        if theta < 0:
            raise DomainError("theta must be nonnegative")
    D = coverage_deviations(model, N, trials, rng)
    stat = event_statistic(D, event, None if y is None else np.asarray(y, dtype=float))
    hits = int(np.sum(stat <= theta))
    lo, hi = wilson_interval(hits, trials)
    return CoverageReport(trials, hits, hits / trials, 1.0 - beta, theta, model.kind, event, lo, hi, stat)
