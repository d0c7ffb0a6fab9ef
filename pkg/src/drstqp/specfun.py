"""Special functions: inverse normal CDF and regularized lower incomplete gamma.

These feed the chance-constrained radii; everything is plain ``math`` on
floats so results do not depend on a special-function library.
"""

from __future__ import annotations

import math

from .errors import DomainError, NoConvergence

# Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def log_gamma(a: float) -> float:
    """log Gamma(a) for a > 0 by the Lanczos approximation (abs. error ~1e-15)."""
    if a <= 0:
        raise DomainError("log_gamma requires a > 0")
    if a < 0.5:
        # reflection keeps the series in its accurate range
        return math.log(math.pi / math.sin(math.pi * a)) - log_gamma(1.0 - a)
    x = a - 1.0
    s = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        s += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (x + 0.5) * math.log(t) - t + math.log(s)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation to the normal quantile
# (relative error below 1.15e-9 over the whole open interval).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )


def inv_norm_cdf(alpha: float) -> float:
    """Standard normal quantile: Acklam's approximation plus one Halley step."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if alpha == 0.5:
        return 0.0
    x = _acklam(alpha)
    # Halley refinement; the residual uses erfc on the smaller tail for accuracy
    if alpha < 0.5:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - alpha
    else:
        e = -(0.5 * math.erfc(x / math.sqrt(2.0)) - (1.0 - alpha))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


_EPS = 1e-16
_MAX_ITER = 10_000


def _gamma_series(a: float, x: float, gln: float) -> float:
    ap = a
    total = delta = 1.0 / a
    for _ in range(_MAX_ITER):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - gln)
    raise NoConvergence("incomplete gamma series did not converge")


def _gamma_cf(a: float, x: float, gln: float) -> float:
    """Upper regularized gamma Q(a, x) by the modified Lentz continued fraction."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - gln) * h
    raise NoConvergence("incomplete gamma continued fraction did not converge")


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0 or x < 0 or math.isnan(x):
        raise DomainError(f"gamma_p needs a > 0 and x >= 0, got a={a!r}, x={x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    gln = log_gamma(a)
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x, gln))
    return max(0.0, 1.0 - _gamma_cf(a, x, gln))


def _gamma_density(a: float, x: float, gln: float) -> float:
    return math.exp(-x + (a - 1.0) * math.log(x) - gln)


def inv_gamma_p(a: float, alpha: float, tol: float = 1e-12) -> float:
    """Solve P(a, x) = alpha for x: safeguarded Newton inside a bisection bracket."""
    if a <= 0 or not 0.0 <= alpha < 1.0:
        raise DomainError(f"inv_gamma_p needs a > 0 and 0 <= alpha < 1, got a={a!r}, alpha={alpha!r}")
    if alpha == 0.0:
        return 0.0
    lo, hi = 0.0, a + 20.0 * math.sqrt(a) + 50.0
    while gamma_p(a, hi) < alpha:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise NoConvergence("could not bracket the incomplete gamma inverse")
    gln = log_gamma(a)
    # small-x asymptotic P(a, x) ~ x^a / Gamma(a + 1) gives the starting point
    x = math.exp((math.log(alpha) + log_gamma(a + 1.0)) / a)
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(2000):
        f = gamma_p(a, x) - alpha
        if abs(f) <= tol:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        dens = _gamma_density(a, x, gln)
        x_new = x - f / dens if dens > 0 and math.isfinite(dens) else math.nan
        if not lo < x_new < hi:
            # geometric midpoint while the bracket spans orders of magnitude
            x_new = math.sqrt(lo * hi) if lo > 0 and hi > 4.0 * lo else 0.5 * (lo + hi)
            if lo == 0.0:
                x_new = 0.5 * hi if hi > 1e-300 else hi
        if abs(x_new - x) <= 4e-16 * abs(x):
            return x_new
        x = x_new
    raise NoConvergence("inv_gamma_p did not converge")
