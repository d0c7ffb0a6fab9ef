import csv
import math

import numpy as np
import pytest

from drstqp.calibrate import (
    RadiusBound,
    chi2_sampler,
    check_bound_applies,
    coverage_deviations,
    coverage_mc,
    event_statistic,
    growth_bound,
    normal_sampler,
    orlicz_estimate,
    orlicz_norm,
    radius_exp_decay,
    radius_martingale,
    radius_subexp_uniform,
    radius_subgauss,
    radius_transport,
    transport_bound,
    true_mean,
    wilson_interval,
)
from drstqp.errors import Diverged, DomainError, TransportGuardError
from drstqp.randmat import RngSpec, goe_model, shifted_model, wishart_model

# evaluated once in extended precision and frozen
TRANSPORT_2_100_005 = 0.34616367652045704
MARTINGALE_1_100_005 = 0.805147027597076


def test_exp_decay_examples():
    assert radius_exp_decay(1, 1, 1.5, 2, 1, math.exp(-1)) == pytest.approx(1.0, abs=1e-15)
    assert radius_exp_decay(1, 1, 1.5, 10, 50, 0.05) > radius_exp_decay(1, 1, 1.5, 2, 50, 0.05)
    # below the sample-size threshold the heavier exponent 1/a applies
    L = math.log(1 / 0.01)
    assert radius_exp_decay(1, 1, 1.5, 3, 2, 0.01) == pytest.approx((L / 2) ** (1 / 1.5))
    with pytest.raises(DomainError):
        radius_exp_decay(1, 1, 1.0, 2, 10, 0.05)
    with pytest.raises(DomainError):
        radius_exp_decay(1, 1, 1.5, 2, 10, 1.0)


def test_transport_examples():
    assert radius_transport(2, 100, 0.05) == pytest.approx(TRANSPORT_2_100_005, abs=1e-15)
    assert radius_transport(2, 400, 0.05) == pytest.approx(TRANSPORT_2_100_005 / 2, abs=1e-15)
    assert radius_transport(2, 100, 1 - 1e-12) < 1e-5
    with pytest.raises(DomainError):
        radius_transport(0, 10, 0.1)


def test_subexp_family_examples():
    assert radius_martingale(1, 100, 0.05) == pytest.approx(MARTINGALE_1_100_005, abs=1e-15)
    assert radius_subgauss(1, 0, 5, 100, 0.05) == 0.0
    assert radius_subexp_uniform(1, 0, 5, 100, 0.05) == 0.0
    s = (3 + math.log(40)) / 50
    assert radius_subexp_uniform(2, 0.5, 3, 50, 0.05) == pytest.approx(math.sqrt(s) + s)
    # the martingale bound carries no dimension at all
    assert "m" not in RadiusBound("martingale", {"R": 1.0}).params
    with pytest.raises(DomainError):
        radius_martingale(0, 10, 0.1)


@pytest.mark.parametrize(
    "bound",
    [
        RadiusBound("expdecay", {"c1": 1, "c2": 1, "a": 1.5, "m": 3}),
        RadiusBound("transport", {"c": 2}),
        RadiusBound("subgauss", {"C": 1, "K": 1, "m": 3}),
        RadiusBound("subexp", {"C": 1, "K": 1, "m": 3}),
        RadiusBound("martingale", {"R": 1}),
    ],
)
def test_radii_monotone_on_grids(bound):
    Ns = [5, 10, 20, 50, 100, 1000, 10000]
    betas = [0.5, 0.2, 0.1, 0.05, 0.01, 0.001]
    for beta in betas:
        vals = [bound.evaluate(N, beta) for N in Ns]
        assert all(b < a for a, b in zip(vals, vals[1:]))
    for N in Ns:
        vals = [bound.evaluate(N, b) for b in betas]
        assert all(b > a for a, b in zip(vals, vals[1:]))


def test_radius_bound_validation():
    with pytest.raises(DomainError):
        RadiusBound("gaussian", {})
    with pytest.raises(DomainError):
        RadiusBound("transport", {})
    assert transport_bound().to_json() == {"kind": "transport", "c": 2.0}


def test_guard_refuses_wishart():
    with pytest.raises(TransportGuardError):
        check_bound_applies(transport_bound(), wishart_model(3, 3))
    with pytest.raises(TransportGuardError):
        check_bound_applies(RadiusBound("expdecay", {"c1": 1, "c2": 1, "a": 1.5, "m": 6}),
                            shifted_model(np.eye(3), 0.5, wishart_model(3, 3)))
    check_bound_applies(RadiusBound("martingale", {"R": 1}), wishart_model(3, 3))
    check_bound_applies(transport_bound(), goe_model(3))


def test_growth_bound_holds():
    rng = np.random.default_rng(0)
    for p in (1.0, 1.5, 2.0):
        for _ in range(10_000):
            n = int(rng.integers(1, 6))
            B = rng.normal(scale=rng.exponential(), size=(n, n))
            Q = (B + B.T) / 2
            y = rng.normal(size=n)
            y /= np.linalg.norm(y)
            assert abs(y @ Q @ y) <= growth_bound(Q, p) + 1e-12


def test_orlicz_normal_psi2():
    assert orlicz_norm(normal_sampler(), "psi2") == pytest.approx(math.sqrt(8 / 3), rel=0.05)


def test_orlicz_chi2_classification():
    with pytest.raises(Diverged):
        orlicz_norm(chi2_sampler(5), "psi2")
    assert math.isfinite(orlicz_norm(chi2_sampler(5), "psi1"))
    # chi^2(2) is twice an Exp(1), whose psi1 norm solves 1/(1 - 1/t) = 2
    assert orlicz_norm(chi2_sampler(2), "psi1") == pytest.approx(4.0, rel=0.05)


def test_orlicz_domain():
    with pytest.raises(DomainError):
        orlicz_norm(normal_sampler(), "psi2", mc=1000)
    with pytest.raises(DomainError):
        orlicz_norm(normal_sampler(), "psi3")
    est = orlicz_estimate(lambda s, size: np.zeros(size), "psi1", mc=10_000)
    assert est.t == 0.0 and not est.diverged


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(1 - hi, abs=1e-15)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 10)[0] == 0.0 and wilson_interval(10, 10)[1] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        wilson_interval(0, 0)


def test_true_mean():
    np.testing.assert_array_equal(true_mean(goe_model(3)), np.zeros((3, 3)))
    np.testing.assert_array_equal(true_mean(wishart_model(2, 5)), 5 * np.eye(2))
    np.testing.assert_array_equal(true_mean(shifted_model(np.ones((2, 2)), 0.5, wishart_model(2, 2))),
                                  np.ones((2, 2)) + np.eye(2))


def test_coverage_trivial_radii():
    m = goe_model(3)
    assert coverage_mc(m, 20, 50, 0.05, math.inf, RngSpec(0)).coverage == 1.0
    assert coverage_mc(m, 20, 50, 0.05, 0.0, RngSpec(0)).coverage == 0.0
    with pytest.raises(DomainError):
        coverage_mc(m, 20, 50, 0.05, -1.0, RngSpec(0))
    with pytest.raises(TransportGuardError):
        coverage_mc(wishart_model(3, 3), 20, 5, 0.05, transport_bound(), RngSpec(0))


def test_events_are_nested_and_dominate_any_direction():
    rng = np.random.default_rng(1)
    D = coverage_deviations(goe_model(4), 10, 40, RngSpec(2))
    fro = event_statistic(D, "frobenius")
    spec = event_statistic(D, "spectral")
    point = event_statistic(D, "pointwise")
    assert np.all(point <= spec + 1e-12) and np.all(spec <= fro + 1e-12)
    for t, d in enumerate(D):
        for _ in range(50):
            y = rng.normal(size=4)
            y /= np.linalg.norm(y)
            assert y @ d @ y <= fro[t] + 1e-12
    with pytest.raises(DomainError):
        event_statistic(D, "operator")


def test_coverage_is_seeded_and_writes_csv(tmp_path):
    a = coverage_mc(goe_model(3), 50, 30, 0.05, transport_bound(), RngSpec(7), event="pointwise")
    b = coverage_mc(goe_model(3), 50, 30, 0.05, transport_bound(), RngSpec(7), event="pointwise")
    assert a == b
    assert 0.0 <= a.coverage <= 1.0 and a.hits == round(a.coverage * a.trials)
    assert a.theta_used == radius_transport(2, 50, 0.05)
    path = tmp_path / "coverage.csv"
    a.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["trial", "hit", "norm", "theta"]
    assert len(rows) == 31
    assert sum(int(r[1]) for r in rows[1:]) == a.hits
    assert a.to_json()["event"] == "pointwise"
