import math

import numpy as np
import pytest

from drstqp.d3ro import (
    Const,
    GammaOverQ,
    InvNormSq,
    InvQuad,
    convexity_constant,
    d3_gradient,
    d3_hessian,
    d3_objective,
    d3_value,
    radius_value,
    require_strictly_copositive,
    simplex_grid,
    solve_d3,
    spectral_regime,
)
from drstqp.dro import reformulate_frobenius
from drstqp.errors import DomainError, NonCopositive, NonpositiveDenominator, NotPD
from drstqp.randmat import RngSpec
from drstqp.stqp import solve_support_enum


def positive_sym(rng, n, lo=0.2, hi=1.0):
    # entrywise positive, hence strictly copositive, and usually indefinite
    B = rng.uniform(lo, hi, size=(n, n))
    return (B + B.T) / 2


def test_objective_examples():
    rng = np.random.default_rng(0)
    for x in rng.dirichlet(np.ones(4), size=10):
        assert d3_objective(np.eye(4), 0.0, x) == pytest.approx(x @ x, abs=1e-15)
        assert d3_objective(np.eye(4), 0.7, x) == pytest.approx(x @ x + 0.7, abs=1e-14)
        np.testing.assert_allclose(d3_gradient(np.eye(4), 0.7, x), 2 * x, atol=1e-14)
        np.testing.assert_allclose(d3_hessian(np.eye(4), 0.7, x), 2 * np.eye(4), atol=1e-12)
    Q = positive_sym(rng, 3)
    x = rng.dirichlet(np.ones(3))
    np.testing.assert_allclose(d3_gradient(Q, 0.0, x), 2 * Q @ x, atol=1e-14)
    np.testing.assert_allclose(d3_hessian(Q, 0.0, x), 2 * Q, atol=1e-14)


def test_objective_rejects_nonpositive_denominator():
    with pytest.raises(NonpositiveDenominator):
        d3_objective(-np.eye(2), 0.1, [0.5, 0.5])
    with pytest.raises(NonpositiveDenominator):
        radius_value(InvQuad(np.zeros((2, 2))), np.eye(2), [0.5, 0.5])


def test_radius_values():
    x = np.array([0.25, 0.75])
    Q = np.diag([1.0, 2.0])
    v = float(x @ x)
    assert radius_value(Const(0.3), Q, x) == 0.3
    assert radius_value(InvNormSq(0.3), Q, x) == pytest.approx(0.3 / v)
    assert radius_value(GammaOverQ(0.3), Q, x) == pytest.approx(0.3 / float(x @ Q @ x))
    # the InvNormSq reduction adds exactly gamma
    assert d3_value(Q, InvNormSq(0.3), x) == pytest.approx(float(x @ Q @ x) + 0.3, abs=1e-15)


def fd_gradient(Q, g, x, h=1e-6):
    return np.array([(d3_objective(Q, g, x + h * e) - d3_objective(Q, g, x - h * e)) / (2 * h) for e in np.eye(x.size)])


def fd_hessian(Q, g, x, h=1e-6):
    return np.column_stack([(d3_gradient(Q, g, x + h * e) - d3_gradient(Q, g, x - h * e)) / (2 * h) for e in np.eye(x.size)])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        Q = positive_sym(rng, n)
        x = rng.dirichlet(np.ones(n))
        g = float(rng.uniform(0.01, 2.0))
        exact = d3_gradient(Q, g, x)
        assert np.linalg.norm(fd_gradient(Q, g, x) - exact) / np.linalg.norm(exact) <= 1e-5


def test_hessian_matches_finite_differences():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(2, 7))
        Q = positive_sym(rng, n)
        x = rng.dirichlet(np.ones(n))
        g = float(rng.uniform(0.01, 2.0))
        H = d3_hessian(Q, g, x)
        F = fd_hessian(Q, g, x)
        scale = np.maximum(np.abs(H), 1e-3 * np.max(np.abs(H)))
        assert np.max(np.abs(F - H) / scale) <= 1e-4


def test_spectral_regime_examples():
    Q_nom = np.diag([-1.0, 3.0])
    R = np.diag([2.0, 1.0])
    reg = spectral_regime(Q_nom, R, 0.1)
    assert reg.beta_max == pytest.approx(0.5, abs=1e-14)
    # R^{-1/2} Q_nom R^{-1/2} = diag(-1/2, 3)
    assert reg.beta_conv == pytest.approx(0.5, abs=1e-14)
    assert reg.label == "indefinite" and reg.gamma_conv is None
    assert spectral_regime(Q_nom, R, 0.7).label == "convex"
    assert spectral_regime(Q_nom, R, 0.5).label == "transition"
    psd = spectral_regime(np.eye(2), np.eye(2), 0.1)
    assert math.isinf(psd.beta_max)
    assert psd.to_json()["beta_max"] == "inf"


def test_convexity_constant_at_identity():
    reg = spectral_regime(np.zeros((2, 2)), np.eye(2), 1.0)
    assert reg.C_const == 40.0
    assert reg.gamma_conv == 0.05
    assert convexity_constant(1.0, 1.0, 2) == 40.0
    with pytest.raises(NotPD):
        convexity_constant(0.0, 1.0, 2)
    with pytest.raises(NotPD):
        spectral_regime(np.eye(2), np.diag([1.0, -1.0]), 0.5)


def test_convexity_certificate_below_gamma_conv():
    rng = np.random.default_rng(3)
    for _ in range(5):
        n = int(rng.integers(2, 6))
        B = rng.normal(size=(n, n))
        Q = B @ B.T + 0.5 * np.eye(n)
        reg = spectral_regime(np.zeros((n, n)), Q, 1.0)
        for x in rng.dirichlet(np.ones(n), size=500):
            assert np.min(np.linalg.eigvalsh(d3_hessian(Q, reg.gamma_conv, x))) >= -1e-8


def test_require_strictly_copositive():
    assert require_strictly_copositive(np.eye(3)) == pytest.approx(1 / 3)
    with pytest.raises(NonCopositive):
        require_strictly_copositive(np.array([[1.0, -2.0], [-2.0, 1.0]]))


def test_simplex_grid_size_and_membership():
    pts = np.vstack(list(simplex_grid(3, 4)))
    assert pts.shape == (math.comb(6, 2), 3)
    np.testing.assert_allclose(pts.sum(axis=1), 1.0)
    assert np.all(pts >= 0)
    assert len({tuple(p) for p in np.round(pts * 4).astype(int)}) == pts.shape[0]


def test_solve_d3_const_matches_reformulation():
    rng = np.random.default_rng(4)
    for _ in range(10):
        B = rng.normal(size=(5, 5))
        Q = (B + B.T) / 2
        exact = solve_support_enum(reformulate_frobenius(Q, 0.8)).value
        assert solve_d3(Q, Const(0.8)).value == pytest.approx(exact, abs=1e-9)
    with pytest.raises(DomainError):
        solve_d3(np.eye(2), Const(0.0))


def test_solve_d3_closed_forms():
    assert solve_d3(np.diag([1.0, 2.0]), InvNormSq(0.3)).value == pytest.approx(0.3 + 2 / 3, abs=1e-12)
    for n in (2, 4, 9):
        sol = solve_d3(np.eye(n), GammaOverQ(0.2), starts=5, rng=RngSpec(0))
        assert sol.value == pytest.approx(1 / n + 0.2, abs=1e-9)
        np.testing.assert_allclose(sol.x, np.full(n, 1 / n), atol=1e-6)
    # 1/(x^T R x) with R = I is gamma/v with gamma = 1
    sol = solve_d3(np.diag([1.0, 2.0]), InvQuad(np.eye(2)), starts=5, rng=RngSpec(0))
    assert sol.value == pytest.approx(1 + 2 / 3, abs=1e-9)


def test_solve_d3_errors():
    indefinite = np.array([[1.0, -2.0], [-2.0, 1.0]])
    with pytest.raises(NonCopositive):
        solve_d3(indefinite, GammaOverQ(0.1))
    with pytest.raises(NonCopositive):
        solve_d3(np.eye(2), InvQuad(indefinite))
    with pytest.raises(DomainError):
        solve_d3(np.eye(2), GammaOverQ(-1.0))
    with pytest.raises(DomainError):
        solve_d3(np.eye(3), InvQuad(np.eye(2)))
    with pytest.raises(DomainError):
        solve_d3(np.eye(3), GammaOverQ(0.1), extra_starts=np.ones((1, 2)))


def test_solve_d3_is_never_above_grid_best():
    rng = np.random.default_rng(5)
    for _ in range(6):
        n = int(rng.integers(2, 7))
        Q = positive_sym(rng, n, lo=-0.1)
        Q += 0.3 * np.eye(n)
        try:
            require_strictly_copositive(Q)
        except NonCopositive:
            continue
        g = float(rng.uniform(0.01, 0.5))
        sol = solve_d3(Q, GammaOverQ(g), starts=10, rng=RngSpec(1))
        grid_best = min(float(np.min([d3_objective(Q, g, x) for x in X])) for X in simplex_grid(n, 12))
        assert sol.value <= grid_best + 1e-9


def test_solve_d3_monotone_in_gamma_with_warm_starts():
    rng = np.random.default_rng(6)
    Q = positive_sym(rng, 6)
    prev, vals = [], []
    for g in sorted(np.linspace(0.0, 2.0, 11), reverse=True):
        sol = solve_d3(Q, GammaOverQ(float(g)), starts=10, rng=RngSpec(2), extra_starts=prev or None)
        prev.append(sol.x)
        vals.append(sol.value)
    vals = vals[::-1]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_solution_labels():
    rng = np.random.default_rng(7)
    sol = solve_d3(positive_sym(rng, 10), GammaOverQ(0.1), starts=5, rng=RngSpec(0))
    assert sol.meta["label"] == "local" and sol.engine == "projected-gradient"
    assert sol.kkt_residual <= 1e-6
    small = solve_d3(positive_sym(rng, 3), GammaOverQ(0.1), starts=5, rng=RngSpec(0))
    assert small.meta["label"] == "grid-safeguarded"
