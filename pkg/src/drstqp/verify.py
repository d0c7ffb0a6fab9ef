"""On-demand oracle checks, one suite per module.

Each check compares a library routine against an independent computation
(numpy/scipy, brute force, or a closed form) on a few seeded instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

from . import calibrate, cliquelab, d3ro, dro, randmat, specfun, stqp, symlin, transport

SEED = 20240611


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    ok: bool
    detail: str


def _rng(k: int = 0) -> np.random.Generator:
    return np.random.default_rng([SEED, k])


def _rand_sym(g: np.random.Generator, n: int) -> np.ndarray:
    B = g.normal(size=(n, n))
    return (B + B.T) / 2


def _symlin():
    g = _rng(1)
    A, B = _rand_sym(g, 6), _rand_sym(g, 6)
    yield "svec isometry", abs(symlin.svec(A) @ symlin.svec(B) - np.trace(A @ B)), 1e-12
    yield "smat inverts svec", np.max(np.abs(symlin.smat(symlin.svec(A)) - A)), 1e-14
    yield "Jacobi vs LAPACK eigenvalues", np.max(np.abs(symlin.eig_sym(A).eigenvalues - np.linalg.eigvalsh(A))), 1e-10
    v = g.normal(size=7)
    x = symlin.project_simplex(v)
    # projection optimality: (v - x)^T (y - x) <= 0 at every vertex y
    worst = max(float((v - x) @ (e - x)) for e in np.eye(7))
    yield "simplex projection optimality", max(worst, abs(x.sum() - 1)), 1e-12


def _randmat():
    a = randmat.sample_goe_batch(4, 3, randmat.RngSpec(7))
    b = randmat.sample_goe_batch(4, 3, randmat.RngSpec(7))
    yield "seed determinism", float(np.max(np.abs(a - b))), 0.0
    G = randmat.sample_goe_batch(3, 20000, randmat.RngSpec(1))
    yield "GOE diagonal variance 2", abs(G[:, 0, 0].var() - 2.0), 0.1
    yield "GOE off-diagonal variance 1", abs(G[:, 0, 1].var() - 1.0), 0.05
    W = randmat.sample_wishart_batch(3, 5, 20000, randmat.RngSpec(2))
    yield "Wishart mean k I", float(np.max(np.abs(W.mean(axis=0) - 5 * np.eye(3)))), 0.15


def _specfun():
    ps = np.linspace(0.01, 0.99, 25)
    yield "inverse normal cdf", max(abs(specfun.inv_norm_cdf(p) - stats.norm.ppf(p)) for p in ps), 1e-12
    cases = [(0.5, 0.3), (1.0, 0.95), (2.5, 0.5), (7.0, 0.01)]
    yield "regularized gamma", max(abs(specfun.gamma_p(a, x) - special.gammainc(a, x)) for a, x in
                                   [(0.5, 0.2), (1.0, 3.0), (4.0, 2.5), (10.0, 12.0)]), 1e-12
    yield "inverse regularized gamma", max(abs(specfun.inv_gamma_p(a, p) - special.gammaincinv(a, p)) /
                                           (1 + special.gammaincinv(a, p)) for a, p in cases), 1e-10


def _transport():
    g = _rng(2)
    atoms = g.normal(size=(6, 4))
    c = g.normal(size=4)
    theta = 0.7
    P = transport.DiscreteDist(atoms)
    wc = transport.worst_case_shift(P, c, theta)
    sup = transport.inner_sup_linear(c, P.mean(), theta)
    yield "worst case attains the sup", abs(float(np.mean(wc.atoms @ c)) - sup), 1e-12
    yield "worst case on the ball boundary", abs(transport.discrete_wp(P, wc) - theta), 1e-12
    Q = transport.DiscreteDist(g.normal(size=(6, 4)))
    perms = min(np.mean(np.sum((atoms - Q.atoms[list(s)]) ** 2, axis=1)) for s in itertools.permutations(range(6)))
    yield "assignment vs permutation brute force", abs(transport.discrete_wp(P, Q) - math.sqrt(perms)), 1e-12
    w = transport.w2_gaussian([0.0], [[4.0]], [1.0], [[1.0]])
    yield "scalar Gaussian W2", abs(w - math.sqrt(1.0 + 1.0)), 1e-12


def _stqp():
    g = _rng(3)
    yield "identity gives 1/n", abs(stqp.solve_support_enum(np.eye(5)).value - 0.2), 1e-14
    worst = 0.0
    for _ in range(5):
        Q = _rand_sym(g, 5)
        exact = stqp.solve_support_enum(Q).value
        # dense grid over the simplex as an independent upper bound
        grid = np.vstack(list(d3ro.simplex_grid(5, 20)))
        bound = float(np.min(np.einsum("ki,ij,kj->k", grid, Q, grid)))
        worst = max(worst, max(0.0, exact - bound))
        local = stqp.solve_replicator_multistart(Q, 20, randmat.RngSpec(3)).value
        worst = max(worst, max(0.0, exact - local))
    yield "enumeration is never beaten", worst, 1e-12


def _dro():
    g = _rng(4)
    ens = randmat.EmpiricalEnsemble(np.stack([_rand_sym(g, 4) for _ in range(8)]), 0, None)
    x = g.dirichlet(np.ones(4))
    theta = 0.4
    M = dro.reformulate_frobenius(ens, theta)
    yield "Frobenius reformulation", abs(dro.inner_sup_at(ens, x, theta) - x @ M @ x), 1e-12
    worst = dro.worst_case_stqp_dist(ens, x, theta)
    yield "Frobenius worst case attains", abs(dro.expected_payoff(worst, x) - x @ M @ x), 1e-12
    const, Mx = dro.reformulate_maxnorm(ens, theta)
    lhs = dro.inner_sup_at(ens, x, theta, transport.LINF)
    yield "max-norm reformulation", abs(lhs - (const + x @ Mx @ x)), 1e-12
    yield "GOE chance radius", abs(dro.unify_radius(dro.ChanceGOE(1.0, 0.95)).value -
                                   math.sqrt(2) * stats.norm.ppf(0.95)), 1e-10


def _d3ro():
    g = _rng(5)
    B = g.normal(size=(4, 4))
    Q = B @ B.T + np.eye(4)
    x = g.dirichlet(np.ones(4))
    h = 1e-6
    fd = np.array([(d3ro.d3_objective(Q, 0.3, x + h * e) - d3ro.d3_objective(Q, 0.3, x - h * e)) / (2 * h)
                   for e in np.eye(4)])
    gr = d3ro.d3_gradient(Q, 0.3, x)
    yield "gradient vs central differences", float(np.max(np.abs(fd - gr)) / (1 + np.max(np.abs(gr)))), 1e-7
    yield "convexity threshold at identity", abs(d3ro.spectral_regime(np.eye(2), np.eye(2), 0.0).gamma_conv - 0.05), 1e-15


def _calibrate():
    yield "transport radius", abs(calibrate.radius_transport(2.0, 200, 0.05) - math.sqrt(4 * math.log(20) / 200)), 1e-15
    lo, hi = calibrate.wilson_interval(475, 500)
    ref = stats.binomtest(475, 500).proportion_ci(method="wilson")
    yield "Wilson interval", max(abs(lo - ref.low), abs(hi - ref.high)), 1e-12


def _cliquelab():
    worst = 0.0
    for s in range(5):
        G = cliquelab.gen_graph(7, 0.4, randmat.RngSpec(s))
        A, Q = cliquelab.build_qnom(G)
        sol = stqp.solve_support_enum(Q)
        best = max(cliquelab.support_weight(G, S) for k in range(1, 8)
                   for S in itertools.combinations(range(7), k) if G.is_clique(S))
        cl = stqp.extract_clique(sol.x, A)
        worst = max(worst, abs(cl.weight - best), 0.0 if G.is_clique(sol.support) else 1.0)
    yield "weighted clique recovery", worst, 1e-8


SUITES: dict[str, Callable] = {
    "symlin": _symlin,
    "randmat": _randmat,
    "specfun": _specfun,
    "transport": _transport,
    "stqp": _stqp,
    "dro": _dro,
    "d3ro": _d3ro,
    "calibrate": _calibrate,
    "cliquelab": _cliquelab,
}


def run_suite(name: str) -> list[Check]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for s in names:
        if s not in SUITES:
            raise KeyError(s)
        for label, err, tol in SUITES[s]():
            err = float(err)
            out.append(Check(s, label, bool(err <= tol), f"error {err:.3e} (tol {tol:.0e})"))
    return out
