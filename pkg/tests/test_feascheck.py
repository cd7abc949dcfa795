import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import basis
from netnorm import rng
from netnorm.feascheck import (
    DensityDomain,
    L1BallDomain,
    L2BallDomain,
    S1BallDomain,
    SolverConfig,
    Status,
    TargetNorm,
    check_feasible,
    solve_batch,
    status_mask,
    y_norm,
)
from netnorm.matlib import ParameterError, hermitize, random_density, random_hermitian, schatten_norm, vector_norm
from netnorm.model import banach_constants
from netnorm.oracle import random_effects, random_povm

SINF2 = banach_constants("schatten", math.inf, 2)
DIAG = np.stack([basis(2, 0), basis(2, 1)])


def test_y_norm_unit_vector_picks_element():
    Y = np.stack([np.diag([0.3, 0.0]), np.eye(2)])
    assert y_norm([1, 0], Y, SINF2) == pytest.approx(0.3)


def test_y_norm_zero():
    assert y_norm([0, 0], DIAG, SINF2) == 0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_y_norm_diagonal_basis_is_max_abs(a):
    assert y_norm(a, DIAG, SINF2) == pytest.approx(max(abs(x) for x in a), abs=1e-12)


def test_y_norm_length_mismatch():
    with pytest.raises(ParameterError):
        y_norm([1, 0, 0], DIAG, SINF2)


def test_forced_point_is_infeasible():
    res = check_feasible(np.array([1.0, 0.0]), np.stack([np.eye(2) / 2] * 2), DIAG, SINF2, 0.1)
    assert res.status is Status.INFEASIBLE
    assert res.achieved == pytest.approx(0.5, abs=1e-4)
    assert res.certified
    np.testing.assert_allclose(res.q, [0.5, 0.5], atol=1e-9)


def test_single_outcome_feasible():
    res = check_feasible(np.array([1.0]), np.eye(2)[None], np.eye(2)[None], SINF2, 0.0)
    assert res.status is Status.FEASIBLE
    assert res.achieved <= 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_constructed_member_is_feasible(seed):
    g = rng.stream(seed, "member")
    X = random_povm(g, 3, 2)
    Y = random_effects(g, 3, 2)
    a0 = random_density(2, g)
    p = np.einsum("iab,ba->i", X, a0).real
    res = check_feasible(p, X, Y, SINF2, 1e-3, seed=seed)
    assert res.status is Status.FEASIBLE
    assert res.achieved <= 1e-3 + SolverConfig().tol
    # witness consistency: q_i = tr[X_i alpha]
    np.testing.assert_allclose(res.q, np.einsum("iab,ba->i", X, res.alpha).real, atol=1e-9)
    assert y_norm(p - res.q, Y, SINF2) == pytest.approx(res.achieved, abs=1e-12)


def test_rejects_point_outside_simplex():
    with pytest.raises(ParameterError):
        check_feasible(np.array([0.7, 0.7]), DIAG, DIAG, SINF2, 0.1)
    with pytest.raises(ParameterError):
        check_feasible(np.array([1.0]), DIAG, DIAG, SINF2, 0.1)


def test_solver_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(max_iters=0)
    with pytest.raises(ParameterError):
        SolverConfig(schedule="cosine")


def _f_and_grad(p, X, Y, desc, a):
    dom = DensityDomain(X)
    target = TargetNorm(desc, Y)
    R = target.combine(p[None] - dom.apply(a[None]))
    nrm, W = target.norm_and_dual(R)
    return nrm[0], -dom.adjoint(target.pair(W))[0], R[0]


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_objective_convex(seed, t):
    g = rng.stream(seed, "convex")
    X = random_povm(g, 3, 2)
    Y = random_effects(g, 3, 2)
    p = g.dirichlet(np.ones(3))
    a1, a2 = random_density(2, g), random_density(2, g)
    f = lambda a: _f_and_grad(p, X, Y, SINF2, a)[0]
    assert f(t * a1 + (1 - t) * a2) <= t * f(a1) + (1 - t) * f(a2) + 1e-9


@pytest.mark.parametrize("alpha", [math.inf, 2, 3])
def test_subgradient_matches_finite_difference(alpha):
    desc = banach_constants("schatten", alpha, 2)
    checked = 0
    for seed in range(30):
        g = rng.stream(seed, "fd")
        X = random_povm(g, 3, 2)
        Y = random_effects(g, 3, 2)
        p = g.dirichlet(np.ones(3))
        a = random_density(2, g)
        D = random_hermitian(2, g)
        D -= np.trace(D) / 2 * np.eye(2)
        f0, G, R = _f_and_grad(p, X, Y, desc, a)
        if math.isinf(alpha):
            ev = np.sort(np.abs(np.linalg.eigvalsh(hermitize(R))))
            if ev[-1] - ev[-2] <= 1e-4:
                continue
        h = 1e-6
        fd = (_f_and_grad(p, X, Y, desc, a + h * D)[0] - _f_and_grad(p, X, Y, desc, a - h * D)[0]) / (2 * h)
        assert fd == pytest.approx(np.trace(G @ D).real, abs=1e-3)
        checked += 1
    assert checked >= 20


def test_achieved_never_exceeds_start_value():
    g = rng.stream(3, "mono")
    X = random_povm(g, 4, 2)
    Y = random_effects(g, 4, 2)
    P = g.dirichlet(np.ones(4), size=20)
    dom = DensityDomain(X)
    target = TargetNorm(SINF2, Y)
    start = target.norm(target.combine(P - dom.apply(dom.start(20))))
    res = solve_batch(P, dom, target, 0.05, SolverConfig(max_iters=50))
    assert np.all(res.achieved <= start + 1e-12)


def test_batch_rows_independent_of_batch_composition():
    g = rng.stream(4, "rows")
    X = random_povm(g, 3, 2)
    Y = random_effects(g, 3, 2)
    P = g.dirichlet(np.ones(3), size=12)
    dom, target = DensityDomain(X), TargetNorm(SINF2, Y)
    cfg = SolverConfig(max_iters=300)
    full = solve_batch(P, dom, target, 0.1, cfg, ids=np.arange(12), window=5)
    part = solve_batch(P[7:], dom, target, 0.1, cfg, ids=np.arange(7, 12), window=3)
    np.testing.assert_allclose(full.achieved[7:], part.achieved, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(full.iterations[7:], part.iterations)
    assert list(full.status[7:]) == list(part.status)


def test_status_mask():
    s = np.array([Status.FEASIBLE, Status.INFEASIBLE, Status.FEASIBLE], dtype=object)
    np.testing.assert_array_equal(status_mask(s, Status.FEASIBLE), [True, False, True])


@pytest.mark.parametrize("family, alpha", [("ell", 2), ("ell", 4), ("ell", math.inf), ("schatten", 2)])
def test_dual_element_norms_residual(family, alpha, gen):
    desc = banach_constants(family, alpha, 3)
    Y = gen.standard_normal((4, 3)) if family == "ell" else np.stack([random_hermitian(3, gen) for _ in range(4)])
    target = TargetNorm(desc, Y)
    R = target.combine(gen.standard_normal((5, 4)))
    nrm, W = target.norm_and_dual(R)
    inner = np.sum(np.conj(W) * R, axis=tuple(range(1, R.ndim))).real
    np.testing.assert_allclose(inner, nrm, rtol=1e-10)
    dual = 1 / (1 - 1 / alpha) if not math.isinf(alpha) else 1.0
    norm = schatten_norm if family == "schatten" else vector_norm
    assert np.all(norm(W, dual) <= 1 + 1e-10)


@pytest.mark.parametrize("Domain, dim", [(L2BallDomain, 3), (L1BallDomain, 3)])
def test_ball_domains_support_function(Domain, dim, gen):
    X = gen.standard_normal((4, dim))
    dom = Domain(X)
    G = gen.standard_normal((6, dim))
    s = dom.support(G)
    for _ in range(200):
        a = dom.project(gen.standard_normal(dim) * 3)
        assert np.all(G @ a <= s + 1e-12)


def test_s1_domain_projection_and_support(gen):
    dom = S1BallDomain(random_povm(gen, 3, 2))
    G = random_hermitian(2, gen)
    s = dom.support(G[None])[0]
    for _ in range(100):
        a = dom.project((random_hermitian(2, gen) * 3)[None])[0]
        assert np.abs(np.linalg.eigvalsh(a)).sum() <= 1 + 1e-9
        assert np.trace(G @ a).real <= s + 1e-9


def test_injective_domain_feasibility():
    # q = x(a) for a in the l2 ball
    g = rng.stream(5, "inj")
    X = g.standard_normal((3, 3)) / 3
    a0 = g.standard_normal(3)
    a0 /= 2 * np.linalg.norm(a0)
    p = X @ a0
    desc = banach_constants("ell", 2, 3)
    res = check_feasible(p, X, np.eye(3), desc, 1e-3, domain="l2")
    assert res.status is Status.FEASIBLE
