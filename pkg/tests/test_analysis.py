import math

import numpy as np
import pytest

from towgame.analysis import (
    barrier,
    boundary_estimate_suite,
    check_data_order,
    comparison_check,
    convergence_study,
    exterior_center,
    kappa,
    pde_residuals,
    tabulate_pair,
)
from towgame.data import Bump, Constant, ProblemData, Radial, Sum, affine
from towgame.errors import ConfigurationError, GeometryError
from towgame.geometry import DomainSpec, build_grid

from oracles import kappa_integral, mc_second_moment

BALL = DomainSpec.ball([0.0, 0.0], 1.0)


@pytest.mark.parametrize("N", range(1, 11))
def test_kappa_exact(N):
    assert kappa(N) * (N + 2) == 1.0


@pytest.mark.parametrize("N", [1, 2, 3])
def test_kappa_matches_integral(N):
    assert kappa_integral(N) == pytest.approx(kappa(N), abs=1e-10)


def test_kappa_monte_carlo_small():
    m, se = mc_second_moment(2, 20000, 0)
    assert abs(m - 0.25) < 5 * se


def test_kappa_rejects_zero():
    with pytest.raises(ValueError):
        kappa(0)


def manufactured_1d(h):
    dom = DomainSpec.ball([0.0], 1.0)
    g = build_grid(dom, h, 4 * h, 4 * h * 4 * h)
    c = kappa(1) / 2.0  # K = 1
    v = lambda x, t: np.sin(2 * x[:, 0])  # noqa: E731
    u = lambda x, t: (1 + 4 * c) * np.sin(2 * x[:, 0])  # noqa: E731  u = v - c v''
    d = ProblemData(dom, Constant(0.0), Constant(0.0), Constant(0.0), 4 * h, g.T)
    return tabulate_pair(g, u, v), g, d


def test_manufactured_elliptic_residual_second_order():
    errs = []
    for h in (0.02, 0.01):
        pair, g, d = manufactured_1d(h)
        rep = pde_residuals(pair, g, d, grad_floor=1e-6, margin=0.1)
        errs.append(rep.elliptic_sup)
    ratio = errs[0] / errs[1]
    assert errs[1] < 1e-3 and 3.5 < ratio < 4.5


def test_manufactured_parabolic_stationary_2d():
    lam, A = math.sqrt(10.0), 0.05
    u = lambda x, t: 0.1 + 0.5 * x[:, 0] + A * np.exp(lam * x[:, 0])  # noqa: E731
    v = lambda x, t: 0.1 + 0.5 * x[:, 0] - 4 * A * np.exp(lam * x[:, 0])  # noqa: E731
    res = []
    for h in (0.04, 0.02):
        g = build_grid(BALL, h, 4 * h, 0.01)
        d = ProblemData(BALL, Constant(0.0), Constant(0.0), Constant(0.0), 4 * h, 0.01)
        rep = pde_residuals(tabulate_pair(g, u, v), g, d, grad_floor=0.05)
        assert rep.masked_fraction == 0.0
        res.append((rep.parabolic_sup, rep.elliptic_sup))
    assert res[1][0] < res[0][0] / 3 and res[1][1] < res[0][1] / 3
    assert res[1][0] < 5e-3


def test_constant_pair_zero_residual_full_mask():
    g = build_grid(BALL, 0.05, 0.2, 0.08)
    d = ProblemData(BALL, Constant(0.4), Constant(0.4), Constant(0.4), 0.2, 0.08)
    pair = tabulate_pair(g, lambda x, t: 0.4, lambda x, t: 0.4)
    rep = pde_residuals(pair, g, d)
    assert rep.elliptic_sup == 0.0 and rep.masked_fraction == 1.0
    assert np.all(np.isnan(rep.parabolic))


def test_thin_slab_is_geometry_error():
    dom = DomainSpec.box([0.0, 0.0], [1.0, 0.02])
    g = build_grid(dom, 0.01, 0.04, 0.0032)
    d = ProblemData(dom, Constant(0.0), Constant(0.0), Constant(0.0), 0.04, 0.0032)
    pair = tabulate_pair(g, lambda x, t: x[:, 0], lambda x, t: x[:, 0])
    with pytest.raises(GeometryError):
        pde_residuals(pair, g, d, grad_floor=0.1, stride=4)


def test_bad_grad_floor():
    g = build_grid(BALL, 0.05, 0.2, 0.08)
    d = ProblemData(BALL, Constant(0.0), Constant(0.0), Constant(0.0), 0.2, 0.08)
    pair = tabulate_pair(g, lambda x, t: 0.0, lambda x, t: 0.0)
    with pytest.raises(ConfigurationError):
        pde_residuals(pair, g, d, grad_floor=0.0)


def smooth(eps, T=0.12):
    f = Sum((affine([0.1, 0.5, -0.2]), Radial((0.0, 0.0), (0.0, 0.0, 0.4))))
    g = Sum((affine([-0.1, 0.3, 0.2]), Radial((0.0, 0.0), (0.0, 0.0, -0.3))))
    return ProblemData(BALL, f, g, f, eps, T)


def test_comparison_shift_is_exact():
    d = smooth(0.2)
    g = build_grid(BALL, 0.05, 0.2, d.T)
    r = comparison_check(d, d.shifted(1.0), g)
    assert r.ordered
    np.testing.assert_allclose(r.high.u - r.low.u, 1.0, atol=1e-10)
    np.testing.assert_allclose(r.high.v - r.low.v, 1.0, atol=1e-10)


def test_comparison_identical_zero_gap():
    d = smooth(0.2)
    g = build_grid(BALL, 0.05, 0.2, d.T)
    r = comparison_check(d, d, g)
    assert r.ordered and r.worst_u == 0.0 and r.worst_v == 0.0


def test_comparison_boundary_bump_and_negation_symmetry():
    d = smooth(0.2)
    g = build_grid(BALL, 0.05, 0.2, d.T)
    bump = Bump((1.0, 0.0), 0.4, 0.5)
    hi = d.replace(f=d.f + bump, u0=d.u0 + bump)
    r = comparison_check(d, hi, g)
    assert r.ordered and r.worst_u <= 0.0 + 1e-10
    r2 = comparison_check(hi.negated(), d.negated(), g)
    assert r2.ordered == r.ordered


def test_unordered_data_names_node():
    d = smooth(0.2)
    g = build_grid(BALL, 0.05, 0.2, d.T)
    with pytest.raises(ConfigurationError, match="node"):
        check_data_order(d.shifted(0.1), d, g)


def test_convergence_study_affine_exact():
    a = affine([0.0, 1.0, 0.0])
    d = ProblemData(BALL, a, a, a, 0.2, 0.12)
    table = convergence_study(d, [0.2, 0.1], exact=(lambda x, t: x[:, 0], lambda x, t: x[:, 0]), grad_floor=0.5)
    assert table.reference == "exact"
    assert list(table.column("eps")) == [0.2, 0.1]
    for row in table.rows:
        assert row.distance_to_reference <= 10 * row.h * 1.0
        assert row.elliptic_sup <= 1e-6


def test_barrier_and_exterior_center():
    dom = DomainSpec.annulus([0.0, 0.0, 0.0], 0.5, 1.0)
    z = exterior_center(dom, np.array([0.5, 0.0, 0.0]), 0.5)
    assert np.allclose(z, 0.0)
    x = np.array([[0.5, 0.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(barrier(x, z, 0.5, 3), [0.0, 1.0])


def test_estimate_suite_probabilities_in_range():
    d = ProblemData(BALL, Constant(0.0), Constant(0.0), Constant(0.0), 0.05, 1.0)
    suite = boundary_estimate_suite(BALL, d, [0.05], a=0.2, eta=0.1, n=500, r0_list=(0.1,), seed=1)
    assert len(suite.rows) == 2
    for row in suite.rows:
        for p in (row.p_near, row.p_long, row.p_time):
            assert 0.0 <= p <= 1.0
        assert row.se_tau >= 0 and row.n == 500
    assert "tug" in suite.summary()


def test_estimate_suite_rejects_exterior_start():
    d = ProblemData(BALL, Constant(0.0), Constant(0.0), Constant(0.0), 0.05, 1.0)
    with pytest.raises(ConfigurationError):
        boundary_estimate_suite(BALL, d, [0.05], 0.2, 0.1, 10, r0_list=(-0.1,))
