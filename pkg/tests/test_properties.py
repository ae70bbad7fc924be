"""Property-based checks of the DPP operators on small 1D problems."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from towgame.data import Bump, ProblemData, Radial, Sum, affine
from towgame.dpp import ball_average, half_sup_inf, solve_dpp
from towgame.geometry import DomainSpec, build_grid

DOM = DomainSpec.ball([0.0], 0.5)
EPS, H, T = 0.2, 0.05, 0.08
GRID = build_grid(DOM, H, EPS, T)

coef = st.floats(-1.0, 1.0, allow_nan=False)


def make(a, b, c, d, e):
    f = Sum((affine([a, b]), Radial((0.0,), (0.0, 0.0, c))))
    g = Sum((affine([d, e]), Radial((0.0,), (0.0, 0.0, -c))))
    return ProblemData(DOM, f, g, f, EPS, T)


arrays = st.lists(st.floats(-5, 5, allow_nan=False), min_size=GRID.n_nodes, max_size=GRID.n_nodes).map(np.array)


@settings(max_examples=40, deadline=None)
@given(arrays, st.lists(st.floats(0, 3, allow_nan=False), min_size=GRID.n_nodes, max_size=GRID.n_nodes))
def test_operators_monotone(u, bump):
    w = u + np.array(bump)
    assert np.all(half_sup_inf(GRID, u) <= half_sup_inf(GRID, w) + 1e-12)
    assert np.all(ball_average(GRID, u) <= ball_average(GRID, w) + 1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays, st.floats(-3, 3, allow_nan=False))
def test_operators_commute_with_constants(u, c):
    np.testing.assert_allclose(half_sup_inf(GRID, u + c), half_sup_inf(GRID, u) + c, atol=1e-12)
    np.testing.assert_allclose(ball_average(GRID, u + c), ball_average(GRID, u) + c, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(coef, coef, coef, coef, coef, st.floats(-2, 2, allow_nan=False))
def test_shift_invariance(a, b, c, d, e, s):
    data = make(a, b, c, d, e)
    p = solve_dpp(data, GRID, tol=1e-13)
    q = solve_dpp(data.shifted(s), GRID, tol=1e-13)
    np.testing.assert_allclose(q.u - p.u, s, atol=1e-9)
    np.testing.assert_allclose(q.v - p.v, s, atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(coef, coef, coef, coef, coef)
def test_uniform_bound(a, b, c, d, e):
    data = make(a, b, c, d, e)
    p = solve_dpp(data, GRID, tol=1e-12)
    C = data.sup_norm(GRID)
    assert np.abs(p.u).max() <= C + 1e-12 and np.abs(p.v).max() <= C + 1e-12


@settings(max_examples=15, deadline=None)
@given(coef, coef, coef, coef, coef, st.floats(0.0, 1.0), st.floats(-0.6, 0.6))
def test_monotone_in_boundary_data(a, b, c, d, e, height, center):
    lo = make(a, b, c, d, e)
    bump = Bump((center,), 0.3, height)
    hi = lo.replace(f=lo.f + bump, g=lo.g + bump, u0=lo.u0 + bump)
    p = solve_dpp(lo, GRID, tol=1e-13)
    q = solve_dpp(hi, GRID, tol=1e-13)
    assert np.all(p.u <= q.u + 1e-10) and np.all(p.v <= q.v + 1e-10)
