from types import SimpleNamespace

import numpy as np
import pytest

from towgame.data import Bump, Constant, ProblemData, Radial, Sum, affine
from towgame.dpp import (
    ball_average,
    default_max_iter,
    dpp_residual,
    half_sup_inf,
    predicted_iterations,
    solve_dpp,
    solve_slice,
)
from towgame.errors import ConvergenceError, NumericError
from towgame.geometry import DomainSpec, build_grid

from oracles import dense_march

BALL2 = DomainSpec.ball([0.0, 0.0], 1.0)


def smooth_data(eps, T, K=1.0, domain=BALL2):
    f = Sum((affine([0.1, 0.5, -0.2]), Radial((0.0, 0.0), (0.0, 0.0, 0.4))))
    g = Sum((affine([-0.1, 0.3, 0.2]), Radial((0.0, 0.0), (0.0, 0.0, -0.3))))
    return ProblemData(domain, f, g, f, eps, T, K)


def test_three_point_stencil_examples():
    eps = 0.1
    grid = SimpleNamespace(neighbors=np.array([[1, 0, 2]]))
    sl = np.array([0.0, -eps, eps]) ** 2
    assert half_sup_inf(grid, sl)[0] == pytest.approx(eps**2 / 2)
    assert ball_average(grid, sl)[0] == pytest.approx(2 * eps**2 / 3)
    const = np.full(3, 4.2)
    assert half_sup_inf(grid, const)[0] == 4.2 and ball_average(grid, const)[0] == 4.2


def test_constant_data_exact_one_iteration():
    c = Constant(-0.35)
    d = ProblemData(BALL2, c, c, c, 0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    p = solve_dpp(d, g)
    assert np.abs(p.u + 0.35).max() <= 1e-15 and np.abs(p.v + 0.35).max() <= 1e-15
    assert all(s.iterations <= 2 for s in p.meta)


def test_affine_stationary_on_symmetric_nodes():
    a = affine([0.0, 1.0, 0.0])
    d = ProblemData(BALL2, a, a, a, 0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    p = solve_dpp(d, g, tol=1e-12)
    x1 = g.coords[:, 0]
    far = np.flatnonzero(g.far_interior)
    assert np.abs(p.u[:, far] - x1[far]).max() <= 1e-10
    assert np.abs(p.v[:, far] - x1[far]).max() <= 1e-10
    # near the boundary the lattice ball is still symmetric here, so everything is exact
    assert np.abs(p.u - x1).max() <= 10 * g.h * 1.0


@pytest.mark.parametrize("dim", [1, 2])
def test_matches_dense_oracle(dim):
    if dim == 1:
        dom = DomainSpec.ball([0.5], 0.5)
        eps, h = 0.2, 0.05
        d = ProblemData(dom, affine([0.2, 1.0], 0.5), Radial((0.5,), (0.0, 0.0, 1.0)), affine([0.2, 1.0], 0.5), eps, 0.12)
    else:
        dom = DomainSpec.ball([0.0, 0.0], 0.2)
        eps, h = 0.2, 0.05
        d = smooth_data(eps, 0.12, domain=dom)
    g = build_grid(dom, h, eps, d.T)
    assert g.n_interior <= 50
    tol = 1e-10
    p = solve_dpp(d, g, tol=tol)
    u, v = dense_march(d, g)
    assert np.abs(p.u - u).max() <= 10 * tol
    assert np.abs(p.v - v).max() <= 10 * tol


def test_oracle_with_K():
    dom = DomainSpec.ball([0.0], 1.0)
    d = smooth_data(0.2, 0.12, K=3.0, domain=dom)
    d = d.replace(f=affine([0.1, 0.5]), g=Radial((0.0,), (0.0, 0.0, -0.3)), u0=affine([0.1, 0.5]))
    g = build_grid(dom, 0.05, 0.2, 0.12)
    p = solve_dpp(d, g, tol=1e-11)
    u, v = dense_march(d, g)
    assert np.abs(p.u - u).max() <= 1e-9 and np.abs(p.v - v).max() <= 1e-9
    res = dpp_residual(p, d, g)
    assert res.u_residual <= 1e-10 and res.v_residual <= 1e-9


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_contraction_ratio_and_iteration_count(eps):
    d = smooth_data(eps, 2 * eps**2)
    g = build_grid(BALL2, eps / 4, eps, d.T)
    p = solve_dpp(d, g, tol=1e-9)
    bound = 1 / (1 + eps**2)
    for s in p.meta:
        assert s.max_ratio <= bound + 1e-6
        pred = predicted_iterations(1e-9, s.first_increment, eps)
        assert s.iterations <= 2 * pred + 1


def test_residual_after_tight_solve():
    d = smooth_data(0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    p = solve_dpp(d, g, tol=1e-10)
    r = dpp_residual(p, d, g)
    assert r.u_residual <= 1e-9 and r.v_residual <= 1e-9


def test_residual_detects_perturbation():
    c = Constant(1.0)
    d = ProblemData(BALL2, c, c, c, 0.2, 0.08)
    g = build_grid(BALL2, 0.05, 0.2, 0.08)
    p = solve_dpp(d, g)
    assert dpp_residual(p, d, g).u_residual == 0.0
    node = int(np.flatnonzero(g.far_interior)[0])
    delta = 1e-3
    p.u[1, node] += delta
    r = dpp_residual(p, d, g)
    assert r.u_residual >= delta * (1 - 0.04) - 1e-15
    assert r.worst_u[0] in (1, 2)


def test_monotone_in_data():
    lo = smooth_data(0.2, 0.2)
    bump = Bump((1.0, 0.0), 0.5, 0.3)
    hi = lo.replace(f=lo.f + bump, g=lo.g + bump, u0=lo.u0 + bump)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    a = solve_dpp(lo, g, tol=1e-13)
    b = solve_dpp(hi, g, tol=1e-13)
    assert np.all(a.u <= b.u + 1e-10) and np.all(a.v <= b.v + 1e-10)


def test_uniform_bound():
    d = smooth_data(0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    p = solve_dpp(d, g)
    C = d.sup_norm(g)
    assert np.abs(p.u).max() <= C + 1e-12 and np.abs(p.v).max() <= C + 1e-12


def test_collar_and_initial_values():
    d = smooth_data(0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    p = solve_dpp(d, g)
    n = g.n_interior
    for m in range(1, g.M + 1):
        assert np.array_equal(p.u[m, n:], d.f(g.collar_coords, g.times[m]))
        assert np.array_equal(p.v[m, n:], d.g(g.collar_coords, g.times[m]))
    assert np.array_equal(p.u[0, :n], d.u0(g.interior_coords))


def test_gauss_seidel_and_threads_agree():
    d = smooth_data(0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    a = solve_dpp(d, g, tol=1e-11)
    b = solve_dpp(d, g, tol=1e-11, scheme="gauss_seidel")
    c = solve_dpp(d, g, tol=1e-11, threads=3)
    assert np.abs(a.u - b.u).max() <= 1e-8
    assert np.array_equal(a.u, c.u) and np.array_equal(a.v, c.v)


def test_iteration_cap_reports_level():
    d = smooth_data(0.1, 0.03)
    g = build_grid(BALL2, 0.025, 0.1, 0.03)
    with pytest.raises(ConvergenceError) as exc:
        solve_dpp(d, g, tol=1e-12, max_iter=3)
    assert exc.value.level == 1 and "slice 1" in str(exc.value)
    assert exc.value.residual > 1e-12


def test_nonfinite_input_is_numeric_error():
    d = smooth_data(0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    u_prev = np.zeros(g.n_nodes)
    u_prev[3] = np.nan
    with pytest.raises(NumericError):
        solve_slice(u_prev, d, g, np.zeros(g.n_interior), 1e-8, 1)


def test_default_cap_formula():
    assert default_max_iter(1e-8, 0.1) == 10 * int(np.ceil(abs(np.log(1e-8)) / 0.01))


def test_deterministic_bits():
    d = smooth_data(0.2, 0.2)
    g = build_grid(BALL2, 0.05, 0.2, 0.2)
    a, b = solve_dpp(d, g), solve_dpp(d, g)
    assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
