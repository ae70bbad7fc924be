import numpy as np
import pytest

from towgame.errors import ConfigurationError, CoverageError
from towgame.geometry import DomainSpec, PointClass, build_grid, classify_point, stencil_offsets, time_levels

from oracles import brute_lattice, brute_stencil


def test_1d_example_grid():
    g = build_grid(DomainSpec.ball([0.0], 1.0), 0.1, 0.4, 0.32)
    inner = np.sort(g.interior_coords[:, 0])
    np.testing.assert_allclose(inner, np.round(np.arange(-9, 10) * 0.1, 12), atol=1e-12)
    col = np.sort(g.collar_coords[:, 0])
    expect = np.concatenate([np.arange(-14, -9), np.arange(10, 15)]) * 0.1
    np.testing.assert_allclose(col, expect, atol=1e-12)
    np.testing.assert_allclose(g.times, [0.0, 0.16, 0.32], atol=1e-15)
    assert not g.clamped


@pytest.mark.parametrize("dim,ratio", [(1, 4), (2, 4), (2, 5.5), (3, 4)])
def test_stencil_matches_brute_force(dim, ratio):
    got = sorted(map(tuple, stencil_offsets(dim, ratio).tolist()))
    assert got == brute_stencil(dim, ratio)
    first = stencil_offsets(dim, ratio)[0]
    assert np.all(first == 0)


def test_box_grid_matches_brute_force_scan():
    spec = DomainSpec.box([0.0, 0.0], [1.0, 1.0])
    g = build_grid(spec, 0.05, 0.2, 0.1)
    inner, collar = brute_lattice(spec.contains, spec.distance, spec.lo, spec.hi, 0.05, 0.2)
    assert g.n_interior == len(inner)
    assert g.n_collar == len(collar)
    assert sorted(map(tuple, g.index[: g.n_interior].tolist())) == inner
    assert sorted(map(tuple, g.index[g.n_interior :].tolist())) == collar


def test_annulus_grid_matches_brute_force_scan():
    spec = DomainSpec.annulus([0.0, 0.0], 0.3, 0.8)
    g = build_grid(spec, 0.05, 0.2, 0.1)
    lo, hi = spec.bounding_box()
    inner, collar = brute_lattice(spec.contains, spec.distance, lo, hi, 0.05, 0.2)
    assert g.n_interior == len(inner) and g.n_collar == len(collar)


def test_far_interior_stencils_symmetric():
    g = build_grid(DomainSpec.ball([0.0, 0.0], 1.0), 0.05, 0.2, 0.04)
    far = np.flatnonzero(g.far_interior)
    assert far.size > 0
    for i in far[::37]:
        pts = {tuple(p) for p in (g.index[g.neighbors[i]] - g.index[i]).tolist()}
        assert all(tuple(-np.asarray(p)) in pts for p in pts)
        assert (0, 0) in pts


def test_every_stencil_contains_its_node():
    g = build_grid(DomainSpec.ball([0.1, -0.2], 0.7), 0.04, 0.16, 0.05)
    assert np.all(g.neighbors[:, 0] == np.arange(g.n_interior))
    assert np.all(g.neighbors >= 0)


def test_collar_covers_one_step_from_interior():
    spec = DomainSpec.ball([0.0, 0.0], 0.6)
    g = build_grid(spec, 0.05, 0.2, 0.04)
    rng = np.random.default_rng(3)
    x = g.interior_coords[rng.integers(0, g.n_interior, 500)]
    d = rng.normal(size=x.shape)
    d *= (0.2 * rng.uniform(size=(len(x), 1)) ** 0.5) / np.linalg.norm(d, axis=1, keepdims=True)
    g.interpolate(np.zeros(g.n_nodes), x + d)  # raises CoverageError if any corner is missing


def test_h_ratio_violation_names_ratio():
    with pytest.raises(ConfigurationError, match="ratio"):
        build_grid(DomainSpec.ball([0.0], 1.0), 0.2, 0.4, 0.1)


def test_empty_interior_rejected():
    with pytest.raises(ConfigurationError):
        build_grid(DomainSpec.ball([0.05, 0.05], 0.01), 0.1, 0.4, 0.1)


def test_refinement_keeps_interior_nodes():
    spec = DomainSpec.ball([0.0, 0.0], 1.0)
    coarse = build_grid(spec, 0.1, 0.4, 0.1)
    fine = build_grid(spec, 0.05, 0.4, 0.1)
    fine_set = {tuple(p) for p in fine.index[: fine.n_interior].tolist()}
    assert all(tuple(2 * np.asarray(p)) in fine_set for p in coarse.index[: coarse.n_interior].tolist())


def test_time_levels_clamp():
    t, clamped = time_levels(0.2, 0.1)
    assert clamped and t[-1] == 0.1 and len(t) == 4
    t, clamped = time_levels(0.1, 0.05)
    assert not clamped and len(t) == 6


def test_classify_point_examples():
    g = build_grid(DomainSpec.ball([0.0, 0.0], 1.0), 0.05, 0.2, 0.4)
    assert classify_point(g, [0.0, 0.0], 0.4) is PointClass.INTERIOR
    assert classify_point(g, [1.1, 0.0], 0.2) is PointClass.LATERAL
    assert classify_point(g, [0.3, 0.1], 0.0) is PointClass.TIME
    assert classify_point(g, [3.0, 0.0], 0.0) is PointClass.TIME


def test_interpolate_reproduces_affine_and_rejects_uncovered():
    g = build_grid(DomainSpec.ball([0.0, 0.0], 1.0), 0.05, 0.2, 0.04)
    vals = 0.3 + 2.0 * g.coords[:, 0] - g.coords[:, 1]
    pts = np.array([[0.013, -0.271], [0.5, 0.5], [-0.99, 0.0]])
    np.testing.assert_allclose(g.interpolate(vals, pts), 0.3 + 2 * pts[:, 0] - pts[:, 1], atol=1e-13)
    with pytest.raises(CoverageError):
        g.interpolate(vals, np.array([[1.5, 0.0]]))


def test_stencil_interpolate_matches_pointwise():
    g = build_grid(DomainSpec.ball([0.0, 0.0], 1.0), 0.05, 0.2, 0.12)
    rng = np.random.default_rng(2)
    vals = rng.normal(size=(g.M + 1, g.n_nodes))
    x = rng.uniform(-0.5, 0.5, size=(30, 2))
    lev = rng.integers(0, g.M + 1, 30)
    got = g.stencil_interpolate(vals, x, lev)
    pts = x[:, None, :] + g.offsets[None] * g.h
    ref = g.interpolate(vals, pts, levels=np.broadcast_to(lev[:, None], pts.shape[:2]))
    np.testing.assert_allclose(got, ref, atol=1e-12)
    with pytest.raises(CoverageError):
        g.stencil_interpolate(vals, np.array([[1.2, 0.0]]), 1)


def test_report_lists_counts():
    g = build_grid(DomainSpec.ball([0.0], 1.0), 0.1, 0.4, 0.32)
    rep = g.report()
    assert "interior 19" in rep and "collar 10" in rep
