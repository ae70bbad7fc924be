"""Diagnostics for the lattice game values.

* ``kappa`` is the ball second-moment constant relating ball averages to the
  Laplacian.
* ``pde_residuals`` plugs a value pair into the limit system
  ``u_t - 1/2 Lap_inf u + u - v = 0`` and ``-(kappa/2K) Lap v + v - u = 0``.
* ``convergence_study`` compares runs at several ``eps``.
* ``boundary_estimate_suite`` collects exit statistics near a boundary point.
* ``comparison_check`` tests monotonicity in the data.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import Constant, ProblemData
from .dpp import ValuePair, solve_dpp
from .errors import ConfigurationError, GeometryError
from .game import GameRules, GameState, estimate_value, mean_and_stderr
from .geometry import DomainSpec, SpaceTimeGrid, build_grid, classify_points, INTERIOR
from .strategies import PullToward, RandomStrategy, Strategy, StayStrategy, PushAway

log = logging.getLogger(__name__)


def kappa(N: int) -> float:
    """``(1/|B_1|) * int_{B_1} z_j^2 dz = 1/(N+2)``."""
    if int(N) != N or N < 1:
        raise ConfigurationError(f"dimension must be a positive integer, got {N}", "dim")
    return 1.0 / (int(N) + 2)


# ---------------------------------------------------------------- residuals


@dataclass
class ResidualReport:
    """Pointwise residuals of the limit system on evaluable interior nodes.

    ``parabolic`` and ``elliptic`` are ``(levels, nodes)`` arrays aligned with
    ``levels`` and ``nodes``; masked parabolic entries (small gradient) are NaN.
    """

    parabolic: np.ndarray
    elliptic: np.ndarray
    mask: np.ndarray  # True where Lap_inf was skipped
    nodes: np.ndarray
    levels: np.ndarray
    times: np.ndarray
    coords: np.ndarray
    grad_floor: float
    kappa: float
    K: float

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean()) if self.mask.size else 0.0

    def _norms(self, arr):
        vals = arr[np.isfinite(arr)]
        if vals.size == 0:
            return 0.0, 0.0
        return float(vals.max()), float(vals.mean())

    @property
    def parabolic_sup(self) -> float:
        return self._norms(self.parabolic)[0]

    @property
    def parabolic_mean(self) -> float:
        return self._norms(self.parabolic)[1]

    @property
    def elliptic_sup(self) -> float:
        return self._norms(self.elliptic)[0]

    @property
    def elliptic_mean(self) -> float:
        return self._norms(self.elliptic)[1]

    def summary(self) -> dict:
        return {
            "parabolic_sup": self.parabolic_sup,
            "parabolic_mean": self.parabolic_mean,
            "elliptic_sup": self.elliptic_sup,
            "elliptic_mean": self.elliptic_mean,
            "masked_fraction": self.masked_fraction,
            "evaluated_nodes": int(len(self.nodes)),
            "levels": int(len(self.levels)),
            "grad_floor": self.grad_floor,
            "kappa": self.kappa,
            "K": self.K,
        }

    def per_level(self) -> list[dict]:
        rows = []
        for i, (m, t) in enumerate(zip(self.levels, self.times)):
            p, e = self.parabolic[i], self.elliptic[i]
            pf = p[np.isfinite(p)]
            rows.append({
                "level": int(m),
                "t": float(t),
                "parabolic_sup": float(pf.max()) if pf.size else 0.0,
                "parabolic_mean": float(pf.mean()) if pf.size else 0.0,
                "elliptic_sup": float(e.max()) if e.size else 0.0,
                "elliptic_mean": float(e.mean()) if e.size else 0.0,
                "masked_fraction": float(self.mask[i].mean()) if self.mask[i].size else 0.0,
            })
        return rows


def _difference_stencils(grid: SpaceTimeGrid, nodes: np.ndarray, stride: int = 1):
    """Neighbor ids for central first/second differences; -1 where missing."""
    N = grid.dim
    base = grid.index[nodes]
    eye = int(stride) * np.eye(N, dtype=np.int64)
    plus = np.stack([grid.node_id(base + eye[k]) for k in range(N)], axis=1)
    minus = np.stack([grid.node_id(base - eye[k]) for k in range(N)], axis=1)
    cross = {}
    for k, l in itertools.combinations(range(N), 2):
        cross[k, l] = np.stack(
            [grid.node_id(base + sk * eye[k] + sl * eye[l]) for sk, sl in ((1, 1), (1, -1), (-1, 1), (-1, -1))],
            axis=1,
        )
    return plus, minus, cross


def evaluable_nodes(grid: SpaceTimeGrid, margin: float = 0.0, stride: int = 1) -> np.ndarray:
    """Interior nodes whose whole central-difference stencil is interior and
    that lie at least ``margin`` from the boundary."""
    nodes = np.arange(grid.n_interior)
    if margin > 0:
        nodes = nodes[grid.spec.boundary_distance(grid.interior_coords) >= margin]
    if nodes.size == 0:
        return nodes
    plus, minus, cross = _difference_stencils(grid, nodes, stride)
    ids = [plus, minus] + list(cross.values())
    ok = np.ones(len(nodes), dtype=bool)
    for a in ids:
        ok &= np.all((a >= 0) & (a < grid.n_interior), axis=1)
    return nodes[ok]


def pde_residuals(
    pair: ValuePair,
    grid: SpaceTimeGrid,
    data: ProblemData,
    grad_floor: float | None = None,
    margin: float = 0.0,
    t_min: float = 0.0,
    stride: int = 1,
) -> ResidualReport:
    """Finite-difference residuals of the limit system at levels ``m >= 1``.

    Space derivatives are central differences with spacing ``h`` at level
    ``m``; the time derivative is the backward difference over one level.
    ``Lap_inf u`` is skipped (masked) where ``|grad u| <= grad_floor``; the
    default floor is ``10 h L`` with ``L`` the largest data Lipschitz constant.
    """
    if grad_floor is None:
        L = max(data.lipschitz(grid).values())
        grad_floor = 10.0 * grid.h * L
    elif not grad_floor > 0:
        raise ConfigurationError("grad_floor must be positive", "grad_floor")
    if int(stride) != stride or stride < 1:
        raise ConfigurationError("difference stride must be a positive integer", "residuals.stride")
    nodes = evaluable_nodes(grid, margin, stride)
    if nodes.size == 0:
        raise GeometryError("no interior node has a full central-difference stencil (slab too thin)")
    levels = np.arange(1, pair.M + 1)
    levels = levels[pair.times[levels] >= t_min - 1e-12]
    step = stride * grid.h
    h2 = step**2
    N = grid.dim
    kap = kappa(N)
    K = data.K
    plus, minus, cross = _difference_stencils(grid, nodes, stride)

    par = np.full((len(levels), len(nodes)), np.nan)
    ell = np.empty((len(levels), len(nodes)))
    mask = np.zeros((len(levels), len(nodes)), dtype=bool)
    for i, m in enumerate(levels):
        u, v = pair.u[m], pair.v[m]
        dt = pair.times[m] - pair.times[m - 1]
        uc, vc = u[nodes], v[nodes]
        grad = (u[plus] - u[minus]) / (2 * step)
        hess = np.empty((len(nodes), N, N))
        lap_v = np.zeros(len(nodes))
        for k in range(N):
            hess[:, k, k] = (u[plus[:, k]] - 2 * uc + u[minus[:, k]]) / h2
            lap_v += (v[plus[:, k]] - 2 * vc + v[minus[:, k]]) / h2
        for (k, l), c in cross.items():
            val = (u[c[:, 0]] - u[c[:, 1]] - u[c[:, 2]] + u[c[:, 3]]) / (4 * h2)
            hess[:, k, l] = hess[:, l, k] = val
        g2 = np.einsum("ij,ij->i", grad, grad)
        ok = np.sqrt(g2) > grad_floor
        mask[i] = ~ok
        lap_inf = np.einsum("ij,ijk,ik->i", grad[ok], hess[ok], grad[ok]) / g2[ok]
        ut = (uc - pair.u[m - 1][nodes]) / dt
        par[i, ok] = np.abs(ut[ok] - 0.5 * lap_inf + uc[ok] - vc[ok])
        ell[i] = np.abs(-(kap / (2 * K)) * lap_v + vc - uc)
    return ResidualReport(
        parabolic=par,
        elliptic=ell,
        mask=mask,
        nodes=nodes,
        levels=levels,
        times=pair.times[levels],
        coords=grid.coords[nodes],
        grad_floor=float(grad_floor),
        kappa=kap,
        K=K,
    )


def tabulate_pair(grid: SpaceTimeGrid, u_fn, v_fn, K: float = 1.0) -> ValuePair:
    """``ValuePair`` sampled from callables ``u_fn(x, t)``, ``v_fn(x, t)`` on every node and level."""
    x = grid.coords
    u = np.stack([np.asarray(u_fn(x, t), dtype=float) * np.ones(len(x)) for t in grid.times])
    v = np.stack([np.asarray(v_fn(x, t), dtype=float) * np.ones(len(x)) for t in grid.times])
    return ValuePair(u, v, grid.eps, grid.h, K, grid.times.copy(), grid.coords.copy(), grid.n_interior)


# -------------------------------------------------------------- convergence


@dataclass
class ConvergenceRow:
    eps: float
    h: float
    nodes: int
    levels: int
    distance_to_reference: float
    distance_to_previous: float
    parabolic_sup: float
    parabolic_mean: float
    elliptic_sup: float
    elliptic_mean: float
    masked_fraction: float
    runtime: float


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    reference: str  # "exact" or "finest run (self-convergence)"
    compare_times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.rows.sort(key=lambda r: -r.eps)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def summary(self) -> str:
        head = f"reference: {self.reference}\n"
        head += f"{'eps':>8} {'h':>9} {'nodes':>7} {'d_ref':>10} {'d_prev':>10} {'par_sup':>10} {'ell_sup':>10} {'sec':>7}\n"
        for r in self.rows:
            head += (
                f"{r.eps:8.4f} {r.h:9.5f} {r.nodes:7d} {r.distance_to_reference:10.3e} "
                f"{r.distance_to_previous:10.3e} {r.parabolic_sup:10.3e} {r.elliptic_sup:10.3e} {r.runtime:7.2f}\n"
            )
        return head


def _at_time(pair: ValuePair, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Node values at time ``t``, linear in time between bracketing levels."""
    j = int(np.searchsorted(pair.times, t - 1e-12))
    j = min(max(j, 0), pair.M)
    if abs(pair.times[j] - t) <= 1e-9 * pair.eps**2 or j == 0:
        return pair.u[j], pair.v[j]
    a, b = pair.times[j - 1], pair.times[j]
    w = (t - a) / (b - a)
    return (1 - w) * pair.u[j - 1] + w * pair.u[j], (1 - w) * pair.v[j - 1] + w * pair.v[j]


def field_distance(
    pairs: list[tuple[ValuePair, SpaceTimeGrid]],
    target: SpaceTimeGrid,
    times: np.ndarray,
    margin: float = 0.0,
    exact=None,
) -> list[float]:
    """Sup over ``times`` and target interior nodes of ``max(|u - u_ref|, |v - v_ref|)``.

    Every pair is interpolated onto the target grid's interior nodes.  The
    reference is ``exact`` (a pair of callables) if given, otherwise the last
    pair in ``pairs``.
    """
    pts = target.interior_coords
    if margin > 0:
        pts = pts[target.spec.boundary_distance(pts) >= margin]
    out = []
    for t in times:
        vals = []
        for pair, grid in pairs:
            u, v = _at_time(pair, t)
            vals.append((grid.interpolate(u, pts), grid.interpolate(v, pts)))
        if exact is not None:
            ref = (np.asarray(exact[0](pts, t)) * np.ones(len(pts)), np.asarray(exact[1](pts, t)) * np.ones(len(pts)))
            cand = vals
        else:
            ref, cand = vals[-1], vals[:-1]
        out.append([max(np.abs(a - ref[0]).max(), np.abs(b - ref[1]).max()) for a, b in cand])
    return list(np.max(np.array(out), axis=0)) if out else []


def convergence_study(
    data: ProblemData,
    eps_list,
    h_ratio: float = 4.0,
    tol: float = 1e-10,
    exact=None,
    margin: float = 0.0,
    residual_margin: float | None = None,
    t_min: float = 0.0,
    grad_floor: float | None = None,
    stride="eps",
    scheme: str = "jacobi",
    threads: int = 1,
    keep: bool = False,
):
    """Solve at each ``eps`` (``h = eps / h_ratio``) and tabulate distances and residuals.

    Distances are measured on the finest run's interior nodes at the coarsest
    run's positive time levels.  Without ``exact`` the finest run is the
    reference (self-convergence); ``distance_to_previous`` is always the gap to
    the next coarser run.

    Residual differences use spacing ``stride * h``; the default ``"eps"``
    picks ``stride = round(eps / h)``.  Lattice sup/inf moves always span a
    whole stencil radius, so ``u`` carries an ``eps``-periodic ripple that
    spacing-``h`` second differences amplify by ``(eps/h)^2``.
    """
    eps_sorted = sorted({float(e) for e in eps_list}, reverse=True)
    if not eps_sorted:
        raise ConfigurationError("empty eps list", "converge.eps_list")
    runs = []
    for e in eps_sorted:
        d = data.replace(eps=e)
        g = build_grid(d.domain, e / h_ratio, e, d.T)
        t0 = time.perf_counter()
        p = solve_dpp(d, g, tol=tol, scheme=scheme, threads=threads)
        wall = time.perf_counter() - t0
        st = max(1, round(h_ratio)) if stride == "eps" else int(stride)
        rep = pde_residuals(p, g, d, grad_floor, margin if residual_margin is None else residual_margin, t_min, st)
        runs.append((d, g, p, rep, wall))
        log.info("eps=%g: %d nodes, %.2fs", e, g.n_nodes, wall)
    finest = runs[-1][1]
    times = runs[0][2].times[1:]
    times = times[times >= t_min - 1e-12]

    if exact is not None:
        d_ref = field_distance([(r[2], r[1]) for r in runs], finest, times, margin, exact)
    else:
        d_ref = field_distance([(r[2], r[1]) for r in runs], finest, times, margin) + [0.0]
    d_prev = [float("nan")]
    for a, b in zip(runs[:-1], runs[1:]):
        d_prev.append(field_distance([(a[2], a[1]), (b[2], b[1])], finest, times, margin)[0])

    rows = [
        ConvergenceRow(
            eps=d.eps, h=g.h, nodes=g.n_nodes, levels=g.M,
            distance_to_reference=float(dr), distance_to_previous=float(dp),
            parabolic_sup=rep.parabolic_sup, parabolic_mean=rep.parabolic_mean,
            elliptic_sup=rep.elliptic_sup, elliptic_mean=rep.elliptic_mean,
            masked_fraction=rep.masked_fraction, runtime=wall,
        )
        for (d, g, p, rep, wall), dr, dp in zip(runs, d_ref, d_prev)
    ]
    table = ConvergenceTable(rows, "exact" if exact is not None else "finest run (self-convergence)", times)
    if keep:
        return table, runs
    return table


# ------------------------------------------------------ boundary estimates


def exterior_center(domain: DomainSpec, y, theta: float) -> np.ndarray:
    """Center of a ball of radius ``theta`` touching the closure of the domain only at ``y``."""
    if domain.kind == "annulus":
        return np.asarray(domain.center, dtype=float)
    n = domain.outward_normal(np.asarray(y, dtype=float))
    return np.asarray(y, dtype=float) + theta * n


def barrier(x, z, theta: float, dim: int) -> np.ndarray:
    """Radial harmonic function vanishing on ``|x - z| = theta``, increasing in ``|x - z|``."""
    r = np.linalg.norm(np.atleast_2d(x) - z, axis=1)
    if dim == 1:
        return r - theta
    if dim == 2:
        return np.log(r / theta)
    return theta ** (2 - dim) - r ** (2 - dim)


@dataclass
class EstimateRow:
    game: str  # "tug" (board 1, pull) or "walk" (board 2, random)
    eps: float
    r0: float
    n: int
    mean_tau: float
    se_tau: float
    tau_bound: float  # 4 r0^2 / eps^2
    tau_ratio: float  # E[tau] eps^2 / r0^2
    mean_dist2: float
    se_dist2: float
    dist2_bound: float  # 2 r0^2
    dist2_ratio: float  # E|x_tau - y|^2 / r0^2
    p_near: float  # P(|x_tau - y| < a)
    p_long: float  # P(tau >= a / (2 eps^2))
    p_time: float  # P(|t_tau - t0| < a)
    mu_mean: float = float("nan")
    mu_se: float = float("nan")
    mu_start: float = float("nan")

    @property
    def mu_z(self) -> float:
        if math.isnan(self.mu_mean):
            return float("nan")
        if not self.mu_se > 0:
            return 0.0 if self.mu_mean == self.mu_start else float("inf")
        return (self.mu_mean - self.mu_start) / self.mu_se


@dataclass
class EstimateSuite:
    rows: list[EstimateRow]
    a: float
    eta: float
    y: np.ndarray
    opponent: str

    def summary(self) -> str:
        out = [f"target y={self.y.tolist()} a={self.a} eta={self.eta} opponent={self.opponent}"]
        for r in self.rows:
            s = (
                f"{r.game:4s} eps={r.eps:g} r0={r.r0:g}: E[tau]={r.mean_tau:.4g}+-{r.se_tau:.2g} "
                f"(bound {r.tau_bound:.4g}), E|x-y|^2={r.mean_dist2:.3g}+-{r.se_dist2:.2g} (bound {r.dist2_bound:.3g}), "
                f"P(near)={r.p_near:.4f} P(long)={r.p_long:.4f}"
            )
            if r.game == "walk":
                s += f", E[mu]={r.mu_mean:.5g}+-{r.mu_se:.2g} vs mu(x0)={r.mu_start:.5g}"
            out.append(s)
        return "\n".join(out)


def _opponent(name: str, y) -> Strategy:
    if name == "random":
        return RandomStrategy()
    if name == "pull":
        return PullToward(y)
    if name == "push":
        return PushAway(y)
    if name == "stay":
        return StayStrategy()
    raise ConfigurationError(f"unknown opponent {name!r}", "estimates.opponent")


def boundary_estimate_suite(
    domain: DomainSpec,
    data: ProblemData | None,
    eps_list,
    a: float,
    eta: float,
    n: int,
    r0_list=(0.02, 0.05),
    y=None,
    opponent: str = "random",
    seed: int = 0,
    t0: float | None = None,
    theta: float | None = None,
    walk: bool = True,
    threads: int = 1,
    block_size: int = 4096,
) -> EstimateSuite:
    """Exit statistics from ``x0 = y - r0 * normal(y)`` for each ``eps`` and ``r0``.

    Board 1: player I pulls toward ``y``; ``opponent`` names player II's
    strategy.  Board switches are suppressed in both games so each board is
    studied on its own.  ``t0`` defaults to a horizon long enough that time
    never runs out first (``4 * max(r0)^2 / min(eps)^2`` plays, at least 10^4).
    Board 2: pure random walk at frozen time, with the barrier mean tracked.
    """
    dim = domain.dim
    if y is None:
        y = _default_target(domain)
    y = np.asarray(y, dtype=float)
    if y.shape != (dim,):
        raise ConfigurationError(f"target has dimension {y.size}, domain has {dim}", "estimates.target")
    if data is None:
        zero = Constant(0.0)
        data = ProblemData(domain, zero, zero, zero, float(max(eps_list)), 1.0)
    normal = domain.outward_normal(y)
    if theta is None:
        theta = domain.r_in if domain.kind == "annulus" else 0.5
    z = exterior_center(domain, y, theta)
    rows = []
    for eps in eps_list:
        eps = float(eps)
        horizon = t0
        if horizon is None:
            plays = max(10**4, math.ceil(40 * max(r0_list) ** 2 / eps**2))
            horizon = plays * eps**2
        d = data.replace(eps=eps, T=max(data.T, horizon))
        for r0 in r0_list:
            x0 = y - r0 * normal
            if classify_points(domain, x0[None], horizon, eps)[0] != INTERIOR:
                raise ConfigurationError(f"start point {x0.tolist()} is not interior", "estimates.r0")
            games = [("tug", 1, PullToward(y), _opponent(opponent, y), GameRules(eps, d.K, switch1=0.0))]
            if walk:
                games.append(("walk", 2, StayStrategy(), StayStrategy(), GameRules(eps, d.K, switch2=0.0)))
            for name, board, sI, sII, rules in games:
                res = estimate_value(
                    GameState(x0, horizon, board), sI, sII, n, seed, d, rules, block_size=block_size, threads=threads
                )
                tau = res.steps.astype(float)
                dist2 = np.einsum("ij,ij->i", res.exit_x - y, res.exit_x - y)
                mt, st = mean_and_stderr(tau)
                md, sd = mean_and_stderr(dist2)
                row = EstimateRow(
                    game=name, eps=eps, r0=r0, n=n,
                    mean_tau=mt, se_tau=st, tau_bound=4 * r0**2 / eps**2, tau_ratio=mt * eps**2 / r0**2,
                    mean_dist2=md, se_dist2=sd, dist2_bound=2 * r0**2, dist2_ratio=md / r0**2,
                    p_near=float(np.mean(np.sqrt(dist2) < a)),
                    p_long=float(np.mean(tau >= a / (2 * eps**2))),
                    p_time=float(np.mean(np.abs(res.exit_t - horizon) < a)),
                )
                if name == "walk":
                    row.mu_mean, row.mu_se = mean_and_stderr(barrier(res.exit_x, z, theta, dim))
                    row.mu_start = float(barrier(x0, z, theta, dim)[0])
                rows.append(row)
    return EstimateSuite(rows, a, eta, y, opponent)


def _default_target(domain: DomainSpec) -> np.ndarray:
    """Point of the outer boundary on the positive first axis."""
    c = np.asarray(domain.center if domain.center is not None else np.zeros(domain.dim), dtype=float)
    y = c.copy()
    if domain.kind == "ball":
        y[0] += domain.radius
    elif domain.kind == "annulus":
        y[0] += domain.r_out
    else:
        y = 0.5 * (np.asarray(domain.lo) + np.asarray(domain.hi))
        y[0] = domain.hi[0]
    return y


# --------------------------------------------------------------- comparison


@dataclass
class ComparisonResult:
    ordered: bool
    worst_u: float  # max(u_low - u_high)
    worst_v: float
    where_u: tuple[int, int]  # (level, node)
    where_v: tuple[int, int]
    low: ValuePair = field(repr=False)
    high: ValuePair = field(repr=False)


def check_data_order(low: ProblemData, high: ProblemData, grid: SpaceTimeGrid) -> None:
    """Raise ``ConfigurationError`` naming the first node where ``low > high``."""
    a, b = low.samples(grid), high.samples(grid)
    for name in ("f", "g", "u0"):
        bad = np.argwhere(a[name] > b[name])
        if bad.size:
            if name == "u0":
                node, level = int(bad[0][0]), 0
            else:
                level, node = int(bad[0][0]), grid.n_interior + int(bad[0][1])
            x = grid.coords[node]
            raise ConfigurationError(
                f"data not ordered: {name}_low > {name}_high at node {node} x={x.tolist()} level {level}",
                f"data.{name}",
            )
    # g inside the domain only seeds the iteration; order it too so iterates stay ordered
    t1 = grid.times[min(1, grid.M)]
    gi_low, gi_high = low.g(grid.interior_coords, t1), high.g(grid.interior_coords, t1)
    bad = np.flatnonzero(gi_low > gi_high)
    if bad.size:
        node = int(bad[0])
        raise ConfigurationError(
            f"data not ordered: g_low > g_high at node {node} x={grid.coords[node].tolist()} level 1", "data.g"
        )


def comparison_check(
    data_low: ProblemData,
    data_high: ProblemData,
    grid: SpaceTimeGrid,
    tol: float = 1e-10,
    solver_tol: float | None = None,
    scheme: str = "jacobi",
    threads: int = 1,
) -> ComparisonResult:
    """Solve both problems and test ``u_low <= u_high + tol``, ``v_low <= v_high + tol`` nodewise.

    Each solve is within ``solver_tol`` (default ``tol / 10``) of its exact
    slice solutions, so iteration error alone cannot produce a violation.
    """
    solver_tol = tol / 10 if solver_tol is None else solver_tol
    check_data_order(data_low, data_high, grid)
    lo = solve_dpp(data_low, grid, tol=solver_tol, scheme=scheme, threads=threads)
    hi = solve_dpp(data_high, grid, tol=solver_tol, scheme=scheme, threads=threads)
    du = lo.u - hi.u
    dv = lo.v - hi.v
    iu = np.unravel_index(np.argmax(du), du.shape)
    iv = np.unravel_index(np.argmax(dv), dv.shape)
    wu, wv = float(du[iu]), float(dv[iv])
    return ComparisonResult(
        ordered=bool(wu <= tol and wv <= tol),
        worst_u=wu,
        worst_v=wv,
        where_u=(int(iu[0]), int(iu[1])),
        where_v=(int(iv[0]), int(iv[1])),
        low=lo,
        high=hi,
    )
