"""Lattice solver for the coupled two-board dynamic programming principle.

Board 1 (tug-of-war, time decreases by eps^2) and board 2 (uniform random
step, frozen time) give, at every interior node and level ``t > 0``::

    u = eps^2 v + (1 - eps^2) S,           S = (max + min)/2 of u(., t - eps^2) over the ball
    v = K eps^2 u + (1 - K eps^2) A v,     A = equal-weight ball average at time t

``S`` only reads the previous level, so each level reduces to a linear fixed
point in ``v`` once ``u`` is substituted::

    v <- [K eps^2 (1 - eps^2) S + (1 - K eps^2) A v] / (1 - K eps^4)

which contracts in the sup norm with factor ``(1 - K eps^2)/(1 - K eps^4)``
(``1/(1 + eps^2)`` for ``K = 1``).
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import tril, triu
from scipy.sparse.linalg import spsolve_triangular

from .data import ProblemData
from .errors import ConfigurationError, ConvergenceError, NumericError
from .geometry import SpaceTimeGrid

log = logging.getLogger(__name__)


@dataclass
class SliceStats:
    level: int
    time: float
    iterations: int
    first_increment: float
    last_increment: float
    max_ratio: float
    increments: list[float] = field(default_factory=list, repr=False)
    wall: float = 0.0


@dataclass
class ValuePair:
    """Game values ``u`` (board 1) and ``v`` (board 2) on every node and level.

    Rows are time levels, columns are grid nodes (interior first).  Level 0
    holds the terminal payoff (``u0`` inside, ``f(., 0)`` on the collar) in
    both arrays.
    """

    u: np.ndarray
    v: np.ndarray
    eps: float
    h: float
    K: float
    times: np.ndarray
    coords: np.ndarray
    n_interior: int
    meta: list[SliceStats] = field(default_factory=list)

    @property
    def M(self) -> int:
        return len(self.times) - 1

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def interior(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        return self.u[level, : self.n_interior], self.v[level, : self.n_interior]

    def level_of(self, t: float) -> int:
        m = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[m] - t) > 1e-9 * self.eps**2:
            raise ValueError(f"t = {t} is not a time level")
        return m


def half_sup_inf(grid: SpaceTimeGrid, field_slice: np.ndarray, nodes=None) -> np.ndarray:
    """``(max + min) / 2`` of a full-node slice over each interior stencil."""
    nb = grid.neighbors if nodes is None else grid.neighbors[nodes]
    vals = field_slice[nb]
    return 0.5 * vals.max(axis=-1) + 0.5 * vals.min(axis=-1)


def ball_average(grid: SpaceTimeGrid, field_slice: np.ndarray, nodes=None) -> np.ndarray:
    """Equal-weight mean of a full-node slice over each interior stencil."""
    nb = grid.neighbors if nodes is None else grid.neighbors[nodes]
    return field_slice[nb].mean(axis=-1)


def boundary_slices(data: ProblemData, grid: SpaceTimeGrid, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Collar values of ``u`` and ``v`` at a level (``f``/``g``; ``f(., 0)`` for both at level 0)."""
    s = data.samples(grid)
    if level == 0:
        return s["f"][0], s["f"][0]
    return s["f"][level], s["g"][level]


def default_max_iter(tol: float, eps: float) -> int:
    return 10 * math.ceil(abs(math.log(tol)) / eps**2)


def _chunks(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def solve_slice(
    u_prev: np.ndarray,
    data: ProblemData,
    grid: SpaceTimeGrid,
    v_init: np.ndarray,
    tol: float,
    level: int,
    max_iter: int | None = None,
    scheme: str = "jacobi",
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray, SliceStats]:
    """Solve one time level given the complete ``u`` slice at the previous level.

    Returns full-node ``u`` and ``v`` slices (collar filled from the data) and
    the iteration statistics.  ``v_init`` is the interior initial guess.

    The v-iteration stops once its sup-norm increment is at most
    ``tol * (1 - q) / q`` with ``q`` the contraction factor, which bounds the
    distance of ``v`` (and hence ``u``) to the exact slice solution by ``tol``.
    """
    if tol <= 0:
        raise ConfigurationError("tol must be positive", "tol")
    if scheme not in ("jacobi", "gauss_seidel"):
        raise ConfigurationError(f"unknown update scheme {scheme!r}", "solver.scheme")
    start = time.perf_counter()
    e2 = grid.eps**2
    K = data.K
    n = grid.n_interior
    max_iter = default_max_iter(tol, grid.eps) if max_iter is None else max_iter

    u_col, v_col = boundary_slices(data, grid, level)
    if not (np.all(np.isfinite(u_prev)) and np.all(np.isfinite(v_col))):
        raise NumericError(f"non-finite input at level {level}")

    A_int, A_col = grid.average_operator
    denom = 1.0 - K * e2 * e2
    c_s = K * e2 * (1.0 - e2) / denom
    c_a = (1.0 - K * e2) / denom
    stop_at = tol * (1.0 - c_a) / c_a  # a posteriori: |v - v*| <= q/(1-q) * increment

    parts = _chunks(n, threads)
    S = np.empty(n)
    rhs = np.empty(n)
    b = A_col @ v_col

    def prep(sl):
        S[sl] = half_sup_inf(grid, u_prev, np.arange(sl.start, sl.stop))
        rhs[sl] = c_s * S[sl] + c_a * b[sl]

    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        list(pool.map(prep, parts))

        v = np.array(v_init, dtype=float, copy=True)
        if scheme == "gauss_seidel":
            lower = (tril(A_int, k=0) * (-c_a)).tocsr()
            lower.setdiag(lower.diagonal() + 1.0)
            upper = (triu(A_int, k=1) * c_a).tocsr()

        increments: list[float] = []
        new = np.empty(n)
        for it in range(1, max_iter + 1):
            if scheme == "jacobi":

                def sweep(sl):
                    new[sl] = rhs[sl] + c_a * (A_int[sl] @ v)

                if len(parts) == 1:
                    new[:] = rhs + c_a * (A_int @ v)
                else:
                    list(pool.map(sweep, parts))
            else:
                new[:] = spsolve_triangular(lower, rhs + upper @ v, lower=True)
            inc = float(np.max(np.abs(new - v))) if n else 0.0
            if not math.isfinite(inc):
                raise NumericError(f"non-finite iterate at level {level}, iteration {it}")
            v, new = new, v
            increments.append(inc)
            if inc <= stop_at:
                break
        else:
            raise ConvergenceError(
                f"level {level}: no convergence in {max_iter} iterations (last increment {inc:.3e})",
                residual=inc,
                level=level,
            )

    u_int = e2 * v + (1.0 - e2) * S
    inc_arr = np.asarray(increments)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = inc_arr[1:] / inc_arr[:-1]
    ratios = ratios[np.isfinite(ratios)]
    stats = SliceStats(
        level=level,
        time=float(grid.times[level]),
        iterations=len(increments),
        first_increment=increments[0],
        last_increment=increments[-1],
        max_ratio=float(ratios.max()) if ratios.size else 0.0,
        increments=increments,
        wall=time.perf_counter() - start,
    )
    return np.concatenate([u_int, u_col]), np.concatenate([v, v_col]), stats


def solve_dpp(
    data: ProblemData,
    grid: SpaceTimeGrid,
    tol: float = 1e-8,
    max_iter: int | None = None,
    scheme: str = "jacobi",
    threads: int = 1,
) -> ValuePair:
    """March the levels ``m = 1..M``, seeding level 0 with the terminal payoff."""
    info = data.validate(grid)
    nodes, M = grid.n_nodes, grid.M
    u = np.empty((M + 1, nodes))
    v = np.empty((M + 1, nodes))
    s = data.samples(grid)
    u[0, : grid.n_interior] = s["u0"]
    u[0, grid.n_interior :] = s["f"][0]
    v[0] = u[0]
    meta = []
    v_guess = data.g(grid.interior_coords, grid.times[1])
    for m in range(1, M + 1):
        try:
            u[m], v[m], stats = solve_slice(u[m - 1], data, grid, v_guess, tol, m, max_iter, scheme, threads)
        except (ConvergenceError, NumericError) as exc:
            exc.args = (f"slice {m}: {exc.args[0]}",) + exc.args[1:]
            raise
        meta.append(stats)
        v_guess = v[m, : grid.n_interior]
        log.debug("level %d: %d iterations, last increment %.3e", m, stats.iterations, stats.last_increment)
    C = info["C"]
    worst = max(np.abs(u).max(), np.abs(v).max())
    if worst > C + max(10 * tol, 1e-12):
        log.warning("uniform bound exceeded: max |value| = %.17g > C = %.17g", worst, C)
    return ValuePair(u, v, grid.eps, grid.h, data.K, grid.times.copy(), grid.coords.copy(), grid.n_interior, meta)


@dataclass
class DppResidual:
    u_residual: float
    v_residual: float
    u_per_level: np.ndarray
    v_per_level: np.ndarray
    worst_u: tuple[int, int]  # (level, node)
    worst_v: tuple[int, int]


def dpp_residual(pair: ValuePair, data: ProblemData, grid: SpaceTimeGrid) -> DppResidual:
    """Max violation of both DPP equations over interior nodes and levels ``m >= 1``."""
    e2 = grid.eps**2
    K = data.K
    n = grid.n_interior
    ru = np.zeros((pair.M, n))
    rv = np.zeros((pair.M, n))
    for m in range(1, pair.M + 1):
        S = half_sup_inf(grid, pair.u[m - 1])
        Av = ball_average(grid, pair.v[m])
        ui, vi = pair.interior(m)
        ru[m - 1] = np.abs(ui - e2 * vi - (1 - e2) * S)
        rv[m - 1] = np.abs(vi - K * e2 * ui - (1 - K * e2) * Av)
    iu = np.unravel_index(np.argmax(ru), ru.shape) if ru.size else (0, 0)
    iv = np.unravel_index(np.argmax(rv), rv.shape) if rv.size else (0, 0)
    return DppResidual(
        u_residual=float(ru.max(initial=0.0)),
        v_residual=float(rv.max(initial=0.0)),
        u_per_level=ru.max(axis=1, initial=0.0),
        v_per_level=rv.max(axis=1, initial=0.0),
        worst_u=(int(iu[0]) + 1, int(iu[1])),
        worst_v=(int(iv[0]) + 1, int(iv[1])),
    )


def predicted_iterations(tol: float, first_increment: float, eps: float, K: float = 1.0) -> int:
    """A priori count ``ceil(ln(tol / first_increment) / ln q)`` from the contraction factor ``q``.

    This is the increment-below-``tol`` estimate; the solver's error-controlled
    stop needs about ``ln(q / (1 - q)) / ln(1 / q)`` more at the worst-case rate.
    """
    q = (1 - K * eps**2) / (1 - K * eps**4)
    if first_increment <= tol:
        return 1
    return math.ceil(math.log(tol / first_increment) / math.log(q))
