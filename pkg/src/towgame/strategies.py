"""Player strategies for the tug-of-war board.

A strategy maps the current state (and, in general, the partial history) to
the next position inside the closed ``eps``-ball.  Strategies that only look
at the current position, time and the player's win count are *Markov*; the
simulator evaluates those in vectorized batches through ``propose_batch``.
History-dependent strategies override ``propose`` and set ``markov = False``.
"""

from __future__ import annotations

import re
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError, CoverageError
from .geometry import SpaceTimeGrid

if TYPE_CHECKING:
    from .data import ProblemData
    from .dpp import ValuePair
    from .game import GameState

ROLES = ("I", "II")


def uniform_ball(rng, n: int, dim: int) -> np.ndarray:
    """``n`` points uniform in the unit ball, by rejection from the cube."""
    out = np.empty((n, dim))
    todo = np.arange(n)
    while todo.size:
        z = rng.uniform(-1.0, 1.0, size=(todo.size, dim))
        ok = np.einsum("ij,ij->i", z, z) <= 1.0
        out[todo[ok]] = z[ok]
        todo = todo[~ok]
    return out


class Strategy:
    markov = True
    name = "strategy"

    def propose_batch(self, x: np.ndarray, t: np.ndarray, k: np.ndarray, eps: float, rng) -> np.ndarray:
        raise NotImplementedError

    def propose(self, state: GameState, role: str, eps: float, rng) -> np.ndarray:
        k = state.wins[ROLES.index(role)]
        return self.propose_batch(state.x[None, :], np.array([state.t]), np.array([k]), eps, rng)[0]

    def describe(self) -> str:
        return self.name


class StayStrategy(Strategy):
    """Proposes the current position (a legal, if passive, move)."""

    name = "stay"

    def propose_batch(self, x, t, k, eps, rng):
        return x.copy()


class RandomStrategy(Strategy):
    """Uniform random point of the ball."""

    name = "random"

    def propose_batch(self, x, t, k, eps, rng):
        return x + eps * uniform_ball(rng, len(x), x.shape[1])


def pull_move(x, target, k, eps: float) -> np.ndarray:
    """Step toward ``target`` by ``eps - eps^3 / 2^k``, or onto it once within ``eps``.

    Vectorized over the leading axis of ``x`` and ``k``.
    """
    x = np.asarray(x, dtype=float)
    target = np.asarray(target, dtype=float)
    d = x - target
    r = np.linalg.norm(d, axis=-1, keepdims=True)
    slack = np.ldexp(eps**3, -np.asarray(k, dtype=np.int64))[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        y = x + (slack - eps) * d / r
    return np.where(r >= eps, y, np.broadcast_to(target, x.shape))


class PullToward(Strategy):
    """Always pull toward a fixed target point."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    @property
    def name(self):
        return f"pull target={self.target.tolist()}"

    def propose_batch(self, x, t, k, eps, rng):
        return pull_move(x, self.target, k, eps)


class PushAway(Strategy):
    """Full-length step directly away from a target point."""

    def __init__(self, target):
        self.target = np.asarray(target, dtype=float)

    @property
    def name(self):
        return f"push target={self.target.tolist()}"

    def propose_batch(self, x, t, k, eps, rng):
        d = x - self.target
        r = np.linalg.norm(d, axis=1, keepdims=True)
        e1 = np.zeros_like(d)
        e1[:, 0] = 1.0
        d = np.where(r > 0, d / np.where(r > 0, r, 1.0), e1)
        return x + eps * d


def ball_samples(dim: int, count: int) -> np.ndarray:
    """First ``count`` points of an unscrambled Halton sequence that land in the unit ball."""
    if count <= 0:
        return np.empty((0, dim))
    gen = qmc.Halton(d=dim, scramble=False)
    pts = []
    total = 0
    while total < count:
        z = 2.0 * gen.random(max(64, 2 * count)) - 1.0
        z = z[np.einsum("ij,ij->i", z, z) <= 1.0]
        pts.append(z)
        total += len(z)
    return np.concatenate(pts)[:count]


class DppGreedy(Strategy):
    """Best response to the solved DPP field at the next time level.

    Candidates are the lattice stencil around the current position (center
    first, then lexicographic) followed by ``samples`` quasi-random ball
    points; the first candidate attaining the max (or min) wins.
    """

    def __init__(self, pair: ValuePair, grid: SpaceTimeGrid, data: ProblemData, role: str = "max", samples: int = 0):
        if role not in ("max", "min"):
            raise ConfigurationError(f"greedy role must be 'max' or 'min', got {role!r}")
        self.pair, self.grid, self.data = pair, grid, data
        self.role = role
        self.samples = int(samples)
        extra = ball_samples(grid.dim, self.samples) * grid.eps
        self.candidates = np.concatenate([grid.offsets * grid.h, extra])

    @property
    def name(self):
        return f"greedy role={self.role} samples={self.samples}"

    def value_at(self, points: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Value of landing at ``points`` at time ``t``: payoff if terminal, else interpolated ``u``."""
        from .data import terminal_payoff
        from .geometry import INTERIOR, classify_points

        shape = points.shape[:-1]
        p = points.reshape(-1, self.grid.dim)
        tt = np.broadcast_to(t, shape).ravel()
        out = np.empty(len(p))
        code = classify_points(self.data.domain, p, tt, self.grid.eps)
        inner = code == INTERIOR
        if (~inner).any():
            out[~inner] = terminal_payoff(self.data, p[~inner], tt[~inner], 1)
        if inner.any():
            e2 = self.grid.eps**2
            lev = np.clip(np.rint(tt[inner] / e2).astype(np.int64), 1, self.pair.M)
            try:
                out[inner] = self.grid.interpolate(self.pair.u, p[inner], levels=lev)
            except CoverageError as exc:
                raise CoverageError(f"greedy field does not cover the ball: {exc}") from None
        return out.reshape(shape)

    def _candidate_values(self, x, t_next):
        pts = x[:, None, :] + self.candidates[None, :, :]
        vals = np.empty(pts.shape[:2])
        # balls well inside the domain at a positive time: every lattice candidate is
        # interior, and all of them share the cell fraction of x
        deep = (self.data.domain.boundary_distance(x) > self.grid.eps * (1 + 1e-9) + self.grid.h) & (
            t_next > 1e-9 * self.grid.eps**2
        )
        deep &= self.data.domain.contains(x)
        P = len(self.grid.offsets)
        if deep.any():
            e2 = self.grid.eps**2
            lev = np.clip(np.rint(t_next[deep] / e2).astype(np.int64), 1, self.pair.M)
            vals[deep, :P] = self.grid.stencil_interpolate(self.pair.u, x[deep], lev)
            if self.samples:
                vals[deep, P:] = self.value_at(pts[deep, P:], t_next[deep, None])
        if (~deep).any():
            vals[~deep] = self.value_at(pts[~deep], t_next[~deep, None])
        return pts, vals

    def propose_batch(self, x, t, k, eps, rng):
        pts, vals = self._candidate_values(x, np.asarray(t, dtype=float) - eps**2)
        pick = vals.argmax(axis=1) if self.role == "max" else vals.argmin(axis=1)
        return pts[np.arange(len(x)), pick]

    def attained(self, x, t) -> np.ndarray:
        """Field value at the proposed point (used to report the sup/inf gap)."""
        x = np.atleast_2d(x)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:1])
        _, vals = self._candidate_values(x, t - self.grid.eps**2)
        return vals.max(axis=1) if self.role == "max" else vals.min(axis=1)


_ARG = re.compile(r"(\w+)=(\[[^\]]*\]|\S+)")


def parse_strategy_spec(spec: str) -> tuple[str, dict]:
    """Split ``"pull target=[1,0]"`` into ``("pull", {"target": [1.0, 0.0]})``."""
    spec = spec.strip()
    if not spec:
        raise ConfigurationError("empty strategy spec")
    head, _, rest = spec.partition(" ")
    args = {}
    for key, val in _ARG.findall(rest):
        if val.startswith("["):
            args[key] = [float(v) for v in val.strip("[]").split(",") if v.strip()]
        else:
            try:
                args[key] = int(val)
            except ValueError:
                try:
                    args[key] = float(val)
                except ValueError:
                    args[key] = val
    return head.lower(), args


def strategy_from_spec(spec: str, pair=None, grid=None, data=None) -> Strategy:
    name, args = parse_strategy_spec(spec)
    if name == "random":
        return RandomStrategy()
    if name == "stay":
        return StayStrategy()
    if name in ("pull", "push"):
        if "target" not in args:
            raise ConfigurationError(f"{name} strategy needs target=[...]")
        return (PullToward if name == "pull" else PushAway)(args["target"])
    if name == "greedy":
        if pair is None or grid is None or data is None:
            raise ConfigurationError("greedy strategy needs a solved field")
        return DppGreedy(pair, grid, data, str(args.get("role", "max")), int(args.get("samples", 0)))
    raise ConfigurationError(f"unknown strategy {name!r}")
