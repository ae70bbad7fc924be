"""Monte Carlo simulation of the two-board game on the continuum.

Board 1: with probability ``eps^2`` the token switches to board 2 at the same
``(x, t)``; otherwise a fair coin chooses which player's strategy moves it
within the closed ``eps``-ball, and time drops by ``eps^2``.  Board 2: with
probability ``K eps^2`` it switches back; otherwise it jumps to a uniform point
of the ball at frozen time.  The game stops when the token leaves the domain
or time reaches zero; Player I then receives the terminal payoff.

Two engines share these rules: :func:`play` follows one trajectory and hands
strategies the full history; :func:`estimate_value` runs fixed-size blocks of
trajectories in lock-step for Markov strategies.  Each block (or, on the
history path, each trajectory) draws from its own stream derived from the
master seed, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import ProblemData, terminal_payoff
from .errors import ContractViolation, RunawayError, StrategyContractError
from .geometry import INTERIOR, LATERAL, TIME_EXIT, classify_points
from .strategies import Strategy, uniform_ball

_MOVE_TOL = 1e-12
DEFAULT_STEP_CAP = 10**9


@dataclass(frozen=True)
class GameRules:
    """Step size and switch probabilities (``None`` means ``eps^2`` / ``K eps^2``)."""

    eps: float
    K: float = 1.0
    switch1: float | None = None
    switch2: float | None = None
    history_window: int | None = None

    @property
    def p1(self) -> float:
        return self.eps**2 if self.switch1 is None else self.switch1

    @property
    def p2(self) -> float:
        return self.K * self.eps**2 if self.switch2 is None else self.switch2

    @classmethod
    def for_data(cls, data: ProblemData, **kw) -> GameRules:
        return cls(data.eps, data.K, **kw)


@dataclass
class GameState:
    x: np.ndarray
    t: float
    board: int
    history: list = field(default_factory=list)
    wins: tuple[int, int] = (0, 0)
    plays: int = 0  # board-1 moves so far
    t0: float | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.t0 is None:
            self.t0 = float(self.t)
        if not self.history:
            self.history = [(self.x.copy(), self.t, self.board)]


@dataclass
class TrajectoryOutcome:
    x: np.ndarray
    t: float
    board: int
    steps: int
    payoff: float
    kind: str  # "lateral" or "time"
    history: list | None = None


def _check_move(x, y, eps, trajectory=None):
    dist = np.linalg.norm(np.atleast_2d(y) - np.atleast_2d(x), axis=1)
    bad = ~(dist <= eps * (1 + _MOVE_TOL))
    if bad.any():
        raise StrategyContractError(
            f"strategy proposed a move of length {float(dist[bad][0]):.6g} > eps = {eps}", trajectory
        )


def step(state: GameState, s_I: Strategy, s_II: Strategy, rng, rules: GameRules) -> GameState:
    """One transition of the game from an interior state."""
    eps = rules.eps
    e2 = eps * eps
    x, t = state.x, state.t
    hist = state.history
    if state.board == 1:
        if rng.random() < rules.p1:
            new = GameState(x.copy(), t, 2, hist, state.wins, state.plays, state.t0)
        else:
            role = "I" if rng.random() < 0.5 else "II"
            y = np.asarray((s_I if role == "I" else s_II).propose(state, role, eps, rng), dtype=float)
            _check_move(x, y, eps)
            wins = (state.wins[0] + 1, state.wins[1]) if role == "I" else (state.wins[0], state.wins[1] + 1)
            plays = state.plays + 1
            new = GameState(y, state.t0 - plays * e2, 1, hist, wins, plays, state.t0)
    else:
        if rng.random() < rules.p2:
            new = GameState(x.copy(), t, 1, hist, state.wins, state.plays, state.t0)
        else:
            y = x + eps * uniform_ball(rng, 1, x.size)[0]
            new = GameState(y, t, 2, hist, state.wins, state.plays, state.t0)
    new.history.append((new.x.copy(), new.t, new.board))
    if rules.history_window is not None and len(new.history) > rules.history_window:
        del new.history[: len(new.history) - rules.history_window]
    return new


def play(
    start: GameState,
    s_I: Strategy,
    s_II: Strategy,
    rng,
    data: ProblemData,
    rules: GameRules | None = None,
    step_cap: int = DEFAULT_STEP_CAP,
    keep_history: bool = False,
) -> TrajectoryOutcome:
    """Run one game to termination and return its exit state and payoff."""
    rules = rules or GameRules.for_data(data)
    code = classify_points(data.domain, start.x[None], start.t, rules.eps)[0]
    if code != INTERIOR:
        raise ContractViolation("play() must start from an interior state")
    state = start
    steps = 0
    while True:
        state = step(state, s_I, s_II, rng, rules)
        steps += 1
        code = classify_points(data.domain, state.x[None], state.t, rules.eps)[0]
        if code != INTERIOR:
            break
        if steps >= step_cap:
            raise RunawayError(f"trajectory exceeded {step_cap} steps")
    payoff = float(terminal_payoff(data, state.x, state.t, state.board))
    kind = "time" if code == TIME_EXIT else "lateral"
    return TrajectoryOutcome(state.x, state.t, state.board, steps, payoff, kind, state.history if keep_history else None)


@dataclass
class BlockResult:
    payoff: np.ndarray
    steps: np.ndarray
    plays: np.ndarray
    exit_x: np.ndarray
    exit_t: np.ndarray
    exit_board: np.ndarray
    exit_kind: np.ndarray  # LATERAL or TIME_EXIT codes
    switches: np.ndarray  # [board1 switches, board1 opportunities, board2 switches, board2 opportunities]
    traces: list


def simulate_block(
    x0,
    t0: float,
    board0: int,
    n: int,
    s_I: Strategy,
    s_II: Strategy,
    rng,
    data: ProblemData,
    rules: GameRules,
    step_cap: int = DEFAULT_STEP_CAP,
    trace: int = 0,
    first_index: int = 0,
) -> BlockResult:
    """``n`` independent games from the same start, advanced in lock-step."""
    eps = rules.eps
    e2 = eps * eps
    dim = data.domain.dim
    x = np.tile(np.asarray(x0, dtype=float), (n, 1))
    t = np.full(n, float(t0))
    board = np.full(n, int(board0), dtype=np.int8)
    wins = np.zeros((2, n), dtype=np.int64)
    plays = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    kind = np.zeros(n, dtype=np.int8)
    counters = np.zeros(4, dtype=np.int64)
    traces = [[(x[i].tolist(), float(t[i]), int(board[i]))] for i in range(min(trace, n))]

    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        moved = []
        b1 = idx[board[idx] == 1]
        b2 = idx[board[idx] == 2]
        if b1.size:
            sw = rng.random(b1.size) < rules.p1
            counters[0] += int(sw.sum())
            counters[1] += b1.size
            board[b1[sw]] = 2
            pl = b1[~sw]
            if pl.size:
                coin_I = rng.random(pl.size) < 0.5
                for role, members, strat in ((0, pl[coin_I], s_I), (1, pl[~coin_I], s_II)):
                    if members.size == 0:
                        continue
                    y = np.asarray(strat.propose_batch(x[members], t[members], wins[role, members], eps, rng))
                    dist = np.linalg.norm(y - x[members], axis=1)
                    bad = ~(dist <= eps * (1 + _MOVE_TOL))
                    if bad.any():
                        j = int(members[np.argmax(bad)])
                        raise StrategyContractError(
                            f"strategy {strat.describe()} proposed a move of length {float(dist[bad][0]):.6g} > eps",
                            first_index + j,
                        )
                    x[members] = y
                    wins[role, members] += 1
                plays[pl] += 1
                t[pl] = t0 - plays[pl] * e2
                moved.append(pl)
        if b2.size:
            sw = rng.random(b2.size) < rules.p2
            counters[2] += int(sw.sum())
            counters[3] += b2.size
            board[b2[sw]] = 1
            wk = b2[~sw]
            if wk.size:
                x[wk] += eps * uniform_ball(rng, wk.size, dim)
                moved.append(wk)
        steps[idx] += 1
        if moved:
            mv = np.concatenate(moved)
            code = classify_points(data.domain, x[mv], t[mv], eps)
            done = mv[code != INTERIOR]
            kind[done] = code[code != INTERIOR]
            active[done] = False
        for i, tr in enumerate(traces):
            if steps[i] > len(tr) - 1:
                tr.append((x[i].tolist(), float(t[i]), int(board[i])))
        if steps[idx].max() >= step_cap and active.any():
            raise RunawayError(f"trajectory exceeded {step_cap} steps")

    payoff = np.asarray(terminal_payoff(data, x, t, board), dtype=float).reshape(n)
    return BlockResult(payoff, steps, plays, x, t, board, kind, counters, traces)


@dataclass
class EstimateResult:
    mean: float
    stderr: float
    n: int
    payoffs: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)
    plays: np.ndarray = field(repr=False)
    exit_x: np.ndarray = field(repr=False)
    exit_t: np.ndarray = field(repr=False)
    exit_board: np.ndarray = field(repr=False)
    exit_kind: np.ndarray = field(repr=False)
    switches: np.ndarray = field(repr=False)
    traces: list = field(default_factory=list, repr=False)

    @property
    def lateral_fraction(self) -> float:
        return float(np.mean(self.exit_kind == LATERAL))

    @property
    def time_fraction(self) -> float:
        return float(np.mean(self.exit_kind == TIME_EXIT))

    def tau_histogram(self, bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
        return np.histogram(self.steps, bins=bins)

    def summary(self) -> dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "n": self.n,
            "mean_steps": float(self.steps.mean()),
            "max_steps": int(self.steps.max()),
            "lateral_fraction": self.lateral_fraction,
            "time_fraction": self.time_fraction,
            "board1_exit_fraction": float(np.mean(self.exit_board == 1)),
            "switch_rate_board1": float(self.switches[0] / max(self.switches[1], 1)),
            "switch_rate_board2": float(self.switches[2] / max(self.switches[3], 1)),
        }


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Shifted two-pass mean and standard error (exact for constant samples)."""
    values = np.asarray(values, dtype=float)
    shift = values[0]
    dev = values - shift
    mean = float(shift + dev.mean())
    if len(values) < 2:
        return mean, 0.0
    return mean, float(np.sqrt(np.var(dev, ddof=1) / len(values)))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(block)])))


def estimate_value(
    start: GameState,
    s_I: Strategy,
    s_II: Strategy,
    n: int,
    seed: int,
    data: ProblemData,
    rules: GameRules | None = None,
    block_size: int = 4096,
    threads: int = 1,
    trace: int = 0,
    step_cap: int = DEFAULT_STEP_CAP,
) -> EstimateResult:
    """Sample mean and standard error of the payoff over ``n`` games.

    Reproducible for a given ``(seed, n, block_size)`` whatever ``threads`` is.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rules = rules or GameRules.for_data(data)
    code = classify_points(data.domain, np.asarray(start.x)[None], start.t, rules.eps)[0]
    if code != INTERIOR:
        raise ContractViolation("estimate_value() must start from an interior state")

    if s_I.markov and s_II.markov:
        nblocks = math.ceil(n / block_size)

        def run(b):
            lo = b * block_size
            m = min(block_size, n - lo)
            return simulate_block(
                start.x, start.t, start.board, m, s_I, s_II, block_rng(seed, b), data, rules,
                step_cap, trace if b == 0 else 0, lo,
            )

        if threads > 1 and nblocks > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                blocks = list(pool.map(run, range(nblocks)))
        else:
            blocks = [run(b) for b in range(nblocks)]
    else:
        blocks = [_history_block(start, s_I, s_II, n, seed, data, rules, threads, trace, step_cap)]

    cat = lambda name: np.concatenate([getattr(b, name) for b in blocks])  # noqa: E731
    payoffs = cat("payoff")
    mean, se = mean_and_stderr(payoffs)
    return EstimateResult(
        mean=mean,
        stderr=se,
        n=n,
        payoffs=payoffs,
        steps=cat("steps"),
        plays=cat("plays"),
        exit_x=cat("exit_x"),
        exit_t=cat("exit_t"),
        exit_board=cat("exit_board"),
        exit_kind=cat("exit_kind"),
        switches=np.sum([b.switches for b in blocks], axis=0),
        traces=blocks[0].traces,
    )


def _history_block(start, s_I, s_II, n, seed, data, rules, threads, trace, step_cap) -> BlockResult:
    """Per-trajectory engine for history-dependent strategies (one stream per game)."""

    def run(i):
        rng = block_rng(seed, i)
        st = GameState(start.x.copy(), start.t, start.board)
        try:
            return play(st, s_I, s_II, rng, data, rules, step_cap, keep_history=i < trace)
        except StrategyContractError as exc:
            exc.trajectory = i
            raise

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(run, range(n)))
    else:
        outs = [run(i) for i in range(n)]
    return BlockResult(
        payoff=np.array([o.payoff for o in outs]),
        steps=np.array([o.steps for o in outs]),
        plays=np.array([round((start.t - o.t) / rules.eps**2) for o in outs]),
        exit_x=np.array([o.x for o in outs]),
        exit_t=np.array([o.t for o in outs]),
        exit_board=np.array([o.board for o in outs]),
        exit_kind=np.array([TIME_EXIT if o.kind == "time" else LATERAL for o in outs], dtype=np.int8),
        switches=np.zeros(4, dtype=np.int64),
        traces=[[(h[0].tolist(), float(h[1]), int(h[2])) for h in o.history] for o in outs[:trace]],
    )
