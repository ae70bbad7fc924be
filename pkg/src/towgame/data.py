"""Boundary and initial data, their Lipschitz extensions, and terminal payoffs.

Every data function is a small callable object ``F(x, t)`` vectorized over
the leading axis of ``x``.  Analytic kinds (constant, affine, radial,
exponential, bump) are defined on all of R^N and are evaluated directly;
tabulated data are extended off their samples with the McShane formula.
Descriptors round-trip through plain dicts, which is how run configs spell
them.
"""

from __future__ import annotations

import csv
import dataclasses
import weakref
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .geometry import INTERIOR, LATERAL, DomainSpec, SpaceTimeGrid, classify_points


def _prep(x, t):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    t = np.broadcast_to(np.asarray(t, dtype=float), x2.shape[:1])
    return x2, t, single


class DataFunction:
    """Base class: subclasses implement ``_eval(x2d, t1d)``."""

    def __call__(self, x, t=0.0):
        x2, t1, single = _prep(x, t)
        out = np.asarray(self._eval(x2, t1), dtype=float)
        out = np.broadcast_to(out, x2.shape[:1]).copy()
        return float(out[0]) if single else out

    def _eval(self, x, t):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __neg__(self):
        return Scaled(-1.0, self)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Constant(float(other))
        return Sum((self, other))

    __radd__ = __add__


@dataclass(frozen=True)
class Constant(DataFunction):
    value: float

    def _eval(self, x, t):
        return np.full(len(x), self.value)

    def to_dict(self):
        return {"type": "constant", "value": self.value}


@dataclass(frozen=True)
class Affine(DataFunction):
    """``coeffs[0] + sum_i coeffs[i+1] * x_i + time_coeff * t``."""

    coeffs: tuple[float, ...]
    time_coeff: float = 0.0

    def _eval(self, x, t):
        c = np.asarray(self.coeffs)
        if len(c) != x.shape[1] + 1:
            raise ConfigurationError(f"affine data needs N+1 = {x.shape[1] + 1} coefficients")
        return c[0] + x @ c[1:] + self.time_coeff * t

    def to_dict(self):
        return {"type": "affine", "coeffs": list(self.coeffs), "time_coeff": self.time_coeff}


@dataclass(frozen=True)
class Radial(DataFunction):
    """Polynomial in ``r = |x - center|``: ``sum_k coeffs[k] * r**k``."""

    center: tuple[float, ...]
    coeffs: tuple[float, ...]

    def _eval(self, x, t):
        r = np.linalg.norm(x - np.asarray(self.center), axis=1)
        return np.polynomial.polynomial.polyval(r, np.asarray(self.coeffs))

    def to_dict(self):
        return {"type": "radial", "center": list(self.center), "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Exponential(DataFunction):
    """``amplitude * exp(rate * x[axis])``, constant in time."""

    amplitude: float
    rate: float
    axis: int = 0

    def _eval(self, x, t):
        return self.amplitude * np.exp(self.rate * x[:, self.axis])

    def to_dict(self):
        return {"type": "exponential", "amplitude": self.amplitude, "rate": self.rate, "axis": self.axis}


@dataclass(frozen=True)
class Bump(DataFunction):
    """Tent ``height * max(0, 1 - |x-c|/radius)``, ramped in by ``min(1, t/ramp)``.

    With ``ramp > 0`` the bump vanishes at ``t = 0``, so adding it to lateral
    data keeps the initial/boundary compatibility intact.
    """

    center: tuple[float, ...]
    radius: float
    height: float
    ramp: float = 0.0

    def _eval(self, x, t):
        tent = np.maximum(0.0, 1.0 - np.linalg.norm(x - np.asarray(self.center), axis=1) / self.radius)
        scale = np.ones_like(t) if self.ramp <= 0 else np.clip(t / self.ramp, 0.0, 1.0)
        return self.height * tent * scale

    def to_dict(self):
        return {
            "type": "bump",
            "center": list(self.center),
            "radius": self.radius,
            "height": self.height,
            "ramp": self.ramp,
        }


@dataclass(frozen=True)
class Sum(DataFunction):
    terms: tuple[DataFunction, ...]

    def _eval(self, x, t):
        return sum(np.asarray(term._eval(x, t), dtype=float) for term in self.terms)

    def to_dict(self):
        return {"type": "sum", "terms": [term.to_dict() for term in self.terms]}


@dataclass(frozen=True)
class Scaled(DataFunction):
    factor: float
    term: DataFunction

    def _eval(self, x, t):
        return self.factor * np.asarray(self.term._eval(x, t), dtype=float)

    def to_dict(self):
        return {"type": "scale", "factor": self.factor, "term": self.term.to_dict()}


@dataclass(frozen=True, eq=False)
class McShaneExtension(DataFunction):
    """``F(p) = min_s (value_s + L * |p - pos_s|)`` over tabulated samples.

    Sample positions live in space-time when the table carries a time column
    (``with_time``), in space only otherwise.  ``F`` reproduces the samples
    whenever they are ``L``-Lipschitz, and is itself ``L``-Lipschitz.
    """

    positions: np.ndarray
    values: np.ndarray
    L: float
    with_time: bool = False
    source: str | None = None

    def _eval(self, x, t):
        p = np.column_stack([x, t]) if self.with_time else x
        out = np.empty(len(p))
        step = max(1, 2_000_000 // max(1, len(self.positions)))
        for i in range(0, len(p), step):
            d = np.linalg.norm(p[i : i + step, None, :] - self.positions[None, :, :], axis=2)
            out[i : i + step] = np.min(self.values[None, :] + self.L * d, axis=1)
        return out

    def to_dict(self):
        d = {"type": "table", "L": self.L}
        if self.source is not None:
            d["path"] = self.source
        else:
            d["samples"] = np.column_stack([self.positions, self.values]).tolist()
            d["with_time"] = self.with_time
        return d


def lipschitz_quotient(positions: np.ndarray, values: np.ndarray) -> float:
    """Largest pairwise ``|dv| / |dp|`` over distinct sample positions."""
    if len(positions) < 2:
        return 0.0
    d = np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2)
    dv = np.abs(values[:, None] - values[None, :])
    mask = d > 0
    return float(np.max(dv[mask] / d[mask])) if mask.any() else 0.0


def lipschitz_extend(
    positions, values, L: float | None = None, with_time: bool = False, source: str | None = None
) -> McShaneExtension:
    """McShane extension of tabulated samples (``L`` defaults to their own quotient)."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ConfigurationError("cannot extend an empty sample set")
    if len(positions) != len(values):
        raise ConfigurationError("positions and values differ in length")
    if L is None:
        L = lipschitz_quotient(positions, values)
    return McShaneExtension(positions, values, float(L), with_time, source)


def read_table(path, dim: int) -> tuple[np.ndarray, np.ndarray, bool]:
    """CSV rows ``x_1..x_N[, t], value``; a header row is skipped if present."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                if rows:
                    raise ConfigurationError(f"non-numeric row in {path}: {row}") from None
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (dim + 1, dim + 2):
        raise ConfigurationError(f"table {path} must have N+1 or N+2 columns")
    return arr[:, :-1], arr[:, -1], arr.shape[1] == dim + 2


def make_function(desc, dim: int, base_dir: str | Path | None = None) -> DataFunction:
    """Build a data function from a config descriptor (or pass numbers/functions through)."""
    if isinstance(desc, DataFunction):
        return desc
    if isinstance(desc, (int, float)):
        return Constant(float(desc))
    if not isinstance(desc, dict) or "type" not in desc:
        raise ConfigurationError(f"data descriptor must be a table with a 'type' key, got {desc!r}")
    kind = desc["type"]
    try:
        if kind == "constant":
            return Constant(float(desc["value"]))
        if kind == "affine":
            return Affine(tuple(float(c) for c in desc["coeffs"]), float(desc.get("time_coeff", 0.0)))
        if kind == "radial":
            return Radial(tuple(float(c) for c in desc.get("center", [0.0] * dim)), tuple(map(float, desc["coeffs"])))
        if kind == "exponential":
            return Exponential(float(desc["amplitude"]), float(desc["rate"]), int(desc.get("axis", 0)))
        if kind == "bump":
            return Bump(
                tuple(map(float, desc["center"])),
                float(desc["radius"]),
                float(desc["height"]),
                float(desc.get("ramp", 0.0)),
            )
        if kind == "sum":
            return Sum(tuple(make_function(d, dim, base_dir) for d in desc["terms"]))
        if kind == "scale":
            return Scaled(float(desc["factor"]), make_function(desc["term"], dim, base_dir))
        if kind == "table":
            L = desc.get("L")
            if "path" in desc:
                path = Path(desc["path"])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                pos, val, with_time = read_table(path, dim)
                return lipschitz_extend(pos, val, L, with_time, source=str(desc["path"]))
            samples = np.asarray(desc["samples"], dtype=float)
            return lipschitz_extend(samples[:, :-1], samples[:, -1], L, bool(desc.get("with_time", False)))
    except KeyError as exc:
        raise ConfigurationError(f"{kind} data missing key {exc.args[0]!r}") from None
    raise ConfigurationError(f"unknown data type {kind!r}")


@dataclass(frozen=True)
class ProblemData:
    """Domain, data ``f``, ``g``, ``u0`` and the game parameters.

    ``f`` and ``g`` are already defined off the domain (they are the extended
    payoffs), so ``f_bar``/``g_bar`` are the same callables.
    """

    domain: DomainSpec
    f: DataFunction
    g: DataFunction
    u0: DataFunction
    eps: float
    T: float
    K: float = 1.0
    _cache: weakref.WeakKeyDictionary = field(default_factory=weakref.WeakKeyDictionary, compare=False, repr=False)

    def __post_init__(self):
        if not self.eps > 0 or not self.T > 0:
            raise ConfigurationError("eps and T must be positive")
        if not self.K > 0:
            raise ConfigurationError("K must be positive", "K")
        if self.K * self.eps**2 >= 1:
            raise ConfigurationError("K * eps^2 must be < 1 (it is a switch probability)", "K")

    @property
    def f_bar(self) -> DataFunction:
        return self.f

    @property
    def g_bar(self) -> DataFunction:
        return self.g

    def replace(self, **kw) -> ProblemData:
        kw.setdefault("_cache", weakref.WeakKeyDictionary())
        return dataclasses.replace(self, **kw)

    def negated(self) -> ProblemData:
        return self.replace(f=-self.f, g=-self.g, u0=-self.u0)

    def shifted(self, c: float) -> ProblemData:
        return self.replace(f=self.f + c, g=self.g + c, u0=self.u0 + c)

    def samples(self, grid: SpaceTimeGrid) -> dict[str, np.ndarray]:
        """Data sampled where the lattice DPP reads it: f, g on the collar at every level, u0 inside."""
        if grid not in self._cache:
            xc = grid.collar_coords
            fs = np.stack([self.f(xc, t) for t in grid.times])
            gs = np.stack([self.g(xc, t) for t in grid.times])
            self._cache[grid] = {"f": fs, "g": gs, "u0": self.u0(grid.interior_coords)}
        return self._cache[grid]

    def sup_norm(self, grid: SpaceTimeGrid) -> float:
        """``C = max(|f|, |g|, |u0|)`` over the lattice samples."""
        s = self.samples(grid)
        return float(max(np.abs(s["f"]).max(initial=0.0), np.abs(s["g"]).max(initial=0.0), np.abs(s["u0"]).max()))

    def lipschitz(self, grid: SpaceTimeGrid) -> dict[str, float]:
        """Lipschitz constants estimated from lattice-neighbor difference quotients."""
        x = grid.coords
        out = {}
        for name, fn, use_t in (("f", self.f, True), ("g", self.g, True), ("u0", self.u0, False)):
            best = 0.0
            times = grid.times if use_t else grid.times[:1]
            vals = np.stack([fn(x, t) for t in times])
            for k in range(grid.dim):
                shift = np.zeros(grid.dim, dtype=np.int64)
                shift[k] = 1
                nb = grid.node_id(grid.index + shift)
                ok = nb >= 0
                best = max(best, float(np.abs(vals[:, nb[ok]] - vals[:, ok]).max(initial=0.0)) / grid.h)
            if use_t and len(times) > 1:
                best = max(best, float((np.abs(np.diff(vals, axis=0)) / np.diff(times)[:, None]).max()))
            out[name] = best
        return out

    def compatibility_gap(self, grid: SpaceTimeGrid) -> float:
        """Max ``|u0(x) - f(x, 0)|`` over lattice nodes within one cell of the boundary."""
        x = grid.coords
        near = np.where(
            np.arange(grid.n_nodes) < grid.n_interior,
            grid.spec.boundary_distance(x) <= grid.h * np.sqrt(grid.dim),
            grid.spec.distance(x) <= grid.h * np.sqrt(grid.dim),
        )
        if not near.any():
            return 0.0
        return float(np.abs(self.u0(x[near]) - self.f(x[near], 0.0)).max())

    def validate(self, grid: SpaceTimeGrid) -> dict:
        """Check finiteness and compatibility; return the recorded constants."""
        if abs(grid.eps - self.eps) > 1e-12 * self.eps:
            raise ConfigurationError(f"data eps {self.eps} differs from grid eps {grid.eps}", "eps")
        s = self.samples(grid)
        for name, arr in s.items():
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError("non-finite data values on the lattice", name)
        L = self.lipschitz(grid)
        gap = self.compatibility_gap(grid)
        Lmax = max(L.values())
        # allowance: both functions are sampled within one cell diagonal of the boundary
        allowed = 2 * Lmax * grid.h * np.sqrt(grid.dim) + 1e-12
        if gap > allowed:
            raise ConfigurationError(f"u0(x) != f(x, 0) near the boundary (gap {gap:.3g} > {allowed:.3g})", "u0")
        return {"C": self.sup_norm(grid), "L": L, "compatibility_gap": gap}

    def describe(self) -> dict:
        return {
            "domain": self.domain.to_dict(),
            "f": self.f.to_dict(),
            "g": self.g.to_dict(),
            "u0": self.u0.to_dict(),
            "eps": self.eps,
            "T": self.T,
            "K": self.K,
        }


def terminal_payoff(data: ProblemData, x, t, board) -> np.ndarray | float:
    """Payoff at terminal states: f on board-1 lateral exits, g on board-2 ones,
    u0 (inside) or f(., 0) (outside) once time is exhausted."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    t1 = np.broadcast_to(np.asarray(t, dtype=float), x2.shape[:1])
    b = np.broadcast_to(np.asarray(board), x2.shape[:1])
    code = classify_points(data.domain, x2, t1, data.eps)
    if np.any(code == INTERIOR):
        raise ContractViolation("terminal_payoff called on an interior state")
    out = np.empty(len(x2))
    lat = code == LATERAL
    on1 = lat & (b == 1)
    on2 = lat & (b == 2)
    tim = ~lat
    if on1.any():
        out[on1] = data.f(x2[on1], t1[on1])
    if on2.any():
        out[on2] = data.g(x2[on2], t1[on2])
    if tim.any():
        inside = data.domain.contains(x2[tim])
        vals = np.empty(int(tim.sum()))
        xt = x2[tim]
        if inside.any():
            vals[inside] = data.u0(xt[inside])
        if (~inside).any():
            vals[~inside] = data.f(xt[~inside], 0.0)
        out[tim] = vals
    return float(out[0]) if single else out


def problem_from_dict(cfg: dict, eps: float, T: float, K: float = 1.0, base_dir=None) -> ProblemData:
    domain = DomainSpec.from_dict(cfg["domain"])
    data = cfg.get("data", {})
    missing = [k for k in ("f", "g", "u0") if k not in data]
    if missing:
        raise ConfigurationError(f"missing data descriptors {missing}", "data")
    fns = {k: make_function(data[k], domain.dim, base_dir) for k in ("f", "g", "u0")}
    return ProblemData(domain, fns["f"], fns["g"], fns["u0"], float(eps), float(T), float(K))


def affine(coeffs: Sequence[float], time_coeff: float = 0.0) -> Affine:
    return Affine(tuple(float(c) for c in coeffs), float(time_coeff))
