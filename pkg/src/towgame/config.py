"""Run configuration: a TOML file with nested sections, validated up front.

Every default is filled in by ``load_config`` so ``RunConfig.to_dict()``
describes the run completely; the CLI copies it into each run report.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .data import ProblemData, make_function, problem_from_dict
from .errors import ConfigurationError
from .geometry import DomainSpec

DEFAULTS: dict = {
    "params": {"K": 1.0, "tol": 1e-8},
    "solver": {"max_iter": 0, "scheme": "jacobi", "threads": 1},
    "simulation": {
        "n": 10000,
        "seed": 0,
        "strategy_I": "greedy role=max",
        "strategy_II": "greedy role=min",
        "starts": [],
        "boards": [1],
        "t0": None,
        "block_size": 4096,
        "trace": 0,
    },
    "residuals": {"grad_floor": None, "margin": 0.0, "t_min": 0.0, "stride": 1},
    "converge": {
        "eps_list": [0.2, 0.1, 0.05],
        "h_ratio": 4.0,
        "tol": None,
        "margin": 0.0,
        "t_min": 0.0,
        "grad_floor": None,
        "stride": "eps",
        "exact": None,
    },
    "estimates": {
        "eps_list": [0.01],
        "a": 0.2,
        "eta": 0.1,
        "n": 10000,
        "r0_list": [0.02, 0.05],
        "target": None,
        "opponent": "random",
        "t0": None,
        "theta": None,
        "walk": True,
        "seed": None,
    },
    "output": {"dir": "out"},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _positive(value, path: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}", path) from None
    if not (math.isfinite(x) and x > 0):
        raise ConfigurationError(f"must be positive, got {value!r}", path)
    return x


def _count(value, path: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigurationError(f"expected an integer >= {minimum}, got {value!r}", path)
    return value


@dataclass
class RunConfig:
    raw: dict
    base_dir: Path = field(default_factory=Path.cwd)

    # convenience accessors ------------------------------------------------
    @property
    def params(self) -> dict:
        return self.raw["params"]

    @property
    def eps(self) -> float:
        return self.params["eps"]

    @property
    def h(self) -> float:
        return self.params["h"]

    @property
    def T(self) -> float:
        return self.params["T"]

    @property
    def K(self) -> float:
        return self.params["K"]

    @property
    def tol(self) -> float:
        return self.params["tol"]

    @property
    def solver(self) -> dict:
        return self.raw["solver"]

    @property
    def simulation(self) -> dict:
        return self.raw["simulation"]

    @property
    def residuals(self) -> dict:
        return self.raw["residuals"]

    @property
    def converge(self) -> dict:
        return self.raw["converge"]

    @property
    def estimates(self) -> dict:
        return self.raw["estimates"]

    @property
    def out_dir(self) -> Path:
        p = Path(self.raw["output"]["dir"])
        return p if p.is_absolute() else self.base_dir / p

    def domain(self) -> DomainSpec:
        return DomainSpec.from_dict(self.raw["domain"])

    def problem(self, eps: float | None = None) -> ProblemData:
        return problem_from_dict(self.raw, eps or self.eps, self.T, self.K, self.base_dir)

    def exact_pair(self):
        """Callables ``(u, v)`` for ``converge.exact``, or ``None`` for self-convergence."""
        ex = self.converge["exact"]
        if ex is None:
            return None
        dim = self.domain().dim
        return make_function(ex["u"], dim, self.base_dir), make_function(ex["v"], dim, self.base_dir)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)


def validate(raw: dict) -> dict:
    """Fill defaults and check every invariant; returns the completed mapping."""
    for section in ("domain", "data", "params"):
        if section not in raw:
            raise ConfigurationError("missing section", section)
    cfg = _merge(DEFAULTS, raw)
    try:
        dom = DomainSpec.from_dict(cfg["domain"])
    except ConfigurationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid domain: {exc}", "domain") from None

    p = cfg["params"]
    for key in ("eps", "T"):
        if key not in p:
            raise ConfigurationError("required", f"params.{key}")
        p[key] = _positive(p[key], f"params.{key}")
    p["h"] = _positive(p.get("h", p["eps"] / 4), "params.h")
    p["K"] = _positive(p["K"], "params.K")
    p["tol"] = _positive(p["tol"], "params.tol")
    if p["h"] > p["eps"] / 4 * (1 + 1e-12):
        raise ConfigurationError(f"h = {p['h']} exceeds eps/4 = {p['eps'] / 4}", "params.h")
    if p["K"] * p["eps"] ** 2 >= 1:
        raise ConfigurationError("K eps^2 must be < 1 (it is a switch probability)", "params.K")

    s = cfg["solver"]
    if s["scheme"] not in ("jacobi", "gauss_seidel"):
        raise ConfigurationError(f"unknown scheme {s['scheme']!r}", "solver.scheme")
    _count(s["max_iter"], "solver.max_iter", 0)
    _count(s["threads"], "solver.threads")

    sim = cfg["simulation"]
    _count(sim["n"], "simulation.n")
    _count(sim["seed"], "simulation.seed", 0)
    _count(sim["block_size"], "simulation.block_size")
    _count(sim["trace"], "simulation.trace", 0)
    for i, x in enumerate(sim["starts"]):
        if len(x) != dom.dim:
            raise ConfigurationError(f"start has {len(x)} coordinates, domain has {dom.dim}", f"simulation.starts[{i}]")
    for b in sim["boards"]:
        if b not in (1, 2):
            raise ConfigurationError(f"board must be 1 or 2, got {b!r}", "simulation.boards")
    if sim["t0"] is not None:
        sim["t0"] = _positive(sim["t0"], "simulation.t0")

    r = cfg["residuals"]
    if r["grad_floor"] is not None:
        r["grad_floor"] = _positive(r["grad_floor"], "residuals.grad_floor")
    _count(r["stride"], "residuals.stride")

    c = cfg["converge"]
    if not c["eps_list"]:
        raise ConfigurationError("empty list", "converge.eps_list")
    c["eps_list"] = [_positive(e, "converge.eps_list") for e in c["eps_list"]]
    c["h_ratio"] = _positive(c["h_ratio"], "converge.h_ratio")
    if c["h_ratio"] < 4:
        raise ConfigurationError("h_ratio must be >= 4 (h <= eps/4)", "converge.h_ratio")
    for e in c["eps_list"]:
        if p["K"] * e**2 >= 1:
            raise ConfigurationError(f"K eps^2 >= 1 at eps = {e}", "converge.eps_list")
    if c["stride"] != "eps":
        _count(c["stride"], "converge.stride")
    if c["exact"] is not None:
        if not isinstance(c["exact"], dict) or set(c["exact"]) != {"u", "v"}:
            raise ConfigurationError("expected a table with keys u and v", "converge.exact")
        for key in ("u", "v"):
            if isinstance(c["exact"][key], dict) and c["exact"][key].get("type") == "table":
                continue  # resolved against the config directory when loaded
            try:
                make_function(c["exact"][key], dom.dim)
            except ConfigurationError as exc:
                raise ConfigurationError(str(exc), f"converge.exact.{key}") from None

    e = cfg["estimates"]
    e["eps_list"] = [_positive(x, "estimates.eps_list") for x in e["eps_list"]]
    e["r0_list"] = [_positive(x, "estimates.r0_list") for x in e["r0_list"]]
    e["a"] = _positive(e["a"], "estimates.a")
    e["eta"] = _positive(e["eta"], "estimates.eta")
    _count(e["n"], "estimates.n")
    if e["opponent"] not in ("random", "pull", "push", "stay"):
        raise ConfigurationError(f"unknown opponent {e['opponent']!r}", "estimates.opponent")
    if e["seed"] is None:
        e["seed"] = sim["seed"]
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Read and validate a TOML run config; ``overrides`` are merged before validation."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc.strerror}", str(path)) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"invalid TOML: {exc}", str(path)) from None
    if overrides:
        raw = _merge(raw, overrides)
    return RunConfig(validate(raw), path.resolve().parent)


def config_from_dict(raw: dict, base_dir=None) -> RunConfig:
    return RunConfig(validate(raw), Path(base_dir) if base_dir else Path.cwd())
