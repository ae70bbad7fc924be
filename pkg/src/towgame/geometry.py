"""Spatial domains, the space-time lattice and epsilon-ball stencils.

The continuum domain is one of three simple shapes (ball, box, annulus), all
of which satisfy a uniform exterior sphere condition by construction.  The
lattice is the global Cartesian lattice ``h * Z^N`` restricted to the domain
plus an exterior collar of width ``eps + h``; stencils are the lattice offsets
``d`` with ``|d| <= eps``.
"""

from __future__ import annotations

import enum
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, CoverageError

# relative slack for closed-ball membership and time exhaustion tests
_BALL_TOL = 1e-9
_TIME_TOL = 1e-9


class PointClass(str, enum.Enum):
    INTERIOR = "interior"
    LATERAL = "lateral_boundary_exit"
    TIME = "time_exit"


INTERIOR, LATERAL, TIME_EXIT = 0, 1, 2


@dataclass(frozen=True)
class DomainSpec:
    """Open domain in R^N.

    Use the :meth:`ball`, :meth:`box` and :meth:`annulus` constructors rather
    than filling the fields by hand.
    """

    kind: str
    dim: int
    center: tuple[float, ...] | None = None
    radius: float | None = None
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None
    r_in: float | None = None
    r_out: float | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError("dimension must be a positive integer", "domain.dim")
        if self.kind == "ball":
            if self.center is None or len(self.center) != self.dim:
                raise ConfigurationError("center must have N coordinates", "domain.center")
            if not (self.radius is not None and self.radius > 0):
                raise ConfigurationError("radius must be > 0", "domain.radius")
        elif self.kind == "box":
            if self.lo is None or self.hi is None or len(self.lo) != self.dim or len(self.hi) != self.dim:
                raise ConfigurationError("lo/hi must have N coordinates", "domain.lo")
            if any(a >= b for a, b in zip(self.lo, self.hi)):
                raise ConfigurationError("lo < hi must hold componentwise", "domain.lo")
        elif self.kind == "annulus":
            if self.center is None or len(self.center) != self.dim:
                raise ConfigurationError("center must have N coordinates", "domain.center")
            if not (self.r_in is not None and self.r_out is not None and 0 < self.r_in < self.r_out):
                raise ConfigurationError("need 0 < r_in < r_out", "domain.r_in")
        else:
            raise ConfigurationError(f"unknown domain kind {self.kind!r}", "domain.kind")

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> DomainSpec:
        center = tuple(float(c) for c in center)
        return cls("ball", len(center), center=center, radius=float(radius))

    @classmethod
    def box(cls, lo: Sequence[float], hi: Sequence[float]) -> DomainSpec:
        lo = tuple(float(c) for c in lo)
        return cls("box", len(lo), lo=lo, hi=tuple(float(c) for c in hi))

    @classmethod
    def annulus(cls, center: Sequence[float], r_in: float, r_out: float) -> DomainSpec:
        center = tuple(float(c) for c in center)
        return cls("annulus", len(center), center=center, r_in=float(r_in), r_out=float(r_out))

    @classmethod
    def from_dict(cls, d: dict) -> DomainSpec:
        kind = d.get("kind")
        try:
            if kind == "ball":
                return cls.ball(d["center"], d["radius"])
            if kind == "box":
                return cls.box(d["lo"], d["hi"])
            if kind == "annulus":
                return cls.annulus(d["center"], d["r_in"], d["r_out"])
        except KeyError as exc:
            raise ConfigurationError(f"missing key {exc.args[0]!r}", "domain") from None
        raise ConfigurationError(f"unknown domain kind {kind!r}", "domain.kind")

    def to_dict(self) -> dict:
        if self.kind == "ball":
            return {"kind": "ball", "center": list(self.center), "radius": self.radius}
        if self.kind == "box":
            return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}
        return {"kind": "annulus", "center": list(self.center), "r_in": self.r_in, "r_out": self.r_out}

    # -- point predicates (vectorized over the leading axis) -----------------

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return np.all((x > np.asarray(self.lo)) & (x < np.asarray(self.hi)), axis=-1)
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        if self.kind == "ball":
            return r < self.radius
        return (r > self.r_in) & (r < self.r_out)

    def distance(self, x) -> np.ndarray:
        """Euclidean distance to the closure of the domain (zero inside)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            gap = np.maximum(np.maximum(np.asarray(self.lo) - x, x - np.asarray(self.hi)), 0.0)
            return np.linalg.norm(gap, axis=-1)
        r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
        if self.kind == "ball":
            return np.maximum(r - self.radius, 0.0)
        return np.maximum(np.maximum(r - self.r_out, self.r_in - r), 0.0)

    def boundary_distance(self, x) -> np.ndarray:
        """Distance to the boundary for interior points (zero outside)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            d = np.minimum(x - np.asarray(self.lo), np.asarray(self.hi) - x).min(axis=-1)
        else:
            r = np.linalg.norm(x - np.asarray(self.center), axis=-1)
            if self.kind == "ball":
                d = self.radius - r
            else:
                d = np.minimum(r - self.r_in, self.r_out - r)
        return np.maximum(d, 0.0)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return np.asarray(self.lo), np.asarray(self.hi)
        r = self.radius if self.kind == "ball" else self.r_out
        c = np.asarray(self.center)
        return c - r, c + r

    def outward_normal(self, y) -> np.ndarray:
        """Unit outward normal at a boundary point ``y``."""
        y = np.asarray(y, dtype=float)
        if self.kind == "box":
            lo, hi = np.asarray(self.lo), np.asarray(self.hi)
            gaps = np.concatenate([y - lo, hi - y])
            k = int(np.argmin(np.abs(gaps)))
            n = np.zeros(self.dim)
            n[k % self.dim] = -1.0 if k < self.dim else 1.0
            return n
        d = y - np.asarray(self.center)
        d = d / np.linalg.norm(d)
        if self.kind == "annulus" and abs(np.linalg.norm(y - np.asarray(self.center)) - self.r_in) < abs(
            np.linalg.norm(y - np.asarray(self.center)) - self.r_out
        ):
            return -d
        return d


def _classify(domain: DomainSpec, x, t, time_tol: float) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), x.shape[:1])
    out = np.where(domain.contains(x), INTERIOR, LATERAL)
    return np.where(t <= time_tol, TIME_EXIT, out)


@dataclass(eq=False)
class SpaceTimeGrid:
    """Lattice nodes of the domain plus collar, with time levels ``m * eps**2``.

    Nodes are ordered interior first, then collar, each block in lexicographic
    order of the integer lattice index.  ``neighbors[i]`` lists the stencil of
    interior node ``i`` (center first, then offsets in lexicographic order).
    """

    spec: DomainSpec
    h: float
    eps: float
    T: float
    index: np.ndarray  # (n_nodes, N) integer lattice coordinates
    n_interior: int
    offsets: np.ndarray  # (P, N) integer stencil offsets
    neighbors: np.ndarray  # (n_interior, P) node ids
    times: np.ndarray
    clamped: bool
    _origin: np.ndarray = field(repr=False)
    _lookup: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_nodes(self) -> int:
        return len(self.index)

    @property
    def n_collar(self) -> int:
        return self.n_nodes - self.n_interior

    @property
    def M(self) -> int:
        return len(self.times) - 1

    @cached_property
    def coords(self) -> np.ndarray:
        return self.index * self.h

    @property
    def interior_coords(self) -> np.ndarray:
        return self.coords[: self.n_interior]

    @property
    def collar_coords(self) -> np.ndarray:
        return self.coords[self.n_interior :]

    @cached_property
    def far_interior(self) -> np.ndarray:
        """Mask of interior nodes farther than eps from the boundary."""
        return self.spec.boundary_distance(self.interior_coords) > self.eps

    def stencil(self, node: int) -> np.ndarray:
        return self.neighbors[node]

    def node_id(self, idx) -> np.ndarray:
        """Node ids for integer lattice indices (``-1`` where no node exists)."""
        idx = np.asarray(idx, dtype=np.int64) - self._origin
        shape = np.asarray(self._lookup.shape)
        ok = np.all((idx >= 0) & (idx < shape), axis=-1)
        out = np.full(idx.shape[:-1], -1, dtype=np.int64)
        safe = np.where(ok[..., None], idx, 0)
        out[ok] = self._lookup[tuple(np.moveaxis(safe, -1, 0))][ok]
        return out

    @cached_property
    def average_operator(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Equal-weight stencil averages split into interior and collar columns."""
        n, P = self.neighbors.shape
        rows = np.repeat(np.arange(n), P)
        cols = self.neighbors.ravel()
        w = np.full(rows.shape, 1.0 / P)
        A = sp.csr_matrix((w, (rows, cols)), shape=(n, self.n_nodes))
        A.sum_duplicates()
        return A[:, : self.n_interior].tocsr(), A[:, self.n_interior :].tocsr()

    def classify(self, x, t) -> np.ndarray:
        return _classify(self.spec, x, t, _TIME_TOL * self.eps**2)

    def interpolate(self, values: np.ndarray, points, levels=None) -> np.ndarray:
        """Multilinear interpolation of nodal values at arbitrary points.

        ``values`` is ``(n_nodes,)`` or ``(L, n_nodes)``; in the latter case
        ``levels`` selects the row used for each point.
        """
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, self.dim)
        scaled = flat / self.h
        fl = np.floor(scaled)
        base = fl.astype(np.int64) - self._origin
        frac = scaled - fl
        shape = self._lookup.shape
        strides = np.cumprod((1,) + shape[:0:-1])[::-1]
        inside = np.ones(len(flat), dtype=bool)
        for k in range(self.dim):
            inside &= (base[:, k] >= 0) & (base[:, k] < shape[k] - 1)
        if not inside.all():
            bad = flat[np.argmin(inside)]
            raise CoverageError(f"point {bad.tolist()} lies outside the lattice coverage")
        lin = base @ strides
        # corner weights and linear offsets, built one axis at a time
        weights, offs = [np.ones(len(flat))], [0]
        for k in range(self.dim):
            f = frac[:, k]
            g = 1.0 - f
            weights = [w * g for w in weights] + [w * f for w in weights]
            offs = offs + [o + int(strides[k]) for o in offs]
        table = self._lookup.ravel()
        ids = np.stack([table[lin + o] for o in offs])
        if ids.min() < 0:
            bad = flat[np.argmax((ids < 0).any(axis=0))]
            raise CoverageError(f"point {bad.tolist()} lies outside the lattice coverage")
        if levels is None:
            vals = values[ids]
        else:
            lev = np.broadcast_to(np.asarray(levels), pts.shape[:-1]).ravel()
            vals = values[lev, ids]
        out = weights[0] * vals[0]
        for w, v in zip(weights[1:], vals[1:]):
            out += w * v
        return out.reshape(pts.shape[:-1])

    def stencil_interpolate(self, values: np.ndarray, x, levels) -> np.ndarray:
        """Interpolated ``values[levels]`` at ``x + offsets * h`` for every stencil offset.

        All shifted points share the cell fraction of ``x``, so the corner
        weights are computed once per point.  Returns shape ``(len(x), P)``.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        scaled = x / self.h
        fl = np.floor(scaled)
        base = fl.astype(np.int64) - self._origin
        frac = scaled - fl
        shape = self._lookup.shape
        strides = np.cumprod((1,) + shape[:0:-1])[::-1]
        lo, hi = self.offsets.min(axis=0), self.offsets.max(axis=0)
        for k in range(self.dim):
            if np.any(base[:, k] + lo[k] < 0) or np.any(base[:, k] + hi[k] + 1 >= shape[k]):
                raise CoverageError("stencil around a point leaves the lattice coverage")
        lin = (base @ strides)[:, None] + (self.offsets @ strides)[None, :]
        weights, offs = [np.ones(len(x))], [0]
        for k in range(self.dim):
            f = frac[:, k]
            g = 1.0 - f
            weights = [w * g for w in weights] + [w * f for w in weights]
            offs = offs + [o + int(strides[k]) for o in offs]
        table = self._lookup.ravel()
        lev = np.broadcast_to(np.asarray(levels), (len(x),))[:, None]
        out = np.zeros(lin.shape)
        for w, o in zip(weights, offs):
            ids = table[lin + o]
            if ids.min() < 0:
                raise CoverageError("stencil around a point leaves the lattice coverage")
            out += w[:, None] * values[lev, ids]
        return out

    def report(self) -> str:
        """Plain-text summary: node counts per class and stencil-size histogram."""
        sizes = Counter(int(s) for s in (self.neighbors >= 0).sum(axis=1))
        lines = [
            f"domain: {self.spec.to_dict()}",
            f"N = {self.dim}  h = {self.h!r}  eps = {self.eps!r}  T = {self.T!r}",
            f"time levels: {len(self.times)} (M = {self.M}){'  [top level clamped to T]' if self.clamped else ''}",
            f"nodes: total {self.n_nodes}  interior {self.n_interior}  collar {self.n_collar}",
            f"far-interior nodes (dist > eps): {int(self.far_interior.sum())}",
            "stencil size histogram:",
        ]
        lines += [f"  {k}: {v}" for k, v in sorted(sizes.items())]
        return "\n".join(lines) + "\n"


def stencil_offsets(dim: int, ratio: float) -> np.ndarray:
    """Integer offsets ``d`` with ``|d| <= ratio``; center first, then lexicographic."""
    r = int(math.floor(ratio + _BALL_TOL))
    rng = np.arange(-r, r + 1)
    cand = np.array(list(itertools.product(rng, repeat=dim)), dtype=np.int64)
    keep = (cand**2).sum(axis=1) <= ratio**2 * (1 + _BALL_TOL)
    cand = cand[keep]
    center = np.all(cand == 0, axis=1)
    return np.concatenate([cand[center], cand[~center]])


def time_levels(eps: float, T: float) -> tuple[np.ndarray, bool]:
    e2 = eps * eps
    M = max(1, math.ceil(T / e2 - _TIME_TOL))
    times = np.arange(M + 1) * e2
    clamped = abs(times[-1] - T) > _TIME_TOL * e2
    times[-1] = T if clamped else times[-1]
    return times, clamped


def build_grid(spec: DomainSpec, h: float, eps: float, T: float) -> SpaceTimeGrid:
    """Lattice of spacing ``h`` over the domain and its ``eps + h`` collar."""
    if not (h > 0 and eps > 0 and T > 0):
        raise ConfigurationError("h, eps and T must be positive")
    if h > eps / 4 * (1 + 1e-12):
        raise ConfigurationError(f"h/eps = {h / eps:.6g} exceeds the required ratio 1/4", "h")

    width = eps + h
    lo, hi = spec.bounding_box()
    ilo = np.floor((lo - width) / h).astype(np.int64) - 1
    ihi = np.ceil((hi + width) / h).astype(np.int64) + 1
    axes = [np.arange(a, b + 1) for a, b in zip(ilo, ihi)]
    index = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
    x = index * h
    inside = spec.contains(x)
    collar = ~inside & (spec.distance(x) < width * (1 - _BALL_TOL))
    if not inside.any():
        raise ConfigurationError("grid has no interior nodes (domain smaller than h)", "h")
    index = np.concatenate([index[inside], index[collar]])
    n_int = int(inside.sum())

    shape = tuple(int(b - a + 1) for a, b in zip(ilo, ihi))
    lookup = np.full(shape, -1, dtype=np.int64)
    lookup[tuple((index - ilo).T)] = np.arange(len(index))

    offsets = stencil_offsets(spec.dim, eps / h)
    nb_idx = index[:n_int, None, :] + offsets[None, :, :] - ilo
    neighbors = lookup[tuple(np.moveaxis(nb_idx, -1, 0))]
    if np.any(neighbors < 0):
        raise ConfigurationError("collar does not cover every interior stencil")

    times, clamped = time_levels(eps, T)
    return SpaceTimeGrid(
        spec=spec,
        h=float(h),
        eps=float(eps),
        T=float(T),
        index=index,
        n_interior=n_int,
        offsets=offsets,
        neighbors=neighbors,
        times=times,
        clamped=bool(clamped),
        _origin=ilo,
        _lookup=lookup,
    )


def classify_point(grid: SpaceTimeGrid, x, t: float) -> PointClass:
    code = int(grid.classify(np.asarray(x, dtype=float)[None, :], t)[0])
    return (PointClass.INTERIOR, PointClass.LATERAL, PointClass.TIME)[code]


def classify_points(domain: DomainSpec, x, t, eps: float) -> np.ndarray:
    """Vectorized classification codes (INTERIOR, LATERAL, TIME_EXIT) off the lattice."""
    return _classify(domain, x, t, _TIME_TOL * eps**2)
