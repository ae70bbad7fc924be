"""On-disk formats: the binary field pack, per-level CSVs, tables and traces.

Field pack layout (all little-endian)::

    magic      8 bytes   b"TOWPDE1\\0"
    version    u32       1
    N          u32       space dimension
    h, eps, K, T         4 x f64
    M          u64       last time level (levels 0..M)
    nodes      u64       node count
    interior   u64       interior node count (interior nodes come first)
    times      (M+1) x f64
    coords     nodes x N x f64 (row-major)
    per level m = 0..M:  u block (nodes x f64) then v block (nodes x f64)

Floats in CSV files are written with ``repr`` so every value round-trips and
no locale setting can change the output.
"""

from __future__ import annotations

import csv
import json
import os
import struct
from pathlib import Path

import numpy as np

from .dpp import ValuePair
from .errors import FormatError

MAGIC = b"TOWPDE1\0"
VERSION = 1
_HEAD = struct.Struct("<8sII4dQQQ")
_F8 = np.dtype("<f8")


def _atomic_write(path: Path, payload: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def pack_bytes(pair: ValuePair) -> bytes:
    M, nodes, N = pair.M, pair.u.shape[1], pair.dim
    T = float(pair.times[-1])
    head = _HEAD.pack(MAGIC, VERSION, N, pair.h, pair.eps, pair.K, T, M, nodes, pair.n_interior)
    body = np.empty((M + 1, 2, nodes), dtype=_F8)
    body[:, 0] = pair.u
    body[:, 1] = pair.v
    return b"".join([
        head,
        np.asarray(pair.times, dtype=_F8).tobytes(),
        np.ascontiguousarray(pair.coords, dtype=_F8).tobytes(),
        body.tobytes(),
    ])


def write_field_pack(pair: ValuePair, path) -> Path:
    path = Path(path)
    _atomic_write(path, pack_bytes(pair))
    return path


def unpack_bytes(buf: bytes) -> ValuePair:
    if len(buf) < 8 or buf[:8] != MAGIC:
        raise FormatError("bad magic: not a field pack", offset=0)
    if len(buf) < _HEAD.size:
        raise FormatError(f"truncated header ({len(buf)} of {_HEAD.size} bytes)", offset=len(buf))
    _, version, N, h, eps, K, T, M, nodes, n_int = _HEAD.unpack_from(buf, 0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version} (expected {VERSION})", offset=8)
    if N < 1 or n_int > nodes:
        raise FormatError(f"inconsistent header (N={N}, nodes={nodes}, interior={n_int})", offset=12)
    off = _HEAD.size
    sizes = [(M + 1) * 8, nodes * N * 8, (M + 1) * 2 * nodes * 8]
    expected = off + sum(sizes)
    if len(buf) != expected:
        raise FormatError(
            f"size mismatch: header implies {expected} bytes, file has {len(buf)}", offset=min(len(buf), expected)
        )
    times = np.frombuffer(buf, dtype=_F8, count=M + 1, offset=off).astype(float)
    off += sizes[0]
    coords = np.frombuffer(buf, dtype=_F8, count=nodes * N, offset=off).astype(float).reshape(nodes, N)
    off += sizes[1]
    body = np.frombuffer(buf, dtype=_F8, count=(M + 1) * 2 * nodes, offset=off).astype(float)
    body = body.reshape(M + 1, 2, nodes)
    return ValuePair(
        u=body[:, 0].copy(), v=body[:, 1].copy(), eps=eps, h=h, K=K,
        times=times, coords=coords, n_interior=int(n_int),
    )


def read_field_pack(path) -> ValuePair:
    with open(path, "rb") as fh:
        return unpack_bytes(fh.read())


# ------------------------------------------------------------------- tables


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(_cell(v) for v in np.ravel(value))
    return str(value)


def write_table(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    """CSV with a header row; columns default to the first row's keys."""
    path = Path(path)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def read_table_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_level_csvs(pair: ValuePair, directory) -> list[Path]:
    """One CSV per level: ``x1..xN, u, v`` for every node (interior first)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cols = [f"x{k + 1}" for k in range(pair.dim)] + ["u", "v"]
    width = max(4, len(str(pair.M)))
    out = []
    for m in range(pair.M + 1):
        path = directory / f"level_{m:0{width}d}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for x, u, v in zip(pair.coords, pair.u[m], pair.v[m]):
                w.writerow([repr(float(c)) for c in x] + [repr(float(u)), repr(float(v))])
        out.append(path)
    return out


def read_level_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return arr[:, :-2], arr[:, -2], arr[:, -1]


def write_jsonl(path, records) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def read_jsonl(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_traces(path, traces, start_index: int = 0) -> Path:
    """Per-trajectory JSONL: ``{"trajectory": i, "states": [[x, t, board], ...]}``."""
    return write_jsonl(
        path,
        ({"trajectory": start_index + i, "states": [[list(x), t, b] for x, t, b in tr]} for i, tr in enumerate(traces)),
    )


def write_json(path, obj) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# --------------------------------------------------------- report exporters


def residual_rows(report) -> list[dict]:
    return report.per_level()


def convergence_rows(table) -> list[dict]:
    """Convergence table rows without wall-clock columns (kept out so reruns are bit-identical)."""
    keep = [
        "eps", "h", "nodes", "levels", "distance_to_reference", "distance_to_previous",
        "parabolic_sup", "parabolic_mean", "elliptic_sup", "elliptic_mean", "masked_fraction",
    ]
    return [{k: getattr(r, k) for k in keep} for r in table.rows]


def estimate_rows(suite) -> list[dict]:
    cols = [
        "game", "eps", "r0", "n", "mean_tau", "se_tau", "tau_bound", "tau_ratio", "mean_dist2", "se_dist2",
        "dist2_bound", "dist2_ratio", "p_near", "p_long", "p_time", "mu_mean", "mu_se", "mu_start",
    ]
    return [{c: getattr(r, c) for c in cols} for r in suite.rows]
