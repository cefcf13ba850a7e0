"""Portable on-disk formats.

Grid file (``.grid``)::

    b"KIRLGRD1\\n"
    b"<rows> <cols> <channels>\\n"          ASCII decimal
    channels*rows*cols float64, little-endian, channel-major then row-major

Model file (``.fcn``)::

    b"KIRLFCN1"
    uint32 LE layer count
    per layer: uint32 LE out, in, kh, kw;
               out*in*kh*kw float64 LE weights (row-major over out, in, kh, kw);
               out float64 LE biases

Trajectory file (``.traj``): CSV with header ``t,row,col,orientation,action``.

Run configuration: ``key = value`` lines, ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import ArgumentError, ConfigError, FormatError
from .trajectory import Trajectory

GRID_MAGIC = b"KIRLGRD1\n"
MODEL_MAGIC = b"KIRLFCN1"
TRAJ_HEADER = ["t", "row", "col", "orientation", "action"]
MAX_GRID_VALUES = 1 << 28  # 2 GiB of payload

_F64 = np.dtype("<f8")


# --- grids -----------------------------------------------------------------

def encode_grid(grid) -> bytes:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 2:
        grid = grid[None]
    if grid.ndim != 3:
        raise ArgumentError(f"grid must be 2-D or 3-D, got shape {grid.shape}")
    if not np.all(np.isfinite(grid)):
        raise ArgumentError("grid contains non-finite values")
    c, h, w = grid.shape
    header = GRID_MAGIC + f"{h} {w} {c}\n".encode("ascii")
    return header + grid.astype(_F64).tobytes(order="C")


def decode_grid(data: bytes) -> np.ndarray:
    """Parse grid bytes into a ``(channels, rows, cols)`` float64 array."""
    if not data.startswith(GRID_MAGIC):
        raise FormatError(f"bad magic at byte 0: expected {GRID_MAGIC!r}, got {data[:len(GRID_MAGIC)]!r}")
    off = len(GRID_MAGIC)
    end = data.find(b"\n", off, off + 64)
    if end < 0:
        raise FormatError(f"unterminated dimension line at byte {off}")
    fields = data[off:end].split(b" ")
    try:
        h, w, c = (int(f) for f in fields)
        if len(fields) != 3:
            raise ValueError
    except ValueError:
        raise FormatError(f"malformed dimension line at byte {off}: {data[off:end]!r}") from None
    if min(h, w, c) < 1:
        raise FormatError(f"non-positive dimension at byte {off}: {h} {w} {c}")
    count = h * w * c
    if count > MAX_GRID_VALUES:
        raise FormatError(f"dimension overflow at byte {off}: {h}x{w}x{c} values")
    start = end + 1
    expected = start + 8 * count
    if len(data) != expected:
        what = "truncated" if len(data) < expected else "trailing bytes in"
        raise FormatError(f"{what} payload starting at byte {start}: expected {expected} bytes total, "
                          f"got {len(data)}")
    grid = np.frombuffer(data, dtype=_F64, count=count, offset=start).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(grid))
    if bad.size:
        raise FormatError(f"non-finite value at byte {start + 8 * bad[0]}")
    return grid.reshape(c, h, w)


def write_grid(path, grid) -> None:
    Path(path).write_bytes(encode_grid(grid))


def read_grid(path) -> np.ndarray:
    return decode_grid(Path(path).read_bytes())


# --- trajectories ----------------------------------------------------------

def write_traj(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJ_HEADER)
        writer.writerows(traj.records().tolist())


def read_traj(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRAJ_HEADER:
        raise FormatError(f"{path}: line 1: expected header {','.join(TRAJ_HEADER)}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            t, r, c, k, a = (int(x) for x in row)
            if len(row) != 5:
                raise ValueError
        except ValueError:
            raise FormatError(f"{path}: line {lineno}: expected 5 integers, got {row}") from None
        if t != len(records) + 1:
            raise FormatError(f"{path}: line {lineno}: t={t}, expected {len(records) + 1}")
        records.append((r, c, k, a))
    return Trajectory.from_records(records)


# --- models ----------------------------------------------------------------

def encode_model(params) -> bytes:
    parts = [MODEL_MAGIC, struct.pack("<I", len(params.weights))]
    for wt, b in zip(params.weights, params.biases):
        parts.append(struct.pack("<4I", *wt.shape))
        parts.append(np.ascontiguousarray(wt, dtype=_F64).tobytes())
        parts.append(np.ascontiguousarray(b, dtype=_F64).tobytes())
    return b"".join(parts)


def decode_model(data: bytes):
    from .reward_net import FcnParams

    if not data.startswith(MODEL_MAGIC):
        raise FormatError(f"bad magic at byte 0: expected {MODEL_MAGIC!r}")
    off = len(MODEL_MAGIC)

    def take(nbytes, what):
        nonlocal off
        if off + nbytes > len(data):
            raise FormatError(f"truncated {what} at byte {off}: need {nbytes} bytes, "
                              f"{len(data) - off} left")
        chunk = data[off:off + nbytes]
        off += nbytes
        return chunk

    (n_layers,) = struct.unpack("<I", take(4, "layer count"))
    if not 1 <= n_layers <= 64:
        raise FormatError(f"implausible layer count {n_layers} at byte {off - 4}")
    weights, biases = [], []
    for layer in range(n_layers):
        dims = struct.unpack("<4I", take(16, f"layer {layer} dims"))
        if np.prod(dims, dtype=np.int64) > MAX_GRID_VALUES:
            raise FormatError(f"dimension overflow in layer {layer} at byte {off - 16}")
        n_w = int(np.prod(dims))
        wt = np.frombuffer(take(8 * n_w, f"layer {layer} weights"), dtype=_F64).reshape(dims)
        b = np.frombuffer(take(8 * dims[0], f"layer {layer} biases"), dtype=_F64)
        weights.append(wt.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(data):
        raise FormatError(f"trailing bytes after byte {off}")
    if not all(np.all(np.isfinite(a)) for a in weights + biases):
        raise FormatError("model contains non-finite parameters")
    return FcnParams(tuple(weights), tuple(biases))


def save_model(path, params) -> None:
    Path(path).write_bytes(encode_model(params))


def load_model(path):
    return decode_model(Path(path).read_bytes())


# --- images ----------------------------------------------------------------

def export_pgm(grid, path, vmin: float, vmax: float) -> np.ndarray:
    """Write a binary (P5) 8-bit PGM; values are scaled linearly and clamped.

    Returns the pixel array that was written.
    """
    if not vmin < vmax:
        raise ArgumentError(f"need min < max, got {vmin} >= {vmax}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ArgumentError(f"PGM export needs a 2-D grid, got shape {grid.shape}")
    scaled = np.clip((grid - vmin) / (vmax - vmin), 0.0, 1.0) * 255.0
    pixels = np.floor(scaled + 0.5).astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())
    return pixels


# --- run configuration -----------------------------------------------------

def parse_config_text(text: str, source: str = "<config>"):
    """Parse ``key = value`` text into a validated TrainConfig."""
    from .irl_trainer import TrainConfig

    fields = TrainConfig.field_types()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        kind = fields[key]
        try:
            values[key] = kind(value) if kind is not str else value
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: malformed value for {key!r}: {value!r}") from None
    if "gamma" in values and not 0.0 <= values["gamma"] < 1.0:
        raise ConfigError(f"{source}: gamma must lie in [0, 1), got {values['gamma']}")
    try:
        return TrainConfig(**values)
    except ArgumentError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


# --- dataset directories ---------------------------------------------------

def write_meta(path, sample) -> None:
    r, c, k = sample.start
    gr, gc = sample.goal
    Path(path).write_text(
        f"behavior={sample.behavior}\nseed={sample.seed}\nstart={r},{c},{k}\n"
        f"goal={gr},{gc}\nresolution_m={sample.resolution_m!r}\n")


def read_meta(path) -> dict:
    meta = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: line {lineno}: expected key=value")
        meta[key.strip()] = value.strip()
    try:
        return {
            "behavior": meta.get("behavior", ""),
            "seed": int(meta.get("seed", 0)),
            "start": tuple(int(x) for x in meta["start"].split(",")),
            "goal": tuple(int(x) for x in meta["goal"].split(",")),
            "resolution_m": float(meta.get("resolution_m", 0.25)),
        }
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: bad or missing field ({exc})") from None


def write_dataset(directory, samples) -> None:
    """Write ``scene_%04d.grid``, ``demo_%04d.traj`` and ``meta_%04d.txt`` per sample."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(samples):
        write_grid(d / f"scene_{i:04d}.grid", s.scene)
        write_traj(d / f"demo_{i:04d}.traj", s.trajectory)
        write_meta(d / f"meta_{i:04d}.txt", s)


def read_dataset(directory):
    from .errors import DataError
    from .scene_synth import DemoSample

    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"dataset directory {d} does not exist")
    scenes = sorted(d.glob("scene_*.grid"))
    if not scenes:
        raise DataError(f"no scene_*.grid files in {d}")
    out = []
    for scene_path in scenes:
        tag = scene_path.stem.split("_", 1)[1]
        traj_path, meta_path = d / f"demo_{tag}.traj", d / f"meta_{tag}.txt"
        for p in (traj_path, meta_path):
            if not p.exists():
                raise DataError(f"missing {p.name} for {scene_path.name}")
        meta = read_meta(meta_path)
        out.append(DemoSample(read_grid(scene_path), read_traj(traj_path), meta["start"],
                              meta["goal"], meta["behavior"], meta["seed"],
                              resolution_m=meta["resolution_m"]))
    return out
