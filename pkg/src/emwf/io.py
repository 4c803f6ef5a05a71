"""File formats: binary field dumps, deterministic CSV, record directories.

Binary dumps start with a fixed 64-byte little-endian header::

    magic   8 bytes   b"EMWF0001"
    dims    uint32
    kind    uint32    0 = complex field (interleaved re/im doubles), 1 = real field
    N[4]    uint32    points per axis, unused axes 0
    L[4]    float64   extent per axis, unused axes 0.0

followed by the row-major samples as little-endian doubles.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .grid import Grid, Units

MAGIC = b"EMWF0001"
HEADER = struct.Struct("<8sII4I4d")
assert HEADER.size == 64
KIND_COMPLEX = 0
KIND_REAL = 1
MAX_AXES = 4


def fmt(value) -> str:
    """Shortest round-tripping text for a number (deterministic across runs)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_field(path, values: np.ndarray, extents) -> Path:
    """Dump a real or complex array with its box extents."""
    values = np.asarray(values)
    shape = values.shape
    if not 1 <= len(shape) <= MAX_AXES:
        raise ValueError(f"binary dumps support 1..{MAX_AXES} axes, got {len(shape)}")
    if len(extents) != len(shape):
        raise ValueError("one extent per axis required")
    kind = KIND_COMPLEX if np.iscomplexobj(values) else KIND_REAL
    n = list(shape) + [0] * (MAX_AXES - len(shape))
    ext = [float(e) for e in extents] + [0.0] * (MAX_AXES - len(shape))
    header = HEADER.pack(MAGIC, len(shape), kind, *n, *ext)
    if kind == KIND_COMPLEX:
        body = np.ascontiguousarray(values, dtype="<c16").tobytes()  # re/im interleaved
    else:
        body = np.ascontiguousarray(values, dtype="<f8").tobytes()
    path = Path(path)
    path.write_bytes(header + body)
    return path


def read_field(path) -> tuple[np.ndarray, tuple[float, ...]]:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError("file too short for header")
    magic, dims, kind, *rest = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    shape = tuple(rest[:dims])
    ext = tuple(rest[MAX_AXES:MAX_AXES + dims])
    dtype = "<c16" if kind == KIND_COMPLEX else "<f8"
    data = np.frombuffer(raw, dtype=dtype, offset=HEADER.size)
    if data.size != int(np.prod(shape)):
        raise ValueError("payload size does not match header")
    return data.reshape(shape).astype(np.complex128 if kind == KIND_COMPLEX else float), ext


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def expectation_rows(record):
    d = record.grid.dims
    header = ["t"] + [f"x{a}" for a in range(d)] + [f"p{a}" for a in range(d)] + ["E"]
    rows = ([t, *x, *p, e[0]] for t, x, p, e in
            zip(record.times, record.positions, record.momenta, record.energies))
    return header, rows


def write_record(record, directory, snapshots: bool = False) -> list[Path]:
    """Serialize a trajectory record: ``meta.json``, ``expectations.csv`` and optional dumps."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "kind": record.kind,
        "grid": {"extents": list(record.grid.extents), "points": list(record.grid.points)},
        "units": {"hbar": record.units.hbar, "masses": list(record.units.masses), "c": record.units.c},
        "dt": record.dt,
        "save_stride": record.save_stride,
        "n_saved": len(record),
        "potential": None if record.potential is None else record.potential.describe(),
        "metadata": record.metadata,
    }
    out = [write_json(directory / "meta.json", meta)]
    header, rows = expectation_rows(record)
    out.append(write_csv(directory / "expectations.csv", header, rows))
    if snapshots and record.snapshots is not None:
        snapdir = directory / "snapshots"
        snapdir.mkdir(exist_ok=True)
        for i, amp in enumerate(record.snapshots):
            out.append(write_field(snapdir / f"snap_{i:05d}.bin", amp, record.grid.extents))
    return out


def read_record(directory):
    """Inverse of :func:`write_record` (expectations and snapshots; energies only as totals)."""
    from .dynamics import TrajectoryRecord

    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    grid = Grid(tuple(meta["grid"]["extents"]), tuple(meta["grid"]["points"]))
    u = meta["units"]
    units = Units(u["hbar"], tuple(u["masses"]), u["c"])
    _, data = read_csv(directory / "expectations.csv")
    d = grid.dims
    snapdir = directory / "snapshots"
    snaps = None
    if snapdir.is_dir():
        files = sorted(snapdir.glob("snap_*.bin"))
        snaps = np.array([read_field(f)[0] for f in files])
    n = len(data)
    energies = np.column_stack([data[:, -1], np.full(n, np.nan), np.full(n, np.nan)])
    return TrajectoryRecord(
        grid=grid, units=units, times=data[:, 0], positions=data[:, 1:1 + d],
        momenta=data[:, 1 + d:1 + 2 * d], energies=energies, forces=np.full((n, d), np.nan),
        norms=np.ones(n), snapshots=snaps, dt=meta["dt"], save_stride=meta["save_stride"],
        kind=meta["kind"], metadata=meta["metadata"],
    )
