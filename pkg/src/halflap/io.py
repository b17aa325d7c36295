"""Plain-text field dumps, key=value reports and CSV tables."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .grid import ScalarField, UniformGrid

HEADER = "halflap-field v1"


def fmt(x) -> str:
    """Locale-free text for a number; floats round-trip exactly."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _join(values) -> str:
    return ",".join(fmt(v) for v in values)


def dump_field(path, fld: ScalarField) -> tuple[Path, Path]:
    """Write ``path`` (header + row-major values) and ``path.mask`` (0/1 per line)."""
    path = Path(path)
    g = fld.grid
    head = (f"{HEADER}; dims={g.ndim}; counts={_join(g.counts)}; "
            f"origins={_join(g.origins)}; spacings={_join(g.spacings)}")
    with open(path, "w", newline="\n") as fh:
        fh.write(head + "\n")
        fh.writelines(fmt(x) + "\n" for x in fld.values.ravel(order="C"))
    mpath = path.with_name(path.name + ".mask")
    with open(mpath, "w", newline="\n") as fh:
        fh.writelines("1\n" if m else "0\n" for m in fld.mask.ravel(order="C"))
    return path, mpath


def load_field(path) -> ScalarField:
    path = Path(path)
    with open(path) as fh:
        head = fh.readline().strip()
        values = np.array([float(line) for line in fh if line.strip()])
    parts = [p.strip() for p in head.split(";")]
    if parts[0] != HEADER:
        raise ValueError(f"not a field dump: {path}")
    meta = dict(p.split("=", 1) for p in parts[1:])
    counts = [int(c) for c in meta["counts"].split(",")]
    origins = [float(c) for c in meta["origins"].split(",")]
    spacings = [float(c) for c in meta["spacings"].split(",")]
    if int(meta["dims"]) != len(counts):
        raise ValueError("dims does not match counts")
    grid = UniformGrid(tuple(origins), tuple(spacings), tuple(counts))
    if values.size != int(np.prod(counts)):
        raise ValueError(f"expected {int(np.prod(counts))} values, found {values.size}")
    mpath = path.with_name(path.name + ".mask")
    mask = None
    if mpath.exists():
        with open(mpath) as fh:
            mask = np.array([line.strip() == "1" for line in fh if line.strip()]).reshape(counts)
    return ScalarField(grid, values.reshape(counts), mask)


def write_report(path, items: Mapping) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        for k, v in items.items():
            fh.write(f"{k}={fmt(v)}\n")
    return path


def read_report(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.rstrip("\n").split("=", 1)
                out[k] = v
    return out


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row width does not match the header")
            w.writerow([fmt(x) for x in row])
    return path
