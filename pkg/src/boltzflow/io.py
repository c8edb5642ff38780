"""Plain-text artifact formats.

Every file starts with ``#`` header lines of the form ``# key: value`` carrying
at least ``schema_version``; data rows follow as comma-separated floats
written with ``repr`` (shortest round-trip form) so that a round trip is
bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .grid import Grid
from .potential import GridDensity
from .samples import SampleSet

SCHEMA_VERSION = 1


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _fmt_row(row) -> str:
    return ",".join(repr(float(v)) for v in row)


def _header(fields: dict) -> str:
    lines = [f"# schema_version: {SCHEMA_VERSION}"]
    for key, val in fields.items():
        lines.append(f"# {key}: {json.dumps(val, sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _parse(text: str) -> tuple[dict, np.ndarray]:
    header = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].partition(":")
            if not sep:
                continue
            key = key.strip()
            val = val.strip()
            try:
                header[key] = json.loads(val)
            except json.JSONDecodeError:
                header[key] = val
            continue
        try:
            rows.append([float(tok) for tok in line.replace(",", " ").split()])
        except ValueError as exc:
            raise InvalidArgumentError(f"line {lineno}: {exc}") from None
    if header.get("schema_version") != SCHEMA_VERSION:
        raise InvalidArgumentError(f"unsupported schema_version {header.get('schema_version')!r}")
    if rows and len({len(r) for r in rows}) != 1:
        raise InvalidArgumentError("ragged data rows")
    return header, np.array(rows, dtype=float)


def format_table(header: dict, rows) -> str:
    rows = np.atleast_2d(np.asarray(rows, dtype=float)) if len(rows) else np.zeros((0, 0))
    return _header(header) + "".join(_fmt_row(r) + "\n" for r in rows)


def write_samples(path, s: SampleSet, extra: dict | None = None) -> None:
    header = {"kind": "sample_set", "dim": s.dim, "n": len(s), "provenance": s.provenance, "seed": s.seed,
              "meta": s.meta}
    if extra:
        header.update(extra)
    atomic_write_text(path, format_table(header, s.points))


def read_samples(path) -> SampleSet:
    header, data = _parse(Path(path).read_text(encoding="utf-8"))
    if header.get("kind") != "sample_set":
        raise InvalidArgumentError(f"{path} is not a sample-set table")
    dim = int(header["dim"])
    if data.size == 0:
        data = np.zeros((0, dim))
    if data.shape[1] != dim:
        raise InvalidArgumentError(f"{path}: rows have {data.shape[1]} columns, header says {dim}")
    return SampleSet(data, header.get("provenance", "reference"), header.get("seed"), header.get("meta") or {})


def write_density(path, rho: GridDensity, extra: dict | None = None) -> None:
    """Node table: one row per grid node with its coordinates then the value."""
    g = rho.grid
    header = {"kind": "grid_density", "lower": list(map(float, g.lower)), "upper": list(map(float, g.upper)),
              "shape": list(map(int, g.shape)), "beta": rho.beta, "log_z": rho.log_z}
    if extra:
        header.update(extra)
    rows = np.concatenate([g.nodes().reshape(-1, g.ndim), rho.values.reshape(-1, 1)], axis=1)
    atomic_write_text(path, format_table(header, rows))


def read_density(path) -> GridDensity:
    header, data = _parse(Path(path).read_text(encoding="utf-8"))
    if header.get("kind") != "grid_density":
        raise InvalidArgumentError(f"{path} is not a grid-density table")
    grid = Grid.box(header["lower"], header["upper"], header["shape"])
    values = data[:, -1].reshape(grid.shape)
    return GridDensity(grid, values, header.get("beta"), header.get("log_z", 0.0))


def read_table(path) -> tuple[dict, np.ndarray]:
    return _parse(Path(path).read_text(encoding="utf-8"))
