"""Run manifests and tabular output (CSV / JSON) with round-trip float precision."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .rng import RNG_ALGORITHM

OUT_DIR_ENV = "STEINLAB_OUT_DIR"
TAIL_COLUMNS = ("t", "empirical_prob", "bound_prob", "n_samples", "std_err")


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int
    rng_algorithm: str = RNG_ALGORITHM
    chains: int = 1
    burnin: int = 0
    thin: int = 0
    code_version: str = __version__
    wall_time_seconds: float = 0.0
    python: str = field(default_factory=platform.python_version)
    numpy: str = np.__version__

    REQUIRED = ("command", "params", "seed", "rng_algorithm", "chains", "burnin", "thin", "code_version")

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @classmethod
    def validate(cls, data: dict) -> list[str]:
        """Names of required manifest fields that are missing."""
        return [k for k in cls.REQUIRED if k not in data]


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(tuple(values))

    def as_records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def tail_table(t, empirical, bound, n_samples, std_err=None) -> Table:
    """Rows ``(t, empirical_prob, bound_prob, n_samples, std_err)``.

    ``std_err`` defaults to ``sqrt(p(1-p)/n_samples)`` (0 for exact laws, where
    ``n_samples`` is 0).
    """
    table = Table(TAIL_COLUMNS)
    for k, (ti, p, b) in enumerate(zip(t, empirical, bound)):
        if std_err is not None:
            se = float(std_err[k])
        else:
            se = math.sqrt(p * (1 - p) / n_samples) if n_samples else 0.0
        table.add(float(ti), float(p), float(b), int(n_samples), se)
    return table


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def _dump_json(payload) -> str:
    # json's repr of floats already round-trips; keep 17 significant digits explicitly
    def conv(o):
        if isinstance(o, float):
            return float(format(o, ".17g"))
        if isinstance(o, dict):
            return {k: conv(v) for k, v in o.items()}
        if isinstance(o, list):
            return [conv(v) for v in o]
        return o

    return json.dumps(conv(_jsonable(payload)), indent=2, sort_keys=False) + "\n"


def render(table: Table, fmt: str, manifest: RunManifest | None = None) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for r in table.rows:
            w.writerow([fmt_value(v) for v in r])
        return buf.getvalue()
    if fmt == "json":
        payload = {"rows": table.as_records()}
        if manifest is not None:
            payload["manifest"] = manifest.to_dict()
        return _dump_json(payload)
    raise ValueError(f"unknown format {fmt!r}")


def emit(table: Table, fmt: str, path: str | os.PathLike, manifest: RunManifest | None = None) -> list[Path]:
    """Write ``table`` to ``path`` and the manifest next to it.

    CSV gets a sibling ``<path>.manifest.json``; JSON embeds the manifest
    under ``"manifest"`` and also writes the sibling file. ``OSError``
    propagates to the caller.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(table, fmt, manifest))
    written = [path]
    if manifest is not None:
        mpath = path.with_name(path.name + ".manifest.json")
        mpath.write_text(_dump_json(manifest.to_dict()))
        written.append(mpath)
    return written


def _parse_cell(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path: str | os.PathLike) -> Table:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    table = Table(tuple(rows[0]))
    for r in rows[1:]:
        table.rows.append(tuple(_parse_cell(c) for c in r))
    return table


def read_json(path: str | os.PathLike) -> tuple[Table, dict | None]:
    with open(path) as fh:
        data = json.load(fh)
    recs = data["rows"]
    cols = tuple(recs[0]) if recs else ()
    table = Table(cols, [tuple(r[c] for c in cols) for r in recs])
    return table, data.get("manifest")


def default_out_dir() -> Path | None:
    val = os.environ.get(OUT_DIR_ENV)
    return Path(val) if val else None
