"""
Text formats: path CSV files and generic 17-significant-digit CSV tables.

Path file layout::

    # hurst=const:H=0.5
    # n=4
    # seed=1
    # replicate=0
    t,value
    0,0
    0.25,...
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PathFormatError
from .estim import LambdaTable, get_filter
from .synth import PathSample

__all__ = [
    "fmt_float",
    "fmt_cell",
    "write_path_csv",
    "read_path_csv",
    "table_csv",
    "write_table",
    "read_lambda_table",
]

MISSING = "NA"


def fmt_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def fmt_cell(v) -> str:
    if v is None:
        return MISSING
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def path_csv_text(path: PathSample) -> str:
    lines = [f"# hurst={path.hurst_spec}", f"# n={path.n}"]
    if path.seed is not None:
        lines.append(f"# seed={path.seed}")
    if path.replicate is not None:
        lines.append(f"# replicate={path.replicate}")
    lines.append("t,value")
    n = path.n
    for i, v in enumerate(path.values):
        lines.append(f"{fmt_float(i / n)},{fmt_float(v)}")
    return "\n".join(lines) + "\n"


def write_path_csv(path: PathSample, dest) -> Path:
    dest = Path(dest)
    dest.write_text(path_csv_text(path))
    return dest


def read_path_csv(src) -> PathSample:
    """Parse a path file; raises :class:`PathFormatError` on any defect."""
    try:
        text = Path(src).read_text()
    except OSError as exc:
        raise PathFormatError(f"cannot read {src}: {exc}") from exc
    meta = {}
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            key, eq, val = s[1:].strip().partition("=")
            if eq:
                meta[key.strip()] = val.strip()
            continue
        body.append(s)
    if not body:
        raise PathFormatError(f"{src}: no data")
    header = [c.strip() for c in body[0].split(",")]
    if header != ["t", "value"]:
        raise PathFormatError(f"{src}: expected header 't,value', got {body[0]!r}")
    rows = list(csv.reader(body[1:]))
    if len(rows) < 3:
        raise PathFormatError(f"{src}: need at least 3 data rows, got {len(rows)}")
    try:
        values = np.array([float(r[1]) for r in rows])
        times = np.array([float(r[0]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise PathFormatError(f"{src}: malformed row ({exc})") from None
    n = len(rows) - 1
    if "n" in meta and meta["n"] != str(n):
        raise PathFormatError(f"{src}: header n={meta['n']} but {n + 1} rows")
    if not np.allclose(times, np.arange(n + 1) / n, rtol=0.0, atol=1e-12):
        raise PathFormatError(f"{src}: t column is not the uniform grid i/{n}")
    if not np.all(np.isfinite(values)):
        raise PathFormatError(f"{src}: non-finite values")

    def opt_int(key):
        try:
            return int(meta[key]) if key in meta else None
        except ValueError:
            raise PathFormatError(f"{src}: bad {key}={meta[key]!r}") from None

    return PathSample(n, values, meta.get("hurst", "unknown"), opt_int("seed"), opt_int("replicate"))


def table_csv(fields: Sequence[str], rows: Iterable[Mapping], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([fmt_cell(row.get(f)) for f in fields])
    return buf.getvalue()


def write_table(dest, fields, rows, comments=()) -> Path:
    dest = Path(dest)
    dest.write_text(table_csv(fields, rows, comments))
    return dest


def read_lambda_table(src) -> LambdaTable:
    """Load a ``lambda-table`` CSV (``# filter=a1|a2`` header) for warm-starting inversion."""
    try:
        text = Path(src).read_text()
    except OSError as exc:
        raise PathFormatError(f"cannot read {src}: {exc}") from exc
    lines = text.splitlines()
    meta = dict(l[1:].strip().partition("=")[::2] for l in lines if l.startswith("#"))
    rows = list(csv.DictReader(l for l in lines if l and not l.startswith("#")))
    try:
        a = get_filter(meta.get("filter", "").strip())
        H = np.array([float(r["H"]) for r in rows])
        lam = np.array([float(r["lambda"]) for r in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise PathFormatError(f"{src}: not a lambda table ({exc})") from None
    if H.size < 2 or not (np.all(np.diff(H) > 0) and np.all(np.diff(lam) > 0)):
        raise PathFormatError(f"{src}: need at least two rows, increasing in H and lambda")
    return LambdaTable(a, H, lam)
