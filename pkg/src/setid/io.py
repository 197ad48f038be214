"""Data ingestion and result emission: CSV series, JSON, CSV tables, SVG plots."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DataError, NonNumericCell, RaggedRows, SurveyOutOfRange
from .moments import SurveySeries


@dataclass(frozen=True)
class TimeSeries:
    """Numeric table with period labels and column names."""

    values: NDArray
    columns: tuple[str, ...]
    periods: tuple[str, ...]


def load_timeseries(path) -> TimeSeries:
    """Read ``period,col1,col2,...`` CSV text with one header row.

    Raises
    ------
    RaggedRows
        When a row has the wrong number of cells.
    NonNumericCell
        When a cell does not parse as a finite float (NaN is rejected).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: need a period column and at least one data column")
    vals = np.empty((len(rows) - 1, len(header) - 1))
    periods = []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise RaggedRows(f"{path}: row {i} has {len(r)} cells, header has {len(header)}")
        periods.append(r[0].strip())
        for j, cell in enumerate(r[1:], start=1):
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCell(f"{path}: row {i}, column '{header[j]}': {cell!r} is not numeric") from None
            if not math.isfinite(v):
                raise NonNumericCell(f"{path}: row {i}, column '{header[j]}': non-finite value {cell!r}")
            vals[i - 2, j - 1] = v
    return TimeSeries(vals, tuple(header[1:]), tuple(periods))


def write_timeseries(path, values: ArrayLike, columns: Sequence[str], periods: Sequence[str] | None = None,
                     period_name: str = "period") -> Path:
    """Write a table that :func:`load_timeseries` reads back exactly."""
    X = np.atleast_2d(np.asarray(values, dtype=float))
    if X.shape[0] == 1 and len(columns) != X.shape[1]:
        X = X.T
    periods = [str(i + 1) for i in range(X.shape[0])] if periods is None else list(periods)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([period_name, *columns])
        for p, row in zip(periods, X):
            w.writerow([p, *(repr(float(v)) for v in row)])
    return path


def load_survey(path, question_id: str | None = None, column: int | str = 0,
                target_observables: Sequence[int] = (0,)) -> SurveySeries:
    """Read one survey share column; every value must lie in ``[0, 1]``.

    Raises
    ------
    SurveyOutOfRange
        Naming the offending row and column.
    """
    ts = load_timeseries(path)
    j = ts.columns.index(column) if isinstance(column, str) else int(column)
    b = ts.values[:, j]
    bad = np.flatnonzero((b < 0.0) | (b > 1.0))
    if bad.size:
        i = int(bad[0])
        raise SurveyOutOfRange(f"{path}: row {i + 2} (period {ts.periods[i]}), column '{ts.columns[j]}': "
                               f"share {b[i]} outside [0, 1]")
    return SurveySeries(b=b, question_id=question_id or ts.columns[j],
                        target_observables=tuple(target_observables))


# ---------------------------------------------------------------------------
# emission


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, non-finite floats as strings."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path


def write_table(path, rows: Sequence[Mapping], columns: Sequence[str], units: Mapping[str, str] | None = None
                ) -> Path:
    """CSV with a header row; a second ``unit`` row is written when units are given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        if units is not None:
            w.writerow([units.get(c, "") for c in columns])
        for r in rows:
            w.writerow([_cell(r.get(c, "")) for c in columns])
    return path


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def quantile_table_rows(tables: Mapping[str, Sequence[Mapping]]) -> tuple[list[dict], list[str]]:
    """Merge per-model quantile rows into one row per parameter.

    Each model contributes two columns, ``<model> q2.5%`` and
    ``<model> q97.5%``.
    """
    cols = ["parameter", "unit"]
    merged: dict[str, dict] = {}
    for model, rows in tables.items():
        cols += [f"{model} q2.5%", f"{model} q97.5%"]
        for r in rows:
            row = merged.setdefault(r["parameter"], {"parameter": r["parameter"], "unit": r.get("unit", "")})
            row[f"{model} q2.5%"] = r["q2.5"]
            row[f"{model} q97.5%"] = r["q97.5"]
    return list(merged.values()), cols


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config_sha256: str, command: str, seed: int, files: Iterable[Path],
                   provenance: Mapping[str, str]) -> Path:
    """``manifest.json`` with the config hash, output hashes and the operation behind each output."""
    out_dir = Path(out_dir)
    entries = []
    for f in sorted(Path(p) for p in files):
        rel = f.relative_to(out_dir).as_posix()
        entries.append({"path": rel, "sha256": sha256_file(f), "produced_by": provenance.get(rel, "")})
    return write_json(out_dir / "manifest.json", {"command": command, "config_sha256": config_sha256,
                                                  "seed": int(seed), "outputs": entries})


# ---------------------------------------------------------------------------
# SVG


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def svg_band_plot(series: Mapping[str, ArrayLike], title: str = "", x: ArrayLike | None = None,
                  width: int = 640, height: int = 320, band: tuple[str, str] | None = ("lower", "upper")
                  ) -> str:
    """SVG line plot; each named series becomes a polyline with a ``data-series`` attribute.

    Data values are also written in ``data-values`` so emitted files can be
    checked numerically.
    """
    names = list(series)
    ys = {k: np.asarray(series[k], dtype=float).reshape(-1) for k in names}
    n = max(v.size for v in ys.values())
    xs = np.arange(n, dtype=float) if x is None else np.asarray(x, dtype=float)
    allv = np.concatenate([v[np.isfinite(v)] for v in ys.values()] + [np.zeros(1)])
    y_lo, y_hi = float(allv.min()), float(allv.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    x_lo, x_hi = float(xs.min()), float(xs.max()) if xs.size > 1 else float(xs.min()) + 1.0
    ml, mr, mt, mb = 60, 20, 30, 40
    pw, ph = width - ml - mr, height - mt - mb

    def px(v):
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return mt + (y_hi - v) / (y_hi - y_lo) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>']
    for t in _nice_ticks(y_lo, y_hi):
        yy = py(t)
        out.append(f'<line x1="{ml - 4}" y1="{yy:.2f}" x2="{ml}" y2="{yy:.2f}" stroke="#000"/>')
        out.append(f'<text x="{ml - 6}" y="{yy + 4:.2f}" text-anchor="end" font-size="10">{t:g}</text>')
    for t in _nice_ticks(x_lo, x_hi):
        xx = px(t)
        out.append(f'<line x1="{xx:.2f}" y1="{mt + ph}" x2="{xx:.2f}" y2="{mt + ph + 4}" stroke="#000"/>')
        out.append(f'<text x="{xx:.2f}" y="{mt + ph + 16}" text-anchor="middle" font-size="10">{t:g}</text>')
    if y_lo < 0.0 < y_hi:
        out.append(f'<line x1="{ml}" y1="{py(0.0):.2f}" x2="{ml + pw}" y2="{py(0.0):.2f}" '
                   f'stroke="#999" stroke-dasharray="4 3"/>')
    if band is not None and band[0] in ys and band[1] in ys:
        lo_, hi_ = ys[band[0]], ys[band[1]]
        pts = [(px(a), py(b)) for a, b in zip(xs, hi_)] + [(px(a), py(b)) for a, b in zip(xs[::-1], lo_[::-1])]
        out.append('<polygon fill="#1f77b4" fill-opacity="0.15" stroke="none" points="'
                   + " ".join(f"{a:.2f},{b:.2f}" for a, b in pts) + '"/>')
    for i, k in enumerate(names):
        v = ys[k]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, v) if math.isfinite(b))
        vals = " ".join(repr(float(b)) for b in v)
        out.append(f'<polyline data-series="{_esc(k)}" data-values="{vals}" fill="none" '
                   f'stroke="{colors[i % len(colors)]}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 12 * i}" font-size="10" '
                   f'fill="{colors[i % len(colors)]}">{_esc(k)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;"))


def read_svg_series(text: str) -> dict[str, NDArray]:
    """Recover the ``data-values`` of every polyline in an emitted SVG."""
    out = {}
    for m in re.finditer(r'<polyline data-series="([^"]*)" data-values="([^"]*)"', text):
        out[m.group(1)] = np.array([float(v) for v in m.group(2).split()])
    return out


__all__ = ["TimeSeries", "load_timeseries", "write_timeseries", "load_survey", "dumps_json", "write_json",
           "write_table", "quantile_table_rows", "sha256_file", "write_manifest", "svg_band_plot",
           "read_svg_series"]
