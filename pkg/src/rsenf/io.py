"""Text file formats.

RLUM
    First line is one JSON object (``version``, ``frame_rate_fps``,
    ``rows_per_frame``, ``frame_count`` and optionally ``grid_hz``,
    ``true_idle_pct``, ``row_capacity``).  Every following line holds one
    luminance value, frame-major.
ENF log
    CSV with header ``timestamp_utc,frequency_hz`` and one row per second.
Row means
    CSV with header ``frame_0,...,frame_{F-1}`` followed by one line per
    sensor row.

Numbers are written with 9 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from rsenf.idle import RowMeansMatrix
from rsenf.model import CaptureProfile, GridProfile
from rsenf.synthesis import EnfSeries, LuminanceSeries

RLUM_VERSION = 1
ENF_HEADER = ("timestamp_utc", "frequency_hz")
ENF_TOLERANCE_HZ = 1.0
_NUM = "%.9g"


class FormatError(ValueError):
    """A file failed validation; the message names the file, line and rule."""

    def __init__(self, path, line: int | None, rule: str):
        self.path = str(path)
        self.line = line
        self.rule = rule
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {rule}")


def _fmt(v: float) -> str:
    return _NUM % v


@contextmanager
def _writer(target):
    """Open ``target`` for writing unless it is already a text stream."""
    if hasattr(target, "write"):
        yield target
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            yield fh


# --------------------------------------------------------------------------
# RLUM


@dataclass
class RlumHeader:
    frame_rate_fps: float
    rows_per_frame: int
    frame_count: int
    grid_hz: float | None = None
    true_idle_pct: float | None = None
    row_capacity: int | None = None

    def to_json(self) -> str:
        d = {
            "version": RLUM_VERSION,
            "frame_rate_fps": self.frame_rate_fps,
            "rows_per_frame": self.rows_per_frame,
            "frame_count": self.frame_count,
        }
        for key in ("grid_hz", "true_idle_pct", "row_capacity"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return json.dumps(d, sort_keys=True)


def write_rlum(path, series: LuminanceSeries, true_idle_pct: float | None = None,
               include_capacity: bool = False) -> None:
    cap = series.capture
    header = RlumHeader(
        frame_rate_fps=cap.frame_rate_fps,
        rows_per_frame=cap.rows_per_frame,
        frame_count=series.frame_count,
        grid_hz=series.grid_hint.nominal_enf_hz if series.grid_hint else None,
        true_idle_pct=true_idle_pct,
        row_capacity=cap.row_capacity if include_capacity else None,
    )
    with _writer(path) as fh:
        fh.write(header.to_json() + "\n")
        np.savetxt(fh, series.samples, fmt=_NUM)


def _positive(path, d, key, kind):
    value = d.get(key)
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool) and value > 0
    else:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value) and value > 0
    if not ok:
        raise FormatError(path, 1, f"header field '{key}' must be a positive {kind.__name__}, got {value!r}")
    return value


def read_rlum(path) -> tuple[LuminanceSeries, RlumHeader]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            d = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(path, 1, f"header is not a JSON object ({exc.msg})") from None
        if not isinstance(d, dict):
            raise FormatError(path, 1, "header is not a JSON object")
        if d.get("version") != RLUM_VERSION:
            raise FormatError(path, 1, f"unsupported RLUM version {d.get('version')!r}; expected {RLUM_VERSION}")
        header = RlumHeader(
            frame_rate_fps=float(_positive(path, d, "frame_rate_fps", float)),
            rows_per_frame=_positive(path, d, "rows_per_frame", int),
            frame_count=_positive(path, d, "frame_count", int),
            grid_hz=float(_positive(path, d, "grid_hz", float)) if "grid_hz" in d else None,
            true_idle_pct=d.get("true_idle_pct"),
            row_capacity=_positive(path, d, "row_capacity", int) if "row_capacity" in d else None,
        )
        lines = fh.read().splitlines()

    expected = header.frame_count * header.rows_per_frame
    if lines and lines[-1].strip() == "":
        lines = lines[:-1]
    if len(lines) != expected:
        raise FormatError(
            path, len(lines) + 2 if len(lines) < expected else expected + 2,
            f"body has {len(lines)} values; header promises frame_count x rows_per_frame = {expected}",
        )
    values = np.empty(expected)
    for i, text in enumerate(lines):
        try:
            values[i] = float(text)
        except ValueError:
            raise FormatError(path, i + 2, f"not a decimal number: {text!r}") from None
        if not math.isfinite(values[i]):
            raise FormatError(path, i + 2, f"value must be finite, got {text!r}")
    capacity = header.row_capacity or header.rows_per_frame
    if capacity < header.rows_per_frame:
        raise FormatError(path, 1, "row_capacity is smaller than rows_per_frame")
    capture = CaptureProfile(header.frame_rate_fps, header.rows_per_frame, capacity)
    grid = GridProfile(header.grid_hz) if header.grid_hz else None
    return LuminanceSeries(capture, values, grid), header


# --------------------------------------------------------------------------
# ENF log


def format_timestamp(t: datetime) -> str:
    t = t.astimezone(timezone.utc)
    text = t.strftime("%Y-%m-%dT%H:%M:%S")
    if t.microsecond:
        text += f".{t.microsecond:06d}".rstrip("0")
    return text + "Z"


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 timestamp; a trailing ``Z`` or a missing offset means UTC."""
    t = datetime.fromisoformat(text.strip().replace("Z", "+00:00").replace("z", "+00:00"))
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def write_enf_log(path, enf: EnfSeries) -> None:
    if enf.sample_period_s != 1.0:
        raise ValueError("ENF logs are written at a 1 s cadence")
    with _writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENF_HEADER)
        for i, v in enumerate(enf.values_hz):
            w.writerow((format_timestamp(enf.time_of(i)), _fmt(v)))


def read_enf_log(path, nominal_hz: float | None = None) -> EnfSeries:
    """Load and validate an ENF log.

    With ``nominal_hz`` unset the nominal frequency is inferred as whichever
    of 50 and 60 Hz is nearer the median value.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != ENF_HEADER:
        raise FormatError(path, 1, f"header must be '{','.join(ENF_HEADER)}'")
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if r]
    if not body:
        raise FormatError(path, 2, "log has no samples")
    times, values = [], []
    for lineno, r in body:
        if len(r) != 2:
            raise FormatError(path, lineno, f"expected 2 columns, found {len(r)}")
        try:
            t = parse_timestamp(r[0])
        except ValueError:
            raise FormatError(path, lineno, f"bad ISO-8601 timestamp {r[0]!r}") from None
        try:
            v = float(r[1])
        except ValueError:
            raise FormatError(path, lineno, f"frequency is not a number: {r[1]!r}") from None
        if not math.isfinite(v):
            raise FormatError(path, lineno, "frequency must be finite")
        if times:
            step = (t - times[-1]).total_seconds()
            if step != 1.0:
                raise FormatError(path, lineno, f"cadence violation: {step:g} s after the previous row; expected 1 s")
        times.append(t)
        values.append(v)
    arr = np.asarray(values)
    if nominal_hz is None:
        nominal_hz = min((50.0, 60.0), key=lambda n: abs(n - float(np.median(arr))))
    for (lineno, _), v in zip(body, arr):
        if abs(v - nominal_hz) > ENF_TOLERANCE_HZ:
            raise FormatError(path, lineno, f"{v:g} Hz is outside {nominal_hz:g} +/- {ENF_TOLERANCE_HZ:g} Hz")
    return EnfSeries(times[0], arr)


# --------------------------------------------------------------------------
# row means


def write_row_means(path, rows: RowMeansMatrix) -> None:
    with _writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(f"frame_{i}" for i in range(rows.frame_count))
        for line in rows.values:
            w.writerow(_fmt(v) for v in line)


def read_row_means(path, frame_rate_fps: float, row_capacity: int | None = None) -> RowMeansMatrix:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh)]
    if not rows:
        raise FormatError(path, 1, "file is empty")
    header = [c.strip() for c in rows[0]]
    if header != [f"frame_{i}" for i in range(len(header))] or not header:
        raise FormatError(path, 1, "header must be frame_0,...,frame_{F-1}")
    width = len(header)
    data = []
    for i, r in enumerate(rows[1:]):
        if not r:
            continue
        if len(r) != width:
            raise FormatError(path, i + 2, f"row has {len(r)} columns; header has {width} (matrix must be rectangular)")
        try:
            data.append([float(x) for x in r])
        except ValueError:
            raise FormatError(path, i + 2, "non-numeric entry") from None
    if not data:
        raise FormatError(path, 2, "matrix has no rows")
    values = np.asarray(data)
    if not np.all(np.isfinite(values)):
        raise FormatError(path, None, "matrix contains non-finite values")
    L = values.shape[0]
    capture = CaptureProfile(frame_rate_fps, L, row_capacity or L)
    return RowMeansMatrix(capture, values)


# --------------------------------------------------------------------------
# sidecars and generic loading


def dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, payload: dict) -> None:
    with _writer(path) as fh:
        fh.write(dump_json(payload))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, datetime):
        return format_timestamp(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def sidecar_path(rlum_path) -> Path:
    p = Path(rlum_path)
    return p.with_name(p.name + ".json")


def load_inputs(paths: Iterable, frame_rate_fps: float | None = None, nominal_hz: float | None = None):
    """Load each path by extension: ``.rlum`` luminance, ``.csv`` ENF log or row means.

    Row-means files need ``frame_rate_fps``.
    """
    out = []
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise FormatError(p, None, "file does not exist")
        if p.suffix == ".rlum":
            out.append(read_rlum(p)[0])
            continue
        with open(p, encoding="utf-8") as fh:
            first = fh.readline().strip()
        if first.startswith(ENF_HEADER[0]):
            out.append(read_enf_log(p, nominal_hz))
        elif first.startswith("frame_0"):
            if frame_rate_fps is None:
                raise FormatError(p, None, "row-means files need a frame rate")
            out.append(read_row_means(p, frame_rate_fps))
        else:
            raise FormatError(p, 1, "unrecognised file type")
    return out
