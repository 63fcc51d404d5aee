"""Command-line entry point (``rsenf``).

Exit status: 0 on success, 2 when an input or argument fails validation,
3 when ``verify-time`` reaches no decision, 64 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import sys
from datetime import timedelta
from pathlib import Path

from rsenf import __version__
from rsenf.idle import InapplicableError, UnreliablePhaseError, estimate_idle, vertical_phase
from rsenf.io import (
    FormatError,
    dump_json,
    parse_timestamp,
    read_enf_log,
    read_rlum,
    read_row_means,
    sidecar_path,
    write_enf_log,
    write_json,
    write_rlum,
)
from rsenf.model import (
    CaptureProfile,
    GridProfile,
    curve_to_csv,
    default_idle_grid,
    idle_sweep_table,
    sweep_curve,
)
from rsenf.spectral import extract_enf
from rsenf.synthesis import DEFAULT_REFERENCE_START, SynthesisConfig, synth_enf, synth_luminance
from rsenf.verification import ND, DEFAULT_LAG_TOLERANCE_S, DEFAULT_THRESHOLD, verify_timestamp

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_DECISION = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _grid(args, hint: GridProfile | None = None) -> GridProfile:
    if getattr(args, "grid_hz", None) is not None:
        return GridProfile(args.grid_hz)
    return hint or GridProfile()


def cmd_model(args) -> int:
    grid = GridProfile(args.grid_hz)
    idle_grid = default_idle_grid(args.idle_step, args.idle_stop)
    table = idle_sweep_table(grid, args.fps, idle_grid, row_capacity_resolution=args.resolution)
    _emit(table.to_csv(), args.out)
    if args.curve_out:
        curve_grid = default_idle_grid(args.curve_step, args.idle_stop)
        curve = sweep_curve(grid, args.fps, curve_grid, row_capacity_resolution=args.resolution)
        Path(args.curve_out).write_text(curve_to_csv(curve), encoding="utf-8")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not 0.0 <= args.idle < 1.0:
        raise ValueError(f"--idle must lie in [0, 1), got {args.idle}")
    if args.rows < 1:
        raise ValueError("--rows must be positive")
    grid = GridProfile(args.grid_hz)
    capacity = int(round(args.rows / (1.0 - args.idle)))
    capture = CaptureProfile(args.fps, args.rows, capacity)
    ref_duration = args.ref_duration if args.ref_duration is not None else args.offset + args.duration
    if ref_duration < args.offset + args.duration:
        raise ValueError("--ref-duration must cover --offset plus --duration")
    config = SynthesisConfig(
        noise_snr_db=args.snr_db,
        seed=args.seed,
        modulation_depth=args.depth,
        second_harmonic_depth=args.second_harmonic_depth,
    )
    start = parse_timestamp(args.ref_start) if args.ref_start else DEFAULT_REFERENCE_START
    enf = synth_enf(ref_duration, grid, config, start_time=start)
    frames = int(round(args.duration * args.fps))
    series = synth_luminance(enf, capture, config, frame_count=frames, offset_s=args.offset, grid=grid)
    write_rlum(args.out_rlum, series, true_idle_pct=capture.idle_percent, include_capacity=True)
    if args.out_enf:
        write_enf_log(args.out_enf, enf)
    write_json(sidecar_path(args.out_rlum), {
        "true_idle_pct": capture.idle_percent,
        "rows_per_frame": capture.rows_per_frame,
        "row_capacity": capture.row_capacity,
        "frame_rate_fps": capture.frame_rate_fps,
        "grid_hz": grid.nominal_enf_hz,
        "seed": args.seed,
        "snr_db": args.snr_db,
        "offset_s": args.offset,
        "true_start_utc": start + timedelta(seconds=args.offset),
        "reference_start_utc": start,
    })
    return EXIT_OK


def cmd_estimate_idle(args) -> int:
    series, _ = read_rlum(args.rlum)
    grid = _grid(args, series.grid_hint)
    table = idle_sweep_table(grid, series.capture.frame_rate_fps, default_idle_grid())
    est = estimate_idle(series, grid, table)
    _report(est.to_dict(), args.out_json)
    return EXIT_OK


def cmd_vertical_phase(args) -> int:
    rows = read_row_means(args.row_means, args.fps)
    result = vertical_phase(rows, _grid(args))
    _report(result.to_dict(), args.out_json)
    return EXIT_OK


def cmd_extract_enf(args) -> int:
    series, _ = read_rlum(args.rlum)
    grid = _grid(args, series.grid_hint)
    enf = extract_enf(series, args.component_hz, grid=grid, assumed_idle=args.idle_assume)
    write_enf_log(args.out_csv or sys.stdout, enf)
    return EXIT_OK


def cmd_verify_time(args) -> int:
    series, _ = read_rlum(args.rlum)
    grid = _grid(args, series.grid_hint)
    reference = read_enf_log(args.enf_log, grid.nominal_enf_hz)
    claimed = parse_timestamp(args.claimed_start)
    report = verify_timestamp(series, reference, claimed, args.metric, grid=grid,
                              threshold=args.threshold, lag_tolerance_s=args.lag_tolerance)
    payload = report.to_json_dict()
    _report(payload, args.out_json)
    print(f"decision: {report.decision}", file=sys.stderr)
    return EXIT_NO_DECISION if report.decision == ND else EXIT_OK


def _report(payload: dict, out: str | None) -> None:
    if out:
        write_json(out, payload)
    else:
        sys.stdout.write(dump_json(payload))


def _finite(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"{text!r} is not a finite number")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rsenf", description="ENF analysis for rolling-shutter video luminance.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("model", help="strongest-component table over idle ratios")
    m.add_argument("--grid-hz", type=_finite, default=50.0)
    m.add_argument("--fps", type=_finite, default=30.0)
    m.add_argument("--idle-step", type=_finite, default=5.0, help="idle grid step in percent")
    m.add_argument("--idle-stop", type=_finite, default=95.0)
    m.add_argument("--resolution", type=int, default=1000, help="row capacity M used for the sweep")
    m.add_argument("--out", help="CSV path (default: stdout)")
    m.add_argument("--curve-out", help="also write per-component magnitude curves to this CSV")
    m.add_argument("--curve-step", type=_finite, default=1.0)
    m.set_defaults(func=cmd_model)

    s = sub.add_parser("simulate", help="synthesise a luminance series and its reference ENF log")
    s.add_argument("--duration", type=_finite, required=True, help="video length in seconds")
    s.add_argument("--fps", type=_finite, default=30.0)
    s.add_argument("--rows", type=int, default=55, help="kept rows per frame (L)")
    s.add_argument("--idle", type=_finite, required=True, help="idle fraction in [0, 1)")
    s.add_argument("--snr-db", type=_finite, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--grid-hz", type=_finite, default=50.0)
    s.add_argument("--offset", type=_finite, default=0.0, help="video start within the reference, seconds")
    s.add_argument("--ref-duration", type=_finite, default=None)
    s.add_argument("--ref-start", default=None, help="ISO-8601 UTC start of the reference log")
    s.add_argument("--depth", type=_finite, default=0.1, help="flicker modulation depth")
    s.add_argument("--second-harmonic-depth", type=_finite, default=0.0)
    s.add_argument("--out-rlum", required=True)
    s.add_argument("--out-enf")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate-idle", help="idle estimate from two-component matching")
    e.add_argument("--rlum", required=True)
    e.add_argument("--grid-hz", type=_finite, default=None)
    e.add_argument("--out-json")
    e.set_defaults(func=cmd_estimate_idle)

    v = sub.add_parser("vertical-phase", help="idle estimate from per-row phase")
    v.add_argument("--row-means", required=True)
    v.add_argument("--grid-hz", type=_finite, default=50.0)
    v.add_argument("--fps", type=_finite, required=True)
    v.add_argument("--out-json")
    v.set_defaults(func=cmd_vertical_phase)

    x = sub.add_parser("extract-enf", help="ENF trace from one shifted component")
    x.add_argument("--rlum", required=True)
    x.add_argument("--component-hz", type=_finite, required=True)
    x.add_argument("--idle-assume", type=_finite, default=0.0)
    x.add_argument("--grid-hz", type=_finite, default=None)
    x.add_argument("--out-csv")
    x.set_defaults(func=cmd_extract_enf)

    t = sub.add_parser("verify-time", help="check a claimed recording start time")
    t.add_argument("--rlum", required=True)
    t.add_argument("--enf-log", required=True)
    t.add_argument("--claimed-start", required=True, help="ISO-8601 UTC timestamp")
    t.add_argument("--metric", type=int, choices=(1, 2, 3, 4), default=4)
    t.add_argument("--threshold", type=_finite, default=DEFAULT_THRESHOLD)
    t.add_argument("--lag-tolerance", type=_finite, default=DEFAULT_LAG_TOLERANCE_S)
    t.add_argument("--grid-hz", type=_finite, default=None)
    t.add_argument("--out-json")
    t.set_defaults(func=cmd_verify_time)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, InapplicableError, UnreliablePhaseError, ValueError, OSError) as exc:
        print(f"rsenf {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
