"""Command-line entry point: ``entropic-kde <subcommand> ...``.

Exit status is 0 on success, 1 for invalid arguments or input and 2 for
numerical failures. Every output file is written to a temporary name and
renamed into place, and CSV outputs get a ``<file>.meta.json`` sidecar with
the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detector import BASELINE_POLICIES, WindowConfig, detect
from .density import estimate_kde
from .embedding import delay_pairs
from .errors import DivergenceError, ValidationError
from .evaluation import (
    DEFAULT_METHODS,
    DEFAULT_SNR_GRID,
    DEFAULT_SNR_SIR_GRID,
    f1_overlap,
    sweep_delta_ke,
    sweep_detection,
)
from .kdee import kdee_profile
from .simulators import (
    FORMAT_NAMES,
    LorenzConfig,
    RfSimConfig,
    abs_sine_insert,
    lorenz_x,
    make_injection_record,
    sine_record,
)
from .timeseries import (
    LabeledInterval,
    LabeledRecord,
    _json_default,
    atomic_write,
    read_record,
    sidecar_path,
    write_record,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _resolved(args):
    return {k: str(v) if isinstance(v, Path) else v
            for k, v in sorted(vars(args).items()) if k != "handler"}


def _emit(text, out):
    """Write ``text`` to ``out`` atomically, or to stdout when ``out`` is None."""
    if out is None:
        sys.stdout.write(text)
        return
    with atomic_write(out) as fh:
        fh.write(text)


def _write_sidecar(out, command, config):
    if out is None:
        return
    with atomic_write(sidecar_path(out)) as fh:
        json.dump({"command": command, "version": __version__, "config": config}, fh, indent=2,
                  sort_keys=True, default=_json_default)


def _csv_text(rows):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _save_record(record, args):
    meta = dict(record.meta, cli=_resolved(args))
    write_record(LabeledRecord(record.series, record.truth, meta), args.out, args.output_format)


def cmd_simulate_rf(args):
    cfg = RfSimConfig(snr_db=args.snr_db, sir_db=args.sir_db)
    record = make_injection_record(args.format, cfg, args.seed, inject=not args.no_injection)
    _save_record(record, args)


def cmd_simulate_lorenz(args):
    cfg = LorenzConfig(sigma=args.sigma, beta=args.beta, rho=args.rho, rate_hz=args.rate_hz,
                       duration_s=args.duration_s, discard_s=args.discard_s,
                       initial_state=tuple(args.initial_state))
    series = lorenz_x(cfg)
    meta = {"generator": "lorenz-x", "seed": args.seed, "config": cfg.to_dict()}
    _save_record(LabeledRecord(series, (), meta), args)


def cmd_simulate_sine(args):
    series = sine_record(args.freq_hz, args.amplitude, args.noise_sigma, args.length, args.seed,
                         args.sample_rate_hz)
    meta = {"generator": "sine", "seed": args.seed}
    if args.abs_insert:
        start, length = args.abs_insert
        record = abs_sine_insert(series, start, length, args.freq_hz, args.amplitude,
                                 args.noise_sigma, args.seed)
        meta = dict(record.meta, **meta)
        meta["generator"] = "sine-abs-insert"
        record = LabeledRecord(record.series, record.truth, meta)
    else:
        record = LabeledRecord(series, (), meta)
    _save_record(record, args)


def cmd_kdee(args):
    series = read_record(args.input, sample_rate_hz=args.sample_rate_hz).series
    if args.decimate > 1:
        series = series.decimate(args.decimate)
    profile = kdee_profile(series, args.tau_max, args.cells, args.cells, workers=args.threads)
    if args.dump_grid is not None:
        cloud = delay_pairs(series.samples, args.tau, args.tau_max)
        estimate_kde(cloud, nx=args.cells, ny=args.cells).to_csv(args.dump_grid)
    config = _resolved(args)
    if args.format == "json":
        text = _json_text({"taus": list(profile.taus), "ke": list(profile.ke_values),
                           "delta_ke": profile.delta_ke, "config": config})
    else:
        rows = [["tau", "ke_bits"]]
        rows += [[t, format(v, ".17g")] for t, v in profile.to_rows()]
        rows.append(["delta_ke", format(profile.delta_ke, ".17g")])
        text = _csv_text(rows)
        _write_sidecar(args.out, "kdee", config)
    _emit(text, args.out)


def _window_config(args):
    return WindowConfig(window_len=args.window, stride=args.stride,
                        baseline_count=args.baseline_count, z_threshold=args.threshold,
                        representation=args.representation, tau=args.tau,
                        grid_cells=args.grid_cells, tau_max=args.tau_max,
                        two_sided=args.two_sided, streaming=args.streaming,
                        history=args.history, baseline=args.baseline)


def cmd_detect(args):
    cfg = _window_config(args)
    record = read_record(args.input, sample_rate_hz=args.sample_rate_hz)
    report = detect(record.series, cfg)
    payload = dict(report.to_json(), input=str(args.input), cli=_resolved(args))
    if args.format == "json":
        _emit(_json_text(payload), args.out)
    else:
        _write_sidecar(args.out, "detect", dict(_resolved(args), window=cfg.to_dict()))
        _emit(_csv_text(report.csv_rows()), args.out)
    if args.intervals is not None:
        _emit(_json_text(payload), args.intervals)


def cmd_sweep(args):
    config = _resolved(args)
    if args.experiment == "delta-ke":
        grid = args.grid if args.grid is not None else list(DEFAULT_SNR_GRID)
        result = sweep_delta_ke(args.formats, grid, args.trials, args.decimations, args.length,
                                args.seed, args.tau_max, args.cells, workers=args.threads)
    else:
        grid = args.grid if args.grid is not None else list(DEFAULT_SNR_SIR_GRID)
        result = sweep_detection(args.formats, grid, args.trials, args.methods, args.seed,
                                 workers=args.threads)
    if args.format == "json":
        points = [dict(group=p.group, axis_value=p.axis_value, mean=p.mean, std=p.std,
                       trials=p.trials, values=list(p.values)) for p in result.points]
        _emit(_json_text({"axis": result.axis, "metric": result.metric, "points": points,
                          "config": dict(result.config, cli=config)}), args.out)
    else:
        _write_sidecar(args.out, "sweep", dict(config, resolved=result.config))
        _emit(_csv_text(result.csv_rows()), args.out)


def _load_json(path):
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path}: no such file")
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None


def _load_truth(path):
    path = Path(path)
    if path.suffix.lower() != ".json":
        return read_record(path).truth
    obj = _load_json(path)
    items = obj.get("intervals") if isinstance(obj, dict) else obj
    if not isinstance(items, list):
        raise ValidationError(f"{path}: expected a list of intervals or an object with 'intervals'")
    try:
        return tuple(LabeledInterval(int(d["start"]), int(d["end"]), str(d.get("label", "injection")))
                     for d in items)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{path}: malformed interval ({exc})") from None


def cmd_score(args):
    det = _load_json(args.detections)
    try:
        starts = [int(s) for s in det["window_starts"]]
        window_len = int(det["window_len"])
        flagged = [bool(f) for f in det["flagged"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(
            f"{args.detections}: detections JSON needs window_starts, window_len and flagged ({exc})"
        ) from None
    truth = _load_truth(args.truth)
    result = f1_overlap([(s, window_len) for s in starts], flagged, truth, args.min_overlap,
                        args.denominator)
    if args.format == "csv":
        d = result.to_dict()
        _emit(_csv_text([list(d), [d[k] for k in d]]), args.out)
        _write_sidecar(args.out, "score", _resolved(args))
    else:
        _emit(_json_text(dict(result.to_dict(), config=_resolved(args))), args.out)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="maximum worker threads (results do not depend on it)")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = _Parser(prog="entropic-kde",
                     description="KDE entropy and sliding-baseline change detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def simulation(name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--seed", type=_seed, required=True)
        p.add_argument("--out", type=Path, required=True, help=".csv or .json record")
        p.add_argument("--output-format", choices=["csv", "json"], default=None,
                       help="override the format implied by the --out suffix")
        return p

    p = simulation("simulate-rf", "modulated burst in noise and interference")
    p.add_argument("--format", default="BPSK", choices=FORMAT_NAMES, type=_modulation,
                   help="modulation format")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--sir-db", type=float, default=10.0)
    p.add_argument("--no-injection", action="store_true", help="background only")
    p.set_defaults(handler=cmd_simulate_rf)

    defaults = LorenzConfig()
    p = simulation("simulate-lorenz", "x component of the Lorenz system (deterministic)")
    p.add_argument("--sigma", type=float, default=defaults.sigma)
    p.add_argument("--beta", type=float, default=defaults.beta)
    p.add_argument("--rho", type=float, default=defaults.rho)
    p.add_argument("--rate-hz", type=float, default=defaults.rate_hz)
    p.add_argument("--duration-s", type=float, default=defaults.duration_s)
    p.add_argument("--discard-s", type=float, default=defaults.discard_s)
    p.add_argument("--initial-state", type=float, nargs=3, default=list(defaults.initial_state),
                   metavar=("X0", "Y0", "Z0"))
    p.set_defaults(handler=cmd_simulate_lorenz)

    p = simulation("simulate-sine", "noisy sinusoid, optionally with a |sin| insert")
    p.add_argument("--freq-hz", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--length", type=_positive_int, default=1000)
    p.add_argument("--sample-rate-hz", type=float, default=1.0)
    p.add_argument("--abs-insert", type=int, nargs=2, metavar=("START", "LENGTH"),
                   help="replace [START, START+LENGTH) with |sin| plus fresh noise")
    p.set_defaults(handler=cmd_simulate_sine)

    def analysis(name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--out", type=Path, default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        return p

    def record_input(p):
        p.add_argument("--in", dest="input", type=Path, required=True)
        p.add_argument("--sample-rate-hz", type=float, default=None,
                       help="override the sample rate stored with the record")

    p = analysis("kdee", "KE_tau profile and delta KE of a record")
    record_input(p)
    p.add_argument("--tau-max", type=_positive_int, default=50)
    p.add_argument("--cells", type=_positive_int, default=128)
    p.add_argument("--decimate", type=_positive_int, default=1,
                   help="keep every k-th sample before the sweep")
    p.add_argument("--dump-grid", type=Path, default=None,
                   help="write the density grid at delay --tau as a CSV matrix")
    p.add_argument("--tau", type=_positive_int, default=1, help="delay of the dumped grid")
    p.set_defaults(handler=cmd_kdee)

    p = analysis("detect", "sliding-baseline change detection")
    record_input(p)
    p.add_argument("--representation", choices=["kde", "psd", "delta-ke"], default="kde")
    p.add_argument("--window", type=_positive_int, default=256)
    p.add_argument("--stride", type=_positive_int, default=128)
    p.add_argument("--baseline-count", type=_positive_int, default=10)
    p.add_argument("--threshold", type=float, default=3.5)
    p.add_argument("--tau", type=_positive_int, default=13)
    p.add_argument("--grid-cells", type=_positive_int, default=64)
    p.add_argument("--tau-max", type=_positive_int, default=25,
                   help="delay range of the per-window delta KE")
    p.add_argument("--baseline", choices=BASELINE_POLICIES, default="clean")
    p.add_argument("--streaming", action="store_true")
    p.add_argument("--history", type=_positive_int, default=50)
    sided = p.add_mutually_exclusive_group()
    sided.add_argument("--two-sided", dest="two_sided", action="store_const", const=True)
    sided.add_argument("--one-sided", dest="two_sided", action="store_const", const=False)
    p.add_argument("--intervals", type=Path, default=None,
                   help="also write the report (with merged intervals) as JSON here")
    p.set_defaults(handler=cmd_detect, two_sided=None)

    p = analysis("sweep", "delta KE vs SNR or detection F1 vs SNR+SIR")
    p.add_argument("--experiment", choices=["delta-ke", "detection"], required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--formats", type=_modulation_list, default=list(FORMAT_NAMES))
    p.add_argument("--trials", type=_positive_int, default=10)
    p.add_argument("--grid", type=_float_list, default=None,
                   help="comma-separated SNR (or SNR=SIR) levels in dB; use --grid=-10,0 for a negative first level")
    p.add_argument("--decimations", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--length", type=_positive_int, default=3000)
    p.add_argument("--tau-max", type=_positive_int, default=50)
    p.add_argument("--cells", type=_positive_int, default=64)
    p.add_argument("--methods", type=_name_list, default=list(DEFAULT_METHODS))
    p.set_defaults(handler=cmd_sweep)

    p = analysis("score", "window-level F1 of a detection report")
    p.add_argument("--detections", type=Path, required=True, help="report JSON from detect")
    p.add_argument("--truth", type=Path, required=True,
                   help="record (CSV/JSON) or JSON list of intervals")
    p.add_argument("--min-overlap", type=float, default=0.25)
    p.add_argument("--denominator", choices=["window", "truth"], default="window")
    p.set_defaults(handler=cmd_score, format="json")
    return parser


def _modulation(text):
    for name in FORMAT_NAMES:
        if name.lower() == text.lower():
            return name
    return text


def _modulation_list(text):
    names = [_modulation(v) for v in _name_list(text)]
    unknown = [n for n in names if n not in FORMAT_NAMES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown modulation format(s): {', '.join(unknown)}")
    return names


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.handler(args)
    except (DivergenceError, ArithmeticError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
