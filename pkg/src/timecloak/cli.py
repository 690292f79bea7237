"""Command-line interface.

Subcommands: keygen (write a mock key file), run (single experiment),
sweep (noise-model comparison runs), adev (analyze an external CSV
series), linkbudget (channel feasibility report).

Exit codes: 0 success, 2 configuration error, 3 key exhaustion, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_experiment_config,
    load_config_file,
    parse_overrides,
)
from .experiment import calibration_window, emit_outputs, run_experiment, sweep_noise_models
from .keys import KeyExhaustedError, mock_qkd_source, save_keys
from .linkbudget import ChannelParams, feasibility_report, report_csv, report_text
from .stability import TimeErrorSeries, overlapping_adev

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_KEY_EXHAUSTED = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timecloak",
        description="Simulate and analyze key-encrypted time dissemination.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    keygen = sub.add_parser("keygen", help="write a deterministic mock key file")
    keygen.add_argument("--seed", type=int, required=True)
    keygen.add_argument("--digits", type=int, required=True, help="number of hex digits")
    keygen.add_argument("--out", required=True, help="output key file path")

    run = sub.add_parser("run", help="run one round-trip experiment")
    run.add_argument("--config", help="config file (flat key = value lines)")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    run.add_argument("--out", required=True, help="output directory")

    sweep = sub.add_parser("sweep", help="run the noise-model comparison sweep")
    sweep.add_argument("--config", help="base config file")
    sweep.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE"
    )
    sweep.add_argument(
        "--kinds",
        default="rw,rw_lag,rw_mem",
        help="comma-separated noise kinds (default: rw,rw_lag,rw_mem)",
    )
    sweep.add_argument("--bounded", choices=("yes", "no", "both"), default="both")
    sweep.add_argument("--bound-deg", type=float, default=360.0)
    sweep.add_argument("--out", required=True, help="output directory")

    adev = sub.add_parser("adev", help="Allan deviation of an external CSV series")
    adev.add_argument("--input", required=True, help="CSV file with a header row")
    adev.add_argument(
        "--value-column", default="error_ns", help="column holding the time errors (ns)"
    )
    adev.add_argument(
        "--tau0",
        type=float,
        help="sampling interval in seconds (default: inferred from a time_s column)",
    )
    adev.add_argument("--out", help="write the curve CSV here instead of stdout")

    budget = sub.add_parser("linkbudget", help="channel feasibility report")
    budget.add_argument("--loss-db", type=float, default=10.0)
    budget.add_argument("--efficiency", type=float, default=0.2)
    budget.add_argument("--dark-cps", type=float, default=353.0)
    budget.add_argument("--background-cps", type=float, default=6500.0)
    budget.add_argument("--rep-rate-hz", type=float, default=1e9)
    budget.add_argument("--mu", type=float, default=1.5)
    budget.add_argument("--dead-time-us", type=float, default=25.0)
    budget.add_argument("--csv", help="also write the report as CSV to this path")

    return parser


def _config_from_args(args) -> ExperimentConfig:
    mapping: dict[str, str] = {}
    if args.config:
        mapping.update(load_config_file(args.config))
    mapping.update(parse_overrides(args.overrides))
    return build_experiment_config(mapping)


def _cmd_keygen(args) -> int:
    stream = mock_qkd_source(args.seed, args.digits)
    save_keys(stream, args.out)
    print(f"wrote {args.digits} hex digits to {args.out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    result = run_experiment(config)
    written = emit_outputs(result, args.out)
    if config.calib_window_steps > 0:
        bias = calibration_window(result, config.calib_window_steps)
        print(f"calibration bias estimate: {bias:.4f} ns")
    print(f"adev ratio at tau0: {result.summary.adev_ratio_tau0:.3g}")
    print(f"wrote {len(written)} files to {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    if not kinds:
        raise ConfigError("--kinds must name at least one noise kind")
    bounded_options = {"yes": (True,), "no": (False,), "both": (False, True)}[args.bounded]
    results = sweep_noise_models(config, kinds, bounded_options, args.bound_deg)
    out = Path(args.out)
    for (kind, bounded), result in results.items():
        label = "bounded" if bounded else "unbounded"
        emit_outputs(result, out / f"{kind}_{label}")
        print(
            f"{kind} {label}: tic2 slope {result.summary.tic2_slope:.3f}, "
            f"adev ratio {result.summary.adev_ratio_tau0:.3g}"
        )
    print(f"wrote {len(results)} runs to {args.out}")
    return EXIT_OK


def _cmd_adev(args) -> int:
    data = np.genfromtxt(args.input, delimiter=",", names=True)
    if data.dtype.names is None:
        raise ConfigError(f"{args.input}: expected a CSV header row")
    if args.value_column not in data.dtype.names:
        raise ConfigError(
            f"{args.input}: no column {args.value_column!r} (has {', '.join(data.dtype.names)})"
        )
    values = np.atleast_1d(data[args.value_column])
    tau0 = args.tau0
    if tau0 is None:
        if "time_s" not in data.dtype.names:
            raise ConfigError("--tau0 is required when the CSV has no time_s column")
        times = np.atleast_1d(data["time_s"])
        if len(times) < 2:
            raise ConfigError("need at least two rows to infer tau0")
        tau0 = float(times[1] - times[0])
    curve = overlapping_adev(TimeErrorSeries(values, tau0))
    if args.out:
        curve.write_csv(args.out)
        print(f"wrote {len(curve)} points to {args.out}")
    else:
        print("tau_s,adev,sigma_adev")
        for tau, dev, sig in zip(curve.taus_s, curve.adev, curve.sigma_adev):
            print(f"{float(tau)!r},{float(dev)!r},{float(sig)!r}")
    return EXIT_OK


def _cmd_linkbudget(args) -> int:
    params = ChannelParams(
        loss_db=args.loss_db,
        det_efficiency=args.efficiency,
        dark_rate_cps=args.dark_cps,
        background_rate_cps=args.background_cps,
        rep_rate_hz=args.rep_rate_hz,
        mean_photon_mu=args.mu,
        dead_time_s=args.dead_time_us * 1e-6,
    )
    report = feasibility_report(params)
    print(report_text(report))
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="\n") as fh:
            fh.write(report_csv(report))
    return EXIT_OK


_COMMANDS = {
    "keygen": _cmd_keygen,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "adev": _cmd_adev,
    "linkbudget": _cmd_linkbudget,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except KeyExhaustedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_KEY_EXHAUSTED
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # covers ConfigError plus domain validation failures
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
