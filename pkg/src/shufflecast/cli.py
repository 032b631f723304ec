"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .beamforming import (AnchorSingularityError, LogisticFitError, mrt, objective,
                          optimize_uncorrelated, wmmse, zf)
from .beamforming.baselines import RankDeficientError
from .channel import DegenerateLinkError, gen_channels, snr_db_to_sigma2
from .harness import CHANNEL_STREAM, ConfigError, emit, load_config, run_correlated, run_uncorrelated
from .latent import LatentFormatError, parse_source_spec
from .numerics import DegenerateInputError, InsufficientDataError, make_rng
from .shuffle import gaussianization_report

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_NUMERICAL = (np.linalg.LinAlgError, ArithmeticError, DegenerateLinkError, DegenerateInputError,
              RankDeficientError, AnchorSingularityError)
_INPUT = (ConfigError, LatentFormatError, LogisticFitError, InsufficientDataError, OSError)


def _simulate(args, runner):
    cfg = load_config(args.config)
    rows = runner(cfg, workers=args.workers)
    text = emit(rows, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


def _fit_logistic(args):
    from .beamforming import fit_logistic
    with open(args.samples, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        data = [(float(a), float(b)) for a, b in rows]
    except ValueError:
        # tolerate a single header line
        data = [(float(a), float(b)) for a, b in rows[1:]]
    params, rms = fit_logistic(data, full_output=True)
    out = dict(params.as_dict(), d=params.d, rms_residual=rms)
    text = json.dumps(out, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _gaussianity(args):
    try:
        cfg = parse_source_spec(args.source, dim=args.dim)
    except ValueError as exc:
        raise ConfigError(f"--source: {exc}") from None
    report = gaussianization_report(cfg, args.samples, make_rng(args.seed, 0), args.max_lag)
    sys.stdout.write(json.dumps(report.as_dict(), indent=1) + "\n")


def _bench(args):
    cfg = load_config(args.config)
    p, opts = cfg.logistic_params(), cfg.solve_options()
    out = []
    for seed in cfg.seeds:
        h = gen_channels(cfg.Nt, cfg.K, make_rng(seed, CHANNEL_STREAM)).h
        for snr in cfg.snr_db:
            sigma2 = snr_db_to_sigma2(snr, cfg.P_T)
            bf, report = optimize_uncorrelated(h, sigma2, cfg.P_T, p, opts)
            baselines = {"mrt": objective(h, mrt(h, cfg.P_T), sigma2, cfg.P_T, p),
                         "wmmse": objective(h, wmmse(h, sigma2, cfg.P_T), sigma2, cfg.P_T, p)}
            if cfg.K <= cfg.Nt:
                baselines["zf"] = objective(h, zf(h, cfg.P_T), sigma2, cfg.P_T, p)
            out.append({"seed": seed, "snr_db": snr, "report": report.as_dict(),
                        "baseline_objectives": baselines})
    text = json.dumps(out, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shufflecast", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, runner, helptext in (("simulate-uncorrelated", run_uncorrelated, "independent sources"),
                                   ("simulate-correlated", run_correlated, "duplicated sources, COMP")):
        sp = sub.add_parser(name, help=f"Monte Carlo run with {helptext}")
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output path (stdout if omitted)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--workers", type=int, default=1)
        sp.set_defaults(func=lambda a, r=runner: _simulate(a, r))

    sp = sub.add_parser("fit-logistic", help="fit the SINR-to-quality curve")
    sp.add_argument("--samples", required=True, help="CSV of (gamma_dB, score) rows")
    sp.add_argument("--out", help="output JSON path (stdout if omitted)")
    sp.set_defaults(func=_fit_logistic)

    sp = sub.add_parser("gaussianity-report", help="statistics of cross-demapped interference")
    sp.add_argument("--source", required=True, help="e.g. iid, ar1:0.9, block:8:0.5, t:5")
    sp.add_argument("--samples", type=int, default=2000)
    sp.add_argument("--dim", type=int, default=512)
    sp.add_argument("--max-lag", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_gaussianity)

    sp = sub.add_parser("bench-beamforming", help="MM solver traces against baselines")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except _INPUT as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
