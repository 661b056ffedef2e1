"""Command-line front end.

Subcommands: simulate (BER sweep), converge (Gaussian-BP traces), detect
(single-instance dump), iterstudy (BER versus iteration count). Exit codes:
0 success, 2 configuration error, 3 capacity error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import sim
from .errors import CapacityError, ConfigError, NumericalError


def _int_list(text):
    return tuple(int(p) for p in text.split(",") if p.strip())


def _float_list(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _detector_list(text):
    return tuple(p.strip().upper() for p in text.split(",") if p.strip())


def _common_flags(p):
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--seed", type=int, help="master seed (64-bit)")
    p.add_argument("--snr-db", type=_float_list, dest="snr_db", help="comma-separated SNR list in dB")
    p.add_argument("--detectors", type=_detector_list, help="comma-separated detector list")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    p.add_argument("--target-errors", type=int, dest="target_errors",
                   help="keep running past --trials until this many bit errors")
    p.add_argument("--max-trials", type=int, dest="max_trials",
                   help="hard trial cap in target-error mode")
    p.add_argument("--iterations", type=int, help="iteration count for the iterative detectors")
    p.add_argument("--permutation", type=_int_list, help="ring order, 0-based, e.g. 0,2,1,3")
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), help="output format")
    p.add_argument("--m", type=int, help="transmit streams")
    p.add_argument("--n", type=int, help="receive dimensions")
    p.add_argument("--constellation", help="QPSK or QAM16")
    p.add_argument("--batch-size", type=int, dest="batch_size", help="trials per vectorised batch")


def build_parser():
    parser = argparse.ArgumentParser(prog="mimobp",
                                     description="pairwise-graph BP MIMO detector simulator")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="uncoded BER sweep across detectors and SNRs")
    _common_flags(p)
    p.add_argument("--gbp-sweeps", type=int, dest="gbp_sweeps",
                   help="fixed sweep count for the Gaussian detectors")

    p = subs.add_parser("converge", help="Gaussian BP convergence traces")
    _common_flags(p)
    p.add_argument("--channels", type=int, help="number of independent channels")
    p.add_argument("--sweeps", type=int, help="sweep cap per channel")
    p.set_defaults(snr_default=(5.0, 20.0), detectors_default=("GBP2G", "GBP3G"))

    p = subs.add_parser("detect", help="single-instance diagnostic report")
    _common_flags(p)
    p.add_argument("--dump", action="store_true", help="emit the full JSON report")

    p = subs.add_parser("iterstudy", help="BER versus iteration count for BP2/BP3")
    _common_flags(p)
    p.add_argument("--iter-list", type=_int_list, dest="iter_list",
                   help="iteration counts to sweep, default 2,3,4,6")
    p.set_defaults(detectors_default=("BP2", "BP3"))
    return parser


_CFG_KEYS = ("seed", "snr_db", "detectors", "trials", "target_errors", "max_trials",
             "iterations", "permutation", "out", "fmt", "m", "n", "constellation",
             "batch_size", "gbp_sweeps", "channels", "sweeps", "iter_list")


def _config_from_args(args) -> sim.SimConfig:
    overrides = {k: getattr(args, k, None) for k in _CFG_KEYS}
    if overrides.get("snr_db") is None and getattr(args, "snr_default", None):
        overrides["snr_db"] = args.snr_default
    if overrides.get("detectors") is None and getattr(args, "detectors_default", None):
        overrides["detectors"] = args.detectors_default
    return sim.load_config(args.config, overrides)


def _emit(text, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "simulate":
            records = sim.run_simulate(cfg)
            _emit(sim.render("simulate", cfg, records), cfg.out)
        elif args.command == "converge":
            records = sim.run_converge(cfg)
            _emit(sim.render("converge", cfg, records), cfg.out)
        elif args.command == "iterstudy":
            records = sim.run_iterstudy(cfg)
            _emit(sim.render("iterstudy", cfg, records), cfg.out)
        elif args.command == "detect":
            report = sim.run_detect(cfg)
            if args.dump or cfg.fmt == "json":
                _emit(sim.render_json("detect", cfg, report), cfg.out)
            else:
                _emit(sim.format_report(report) + "\n", cfg.out)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
