"""Command line entry point.

Exit codes: 0 success, 2 unobservable measurement set, 3 non-converged bad-data
loop, 4 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import estimator, harness
from .cases import CaseError, load_case, rotate_to_reference
from .measurements import (MeasurementError, assemble, readings_from_json,
                           readings_to_json)
from .network import ModelError, build_models

EXIT_OK = 0
EXIT_UNOBSERVABLE = 2
EXIT_NONCONVERGED = 3
EXIT_INPUT = 4


def _cmd_estimate(args) -> int:
    case = rotate_to_reference(load_case(args.case))
    models, incidence = build_models(case)
    with open(args.measurements, "r", encoding="utf-8") as fh:
        readings = readings_from_json(json.load(fh))
    model = assemble(case, models, incidence, readings)
    report = estimator.run(model, q=args.q, mode=args.mode,
                           max_iterations=args.max_iterations)
    doc = estimator.report_to_json(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
    else:
        json.dump(doc, sys.stdout, indent=1)
        print()
    if not report.converged:
        print(f"bad-data loop hit the iteration limit after "
              f"{report.iterations} iterations", file=sys.stderr)
        return EXIT_NONCONVERGED
    print(f"estimated {model.state_dim} states from {model.m} rows; "
          f"{len(report.events)} bad data event(s)", file=sys.stderr)
    return EXIT_OK


def _cmd_make_measurements(args) -> int:
    case = rotate_to_reference(load_case(args.case))
    if args.recipe != "table1":
        raise harness.HarnessError(f"unknown recipe {args.recipe!r}")
    placement = harness.table1_placement(case)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    readings = harness.generate_readings(case, placement, noise=args.noise, rng=rng)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(readings_to_json(readings), fh, indent=1)
    print(f"wrote {len(readings)} readings to {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_campaign(args) -> int:
    config = harness.ScenarioConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    if args.noise is not None:
        config.noise = args.noise
    result = harness.run_campaign(config)
    os.makedirs(args.out_dir, exist_ok=True)
    harness.write_campaign_csv(result, os.path.join(args.out_dir, "campaign.csv"))
    harness.write_state_errors(result, os.path.join(args.out_dir, "state_errors.dat"))
    failed = [t for t in result.trials if t.error is not None]
    print(f"{len(result.trials)} trial(s), {len(failed)} failed; "
          f"mean sigma2_x={result.mean_sigma2_x}, mean xi={result.mean_xi}",
          file=sys.stderr)
    if failed and len(failed) == len(result.trials):
        first = failed[0].error or ""
        if "gain matrix" in first:
            return EXIT_UNOBSERVABLE
        if "did not converge" in first:
            return EXIT_NONCONVERGED
        return EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rectse")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="run one estimation with bad data processing")
    est.add_argument("--case", required=True)
    est.add_argument("--measurements", required=True)
    est.add_argument("--q", type=float, default=3.0)
    est.add_argument("--mode", choices=("correct", "remove"), default="correct")
    est.add_argument("--max-iterations", type=int, default=50)
    est.add_argument("--out")
    est.set_defaults(func=_cmd_estimate)

    mk = sub.add_parser("make-measurements", help="generate a measurement set file")
    mk.add_argument("--case", required=True)
    mk.add_argument("--recipe", default="table1")
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--noise", choices=("uniform", "gaussian", "none"),
                    default="uniform")
    mk.add_argument("--out", required=True)
    mk.set_defaults(func=_cmd_make_measurements)

    camp = sub.add_parser("campaign", help="run a Monte Carlo campaign")
    camp.add_argument("--config", required=True)
    camp.add_argument("--out-dir", required=True)
    camp.add_argument("--seed", type=int)
    camp.add_argument("--trials", type=int)
    camp.add_argument("--noise", choices=("uniform", "gaussian", "none"))
    camp.set_defaults(func=_cmd_campaign)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except estimator.UnobservableError as exc:
        print(f"unobservable: {exc}", file=sys.stderr)
        return EXIT_UNOBSERVABLE
    except estimator.AllCriticalError as exc:
        print(f"detection impossible: {exc}", file=sys.stderr)
        return EXIT_UNOBSERVABLE
    except (CaseError, ModelError, MeasurementError, harness.HarnessError,
            OSError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
