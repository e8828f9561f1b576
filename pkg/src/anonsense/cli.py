"""Command-line front end.

Four verbs:

* ``verify``    -- exhaustive anonymity check plus closed-form-vs-dense
                   cross-validation (or the negative control).
* ``scan``      -- CSV grids of the two-sender variance bound (figure data).
* ``simulate``  -- full protocol run from a JSON run configuration.
* ``estimate``  -- maximum-likelihood estimation from an outcome-counts file.

Exit codes: 0 success, 2 validation/assertion failure, 3 resource guard.
All outputs are byte-deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .combinatorics import FieldVector
from .configio import (
    RunConfigError,
    config_to_dict,
    dumps_json,
    estimate_to_dict,
    load_counts,
    parse_run_config,
    scan_rows_to_csv,
    tracelessness_to_dict,
    transcript_to_dict,
)
from .engine import ConfigError, ProtocolConfig, max_senders, outcome_distribution
from .estimation import mle_estimate
from .fisher import scan_j22
from .protocol import negative_control, run_protocol, sender_subsets, verify_tracelessness
from .sampling import philox
from .statevec import OracleLimitError, SenderAssignment, oracle_distribution

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_GUARD = 3

FIG_AXIS_POINTS = 65


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {args.threads}")
        return args.handler(args)
    except OracleLimitError as exc:
        print(f"error: oracle limit exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (RunConfigError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (overrides any seed in a config file)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker count hint; results are independent of it")
    common.add_argument("--out", type=Path, default=None,
                        help="output file (default: stdout)")

    parser = argparse.ArgumentParser(prog="anonsense",
                                     description="anonymous-sensing simulator and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", parents=[common],
                              help="exhaustive anonymity and cross-validation checks")
    p_verify.add_argument("--n", type=int, default=5, help="participant count")
    p_verify.add_argument("--m", type=int, default=2, help="true sender count")
    p_verify.add_argument("--trials", type=int, default=20, help="random field draws")
    p_verify.add_argument("--t", type=float, default=1.0, help="interaction time")
    p_verify.add_argument("--negative-control", action="store_true",
                          help="run only the deliberately leaky control scheme")
    p_verify.set_defaults(handler=_cmd_verify)

    p_scan = sub.add_parser("scan", parents=[common],
                            help="grid scan of the two-sender variance bound (CSV)")
    p_scan.add_argument("--fig", type=int, choices=(2, 3, 4, 5), default=None,
                        help="preset grid reproducing one of the figures")
    p_scan.add_argument("--config", type=Path, default=None,
                        help="run-configuration JSON file with a 'scan' axis section")
    p_scan.add_argument("--n", type=str, default=None,
                        help="n axis, e.g. '10' or '5,10,100' or 'log:5:10000:40' or 'inf'")
    p_scan.add_argument("--q0", type=str, default="0.33", help="q0 axis (comma list)")
    p_scan.add_argument("--theta1", type=str, default=None,
                        help="theta1 axis: comma list or 'lo:hi:count'")
    p_scan.add_argument("--theta2", type=str, default=None,
                        help="theta2 axis: comma list or 'lo:hi:count'")
    p_scan.set_defaults(handler=_cmd_scan)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run the full protocol from a JSON run configuration")
    p_sim.add_argument("--config", type=Path, required=True, help="run-configuration JSON file")
    p_sim.set_defaults(handler=_cmd_simulate)

    p_est = sub.add_parser("estimate", parents=[common],
                           help="maximum-likelihood estimation from observed counts")
    p_est.add_argument("--counts", type=Path, required=True,
                       help="counts JSON file (or a transcript containing counts)")
    p_est.add_argument("--config", type=Path, required=True, help="run-configuration JSON file")
    p_est.set_defaults(handler=_cmd_estimate)
    return parser


# --------------------------------------------------------------------------
# verify

def _cmd_verify(args) -> int:
    seed = 0 if args.seed is None else args.seed
    n, m = args.n, args.m
    if m > max_senders(n):
        raise ValueError(f"m={m} exceeds floor((n+1)/2)={max_senders(n)} for n={n}")
    if args.negative_control:
        rng = philox(seed, 0xC0)
        omegas = tuple(sorted(rng.uniform(0.5, 2.5, size=m).tolist()))
        fields = FieldVector(omegas=omegas, t=args.t)
        config = _verify_config(n, args.t)
        report = negative_control(n, fields, config)
        doc = {"command": "verify", "negative_control": tracelessness_to_dict(report),
               "leak_detected": not report.verdict}
        _emit(dumps_json(doc), args.out)
        if report.verdict:
            print("negative control FAILED to detect the planted leak", file=sys.stderr)
            return EXIT_FAIL
        print(f"negative control detected leakage: max TV distance "
              f"{report.max_tv_distance:.6f} > {report.tolerance}", file=sys.stderr)
        return EXIT_OK

    configs = [ProtocolConfig.for_single_sender(n, t=args.t)]
    if n >= 5:
        configs.append(ProtocolConfig.for_two_senders(n, a=n // 2, q0=0.33, t=args.t))
    worst_tv = 0.0
    worst_err = 0.0
    failing_case = None
    reports = []
    for trial in range(args.trials):
        rng = philox(seed, trial)
        omegas = tuple(sorted(rng.uniform(0.1, 3.0, size=m).tolist()))
        fields = FieldVector(omegas=omegas, t=args.t)
        for config in configs:
            report = verify_tracelessness(n, fields, config, mode="exact")
            worst_tv = max(worst_tv, report.max_tv_distance)
            subsets = sender_subsets(n, m)
            subset = subsets[int(rng.integers(len(subsets)))]
            assign = SenderAssignment(n, subset, fields)
            dense = oracle_distribution(assign, config)
            closed = outcome_distribution(config, fields)
            err = max(abs(dense.probs[k] - closed.probs[k]) for k in dense.probs)
            worst_err = max(worst_err, err)
            if (not report.verdict or err > 1e-10) and failing_case is None:
                failing_case = {
                    "trial": trial,
                    "omegas": list(omegas),
                    "t": args.t,
                    "config": config_to_dict(config),
                    "subset": list(subset),
                    "max_tv_distance": report.max_tv_distance,
                    "oracle_analytic_error": err,
                }
            if trial == args.trials - 1:
                reports.append(tracelessness_to_dict(report))
    passed = worst_tv <= 1e-10 and worst_err <= 1e-10
    doc = {
        "command": "verify",
        "n": n,
        "m": m,
        "trials": args.trials,
        "seed": seed,
        "max_tv_distance": worst_tv,
        "max_oracle_analytic_error": worst_err,
        "tracelessness": reports,
        "verdict": "pass" if passed else "fail",
    }
    if failing_case is not None:
        doc["failing_case"] = failing_case
    _emit(dumps_json(doc), args.out)
    print(f"verify n={n} m={m} trials={args.trials}: "
          f"max TV {worst_tv:.3e}, max oracle/analytic error {worst_err:.3e} "
          f"-> {'pass' if passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAIL


def _verify_config(n: int, t: float) -> ProtocolConfig:
    if n >= 5:
        return ProtocolConfig.for_two_senders(n, a=n // 2, q0=0.33, t=t)
    return ProtocolConfig.for_single_sender(n, t=t)


# --------------------------------------------------------------------------
# scan

def _cmd_scan(args) -> int:
    if args.fig is not None:
        axes = _figure_axes(args.fig)
    elif args.config is not None:
        parsed = parse_run_config(_load_json(args.config), require_scenario=False)
        if parsed["scan"] is None:
            raise RunConfigError(f"{args.config}: $.scan: section is required for scan")
        axes = parsed["scan"]
    else:
        missing = [name for name in ("n", "theta1", "theta2")
                   if getattr(args, name) is None]
        if missing:
            raise ValueError(f"scan needs --fig, --config, or explicit axes; missing {missing}")
        axes = {
            "n": _parse_axis(args.n, integer=True),
            "q0": _parse_axis(args.q0),
            "theta1": _parse_axis(args.theta1),
            "theta2": _parse_axis(args.theta2),
        }
    rows = scan_j22(axes["n"], axes["q0"], axes["theta1"], axes["theta2"])
    _emit(scan_rows_to_csv(rows), args.out)
    divergent = sum(1 for r in rows if r.flag != "ok")
    print(f"scan: {len(rows)} rows ({divergent} divergent)", file=sys.stderr)
    return EXIT_OK


def _figure_axes(fig: int) -> dict:
    theta_axis = np.linspace(0.0, math.pi, FIG_AXIS_POINTS).tolist()
    if fig == 2:
        return {"n": [10], "q0": [0.33], "theta1": theta_axis, "theta2": theta_axis}
    if fig == 3:
        return {"n": [10_000], "q0": [0.33], "theta1": theta_axis, "theta2": theta_axis}
    if fig == 4:
        return {"n": [math.inf], "q0": [0.33], "theta1": theta_axis, "theta2": theta_axis}
    # fig 5: bound against n for a few theta2 slices
    n_axis = sorted(set(int(round(v)) for v in np.geomspace(5, 10_000, 40)))
    return {"n": n_axis, "q0": [0.33], "theta1": [2.0], "theta2": [0.5, 0.1, 0.05]}


def _parse_axis(spec: str, integer: bool = False) -> list[float]:
    spec = spec.strip()
    if spec.startswith("log:"):
        lo, hi, count = spec[4:].split(":")
        values = np.geomspace(float(lo), float(hi), int(count)).tolist()
        if integer:
            return sorted(set(int(round(v)) for v in values))
        return values
    if ":" in spec:
        lo, hi, count = spec.split(":")
        values = np.linspace(float(lo), float(hi), int(count)).tolist()
        return [int(round(v)) for v in values] if integer else values
    out: list[float] = []
    for token in spec.split(","):
        token = token.strip()
        if token == "inf":
            out.append(math.inf)
        elif integer:
            out.append(int(token))
        else:
            out.append(float(token))
    return out


# --------------------------------------------------------------------------
# simulate / estimate

def _cmd_simulate(args) -> int:
    doc = _load_json(args.config)
    parsed = parse_run_config(doc, require_scenario=True)
    seed = parsed["seed"] if args.seed is None else args.seed
    transcript = run_protocol(parsed["assignment"], parsed["config"],
                              rounds=parsed["rounds"], seed=seed)
    _emit(dumps_json(transcript_to_dict(transcript)), args.out)
    est = transcript.broadcast
    print(f"simulate: N={transcript.rounds} seed={seed} "
          f"omega_hat={[round(w, 6) for w in est.omega_hat]}", file=sys.stderr)
    return EXIT_OK


def _cmd_estimate(args) -> int:
    counts = load_counts(_load_json(args.counts))
    parsed = parse_run_config(_load_json(args.config), require_scenario=False)
    report = mle_estimate(counts, parsed["config"])
    _emit(dumps_json(estimate_to_dict(report)), args.out)
    print(f"estimate: N={counts.N} theta_hat={[round(v, 6) for v in report.theta_hat.theta]}",
          file=sys.stderr)
    return EXIT_OK


def _load_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise RunConfigError(f"{path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise RunConfigError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


if __name__ == "__main__":
    sys.exit(main())
