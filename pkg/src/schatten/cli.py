"""Command-line entry point: ``schatten <command> ...``; results go to stdout as JSON."""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import debias, estimators, ranks, sim, spectrum
from .errors import CapacityError, ConfigurationError, DegreeBoundError, InputError, NumericalError
from .linalg import read_csv_matrix
from .polys import abs_expansion


def _norm(text):
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _plans(path):
    return debias.load_plans(path) if path else None


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _scale_warning(Y, M):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r = estimators.check_scale_hypothesis(Y, M)
    print(f"note: sigma_1 bound M = {M}; estimated sigma_1(A)/(pq)^(1/4) = {r:.4g}", file=sys.stderr)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)


def cmd_derive(args):
    if args.poly:
        if args.poly != "abs" or args.degree is None:
            raise ConfigurationError("--poly abs requires --degree K")
        poly = abs_expansion(args.degree)
        _emit({"kind": "abs", "K": args.degree, "coeffs": [float(c) for c in poly.coeffs]}, args.out)
        return 0
    if args.k is None:
        raise ConfigurationError("derive-coeffs needs --k K or --poly abs --degree K")
    plans = {k: debias.derive_debias_plan(k) for k in range(1, args.k + 1)}
    summary = {"k": args.k, "plans": sorted(plans)}
    if args.verify:
        bias = {str(k): {" ".join(map(str, s)) or "()": str(v) for s, v in debias.plan_bias(p).items()}
                for k, p in plans.items()}
        summary["unbiased"] = all(not b for b in bias.values())
        summary["residual_bias"] = bias
    if args.out:
        debias.save_plans(plans, args.out)
        summary["out"] = args.out
    _emit(summary)
    return 0 if summary.get("unbiased", True) else 1


def cmd_estimate(args):
    Y = read_csv_matrix(args.input)
    plans = _plans(args.coeffs)
    if args.method == "poly" and args.M is None:
        _scale_warning(Y, estimators.DEFAULT_M)
    report = estimators.estimate(Y, args.method, s=args.norm, k=args.k, M=args.M, K=args.K, plans=plans)
    _emit(report.to_json())
    return 0


def cmd_spectrum(args):
    Y = read_csv_matrix(args.input)
    if args.method == "plugin":
        sv = spectrum.plugin_spectrum(Y)
        _emit({"sigma_hat": [float(v) for v in sv], "objective": None, "grid_step": None})
        return 0
    M = estimators.DEFAULT_M if args.M is None else args.M
    if args.M is None:
        _scale_warning(Y, M)
    res = spectrum.recover_spectrum(Y, M=M, K=args.K, plans=_plans(args.coeffs))
    _emit(res.to_json())
    return 0


def cmd_ranks(args):
    sv = np.asarray(read_csv_matrix(args.spectrum).data).ravel()
    _emit(ranks.effective_ranks(sv, args.s).to_json())
    return 0


def cmd_simulate(args):
    with open(args.config) as fh:
        cfg = sim.ExperimentConfig.from_json(json.load(fh))
    report = sim.run_risk_experiment(cfg, _plans(args.coeffs))
    with open(args.out, "w") as fh:
        fh.write(report.to_json_text())
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(report.to_csv_text())
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="schatten", description="Schatten-norm, spectrum and effective-rank estimation from Y = A + E.")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("derive-coeffs", help="derive U_k debiasing plans or |x| expansion coefficients")
    d.add_argument("--k", type=int, help="derive plans for k = 1..K")
    d.add_argument("--out", help="output file (JSON)")
    d.add_argument("--verify", action="store_true", help="re-check the exact unbiasedness identity")
    d.add_argument("--poly", choices=["abs"], help="emit coefficients of an approximating polynomial")
    d.add_argument("--degree", type=int, help="degree K of the |x| expansion")
    d.set_defaults(func=cmd_derive)

    e = sub.add_parser("estimate", help="estimate a Schatten norm or ER_{2,inf}")
    e.add_argument("--input", required=True, help="headerless CSV matrix")
    e.add_argument("--norm", type=_norm, help="Schatten index s (>= 1, or inf)")
    e.add_argument("--method", required=True,
                   choices=["frobenius", "operator", "even", "plugin", "naive", "poly", "er2inf"])
    e.add_argument("--k", type=int, help="half-degree for --method even")
    e.add_argument("--M", type=float, help="bound sigma_1(A) <= M (pq)^(1/4) (default 2)")
    e.add_argument("--K", type=int, help="polynomial degree for --method poly")
    e.add_argument("--coeffs", help="plan cache written by derive-coeffs")
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("spectrum", help="estimate the singular spectrum of A")
    s.add_argument("--input", required=True)
    s.add_argument("--M", type=float)
    s.add_argument("--K", type=int, help="number of even moments matched")
    s.add_argument("--coeffs")
    s.add_argument("--method", choices=["lp", "plugin"], default="lp")
    s.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("rank-indices", help="effective-rank indices of a spectrum")
    r.add_argument("--spectrum", required=True, help="CSV of singular values")
    r.add_argument("--s", type=float, default=2.0, help="Hill order (> 0, != 1)")
    r.set_defaults(func=cmd_ranks)

    m = sub.add_parser("simulate", help="run a Monte-Carlo risk experiment")
    m.add_argument("--config", required=True, help="experiment config JSON")
    m.add_argument("--out", required=True, help="report JSON")
    m.add_argument("--csv", help="optional per-cell CSV")
    m.add_argument("--coeffs")
    m.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigurationError, DegreeBoundError, CapacityError, NumericalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
