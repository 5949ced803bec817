"""``phrec`` command line.

Every subcommand prints a short text summary and writes its numbers as CSV
(and JSON where noted) into ``--out-dir``. Exit status: 0 on success, 1 on
invalid input, 2 on numerical failure.
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import errors
from .cancer import (ALT_FORWARD_LEVELS, FORWARD_LEVELS, CancerParams, build_cancer_generator,
                     cancer_tables)
from .counts import count_distribution
from .data import load_stanford, read_heart_csv, scenario_counts
from .errors import PhrecError, UnknownFlag, ValidationError
from .fitting import FitConfig, FitResult, bootstrap, fit, fit_restricted
from .heart import PARAM_NAMES, REFERENCE_THETA, build_generator, log_likelihood
from .reports import HORIZON_LABELS, covariates, format_table, heart_tables, write_csv
from .simulate import simulate_counts
from .stages import load_model, save_model
from .units import parse_duration, parse_durations

# module each error family belongs to, for diagnostics
ERROR_MODULES = {
    errors.NotSquare: "matrix-core", errors.SignViolation: "matrix-core",
    errors.RowSumPositive: "matrix-core", errors.AllRowsConservative: "matrix-core",
    errors.Overflow: "matrix-core", errors.Singular: "matrix-core",
    errors.NegativeTime: "ph-dist", errors.IndexOutOfRange: "stage-model",
    errors.ZeroProbabilityStage: "stage-model", errors.StepSizeUnderflow: "count-ode",
    errors.SequenceExplosion: "count-ode", errors.BadInterval: "heart-model",
    errors.NonFiniteRate: "heart-model", errors.NonPositiveLikelihood: "heart-model",
    errors.AllStartsFailed: "fitter", errors.BootstrapFailure: "fitter",
    errors.MalformedRow: "cli", errors.InconsistentPair: "cli",
    errors.NonmonotoneInterval: "cli", errors.UnknownFlag: "cli",
}


def error_module(exc):
    for cls in type(exc).__mro__:
        if cls in ERROR_MODULES:
            return ERROR_MODULES[cls]
    return "phrec"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UnknownFlag(message)


def threads_from(args):
    env = os.environ.get("PHREC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"PHREC_THREADS must be an integer, got {env!r}") from None
    return max(1, args.threads)


def _out(args, name):
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _patients(args):
    return read_heart_csv(args.data) if args.data else load_stanford()


def _theta_from(path):
    if not path:
        return REFERENCE_THETA
    return FitResult.from_dict(json.loads(Path(path).read_text())).theta_hat


# -- subcommands ----------------------------------------------------------------

def cmd_validate(args):
    model = load_model(args.model)
    print(f"ok: k={model.k} n={model.n} stages={','.join(model.stage_labels)} unit={model.time_unit}")


def cmd_fit(args):
    patients = _patients(args)
    counts = scenario_counts(patients)
    print("patients:", len(patients), " ".join(f"{k}={v}" for k, v in counts.items()))
    config = FitConfig(n_states=args.n, starts=args.starts, seed=args.seed,
                       max_evals=args.max_evals, workers=threads_from(args))
    frozen = [p for p in args.freeze.split(",") if p] if args.freeze else None
    result = fit_restricted(patients, config, frozen) if frozen else fit(patients, config)
    Path(args.out).write_text(json.dumps(result.to_dict(), indent=2))
    write_csv(_out(args, "fit.csv"), ("parameter", "value"),
              [(k, getattr(result.theta_hat, k)) for k in PARAM_NAMES] + [("loglik", result.loglik)])
    print(f"loglik {result.loglik:.4f}  converged={result.convergence}  evals={result.evals}")
    for k in PARAM_NAMES:
        print(f"  {k:8s} {getattr(result.theta_hat, k): .6g}")


def cmd_count_prob(args):
    model = load_model(args.model)
    t = parse_durations(args.t, model.time_unit)
    order = np.argsort(t, kind="stable")
    dist = count_distribution(model, args.start_stage, np.asarray(t)[order], args.lmax)
    rows = [(dist.horizons[h], l, dist.probs[h, l])
            for h in range(dist.horizons.size) for l in range(args.lmax + 1)]
    write_csv(_out(args, "count_prob.csv"), ("t", "l", "prob"), rows)
    print(format_table(("t", "l", "P[N(t)=l]"), rows))


def cmd_sojourn(args):
    model = load_model(args.model)
    u = parse_duration(args.u, model.time_unit)
    ts = parse_durations(args.t, model.time_unit)
    rows = [(u, t, model.expected_sojourn(args.stage, u, t)) for t in ts]
    write_csv(_out(args, "sojourn.csv"), ("u", "t", "expected_sojourn"), rows)
    print(format_table(("u", "t", "sojourn"), rows))


def cmd_transprob(args):
    model = load_model(args.model)
    u = parse_duration(args.u, model.time_unit)
    ts = parse_durations(args.t, model.time_unit)
    rows = [(args.from_stage, args.to_stage, u, t,
             model.stage_transition_prob(args.from_stage, args.to_stage, u, t)) for t in ts]
    write_csv(_out(args, "transprob.csv"), ("from", "to", "u", "t", "prob"), rows)
    print(format_table(("from", "to", "u", "t", "prob"), rows))


def cmd_bootstrap(args):
    patients = _patients(args)
    config = FitConfig(n_states=args.n, starts=args.starts, seed=args.seed,
                       workers=threads_from(args))
    theta0 = _theta_from(args.fit) if args.fit else None
    res = bootstrap(patients, config, args.replicates, args.seed, theta0=theta0)
    Path(_out(args, "bootstrap.json")).write_text(json.dumps(res.to_dict(), indent=2))
    rows = [(k, res.std[k], *res.ci95[k]) for k in PARAM_NAMES]
    write_csv(_out(args, "bootstrap.csv"), ("parameter", "std", "ci_lower", "ci_upper"), rows)
    print(f"replicates kept {len(res.replicates)} failed {res.failed}")
    print(format_table(("param", "std", "lower", "upper"), rows, width=13))


def cmd_simulate(args):
    model = load_model(args.model)
    t = sorted(parse_durations(args.t, model.time_unit))
    s = simulate_counts(model, args.start_stage, t, args.paths, args.seed, args.lmax,
                        threads=threads_from(args))
    doc = s.to_dict()
    text = json.dumps(doc, indent=2)
    Path(_out(args, "simulate.json")).write_text(text)
    rows = [(s.horizons[h], str(l) if l <= s.lmax else f">{s.lmax}", s.count_freq[h, l], s.count_se[h, l])
            for h in range(s.horizons.size) for l in range(s.lmax + 2)]
    write_csv(_out(args, "simulate.csv"), ("t", "l", "freq", "se"), rows)
    print(text)


def cmd_heart_demo(args):
    theta = _theta_from(args.theta)
    patients = _patients(args)
    ll = log_likelihood(theta, patients)
    print(f"log-likelihood at the given parameters ({len(patients)} patients): {ll:.3f}")
    write_csv(_out(args, "heart_params.csv"), ("parameter", "value"),
              [(k, getattr(theta, k)) for k in PARAM_NAMES] + [("n", theta.n), ("loglik", ll)])
    if args.model_out:
        model = build_generator(theta, covariates(args.age, args.year, args.surgery, args.age_scale))
        save_model(model, args.model_out)
    tabs = heart_tables(theta, args.age_scale)
    hdr = HORIZON_LABELS
    write_csv(_out(args, "heart_counts.csv"), ("age", "year", "surgery", "l", *hdr), tabs.count_rows())
    write_csv(_out(args, "heart_sojourn.csv"), ("age", *hdr), tabs.sojourn_rows())
    write_csv(_out(args, "heart_transitions.csv"), ("from", "to", *hdr), tabs.transition_rows())
    print(f"\nP[N(t)=l] (age scale: {args.age_scale})")
    print(format_table(("age", "year", "surg", "l", *hdr), tabs.count_rows(), width=10))
    print("\nexpected sojourn in disease stage (days)")
    print(format_table(("age", *hdr), tabs.sojourn_rows(), width=10))
    print("\nstage transition probabilities")
    print(format_table(("from", "to", *hdr), tabs.transition_rows(), width=11))


def cmd_cancer_demo(args):
    levels = FORWARD_LEVELS if args.reading == "forward" else ALT_FORWARD_LEVELS
    if args.model_out:
        save_model(build_cancer_generator(CancerParams(), args.input_stage, levels), args.model_out)
    tabs = cancer_tables(CancerParams(), levels)
    write_csv(_out(args, "cancer_counts.csv"), ("stage", "l", "t", "prob"), tabs.count_rows())
    write_csv(_out(args, "cancer_sojourn.csv"), ("stage", "t", "sojourn"), tabs.sojourn_rows())
    write_csv(_out(args, "cancer_between.csv"), ("stage", "t", "to", "prob"), tabs.between_rows())
    print(f"forward levels {levels}")
    print("\nP[N(t)=l], months")
    print(format_table(("stage", "l", "t", "prob"), tabs.count_rows(), width=9))
    print("\nexpected sojourn in the input stage (months)")
    print(format_table(("stage", "t", "sojourn"), tabs.sojourn_rows(), width=9))
    print("\none transition, into stage")
    print(format_table(("stage", "t", "to", "prob"), tabs.between_rows(), width=9))


# -- parser -----------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for CSV/JSON outputs")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads (PHREC_THREADS overrides)")

    p = _Parser(prog="phrec", description="Phase-type stage models: counts, sojourns, fitting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", parents=[common], help="check a model JSON file")
    s.add_argument("model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("fit", parents=[common], help="fit the heart model by maximum likelihood")
    s.add_argument("--data", help="patient CSV (default: bundled Stanford data)")
    s.add_argument("--n", type=int, default=3, help="states per stage")
    s.add_argument("--starts", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-evals", type=int, default=1500)
    s.add_argument("--freeze", help="comma-separated parameters held at 0")
    s.add_argument("--out", default="fit.json")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("count-prob", parents=[common], help="P[N(t)=l] from a start stage")
    s.add_argument("--model", required=True)
    s.add_argument("--start-stage", default="0")
    s.add_argument("--t", required=True, help="comma-separated durations, e.g. 30d,6m,1y")
    s.add_argument("--lmax", type=int, default=2)
    s.set_defaults(func=cmd_count_prob)

    s = sub.add_parser("sojourn", parents=[common], help="expected continuous stay in a stage")
    s.add_argument("--model", required=True)
    s.add_argument("--stage", default="0")
    s.add_argument("--u", default="0")
    s.add_argument("--t", required=True)
    s.set_defaults(func=cmd_sojourn)

    s = sub.add_parser("transprob", parents=[common], help="stage-to-stage transition probability")
    s.add_argument("--model", required=True)
    s.add_argument("--from", dest="from_stage", required=True)
    s.add_argument("--to", dest="to_stage", required=True, help="stage label/index or D")
    s.add_argument("--u", default="0")
    s.add_argument("--t", required=True)
    s.set_defaults(func=cmd_transprob)

    s = sub.add_parser("bootstrap", parents=[common], help="nonparametric bootstrap of the heart fit")
    s.add_argument("--data")
    s.add_argument("--n", type=int, default=3)
    s.add_argument("--replicates", type=int, default=1000)
    s.add_argument("--starts", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fit", help="fit JSON used as the warm start (default: fit first)")
    s.set_defaults(func=cmd_bootstrap)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo transition counts")
    s.add_argument("--model", required=True)
    s.add_argument("--start-stage", default="0")
    s.add_argument("--t", required=True)
    s.add_argument("--paths", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lmax", type=int, default=3)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("heart-demo", parents=[common], help="heart model report tables")
    s.add_argument("--theta", help="fit JSON (default: the reference estimates)")
    s.add_argument("--data")
    s.add_argument("--age-scale", choices=("file", "raw"), default="file")
    s.add_argument("--model-out", help="also save the generator for one profile as model JSON")
    s.add_argument("--age", type=float, default=30.0, help="profile age in years (for --model-out)")
    s.add_argument("--year", type=float, default=3.0)
    s.add_argument("--surgery", type=int, choices=(0, 1), default=0)
    s.set_defaults(func=cmd_heart_demo)

    s = sub.add_parser("cancer-demo", parents=[common], help="six-stage cancer model tables")
    s.add_argument("--reading", choices=("forward", "alt"), default="forward",
                   help="forward-progression index range: levels 1..4 or 0..3")
    s.add_argument("--model-out", help="also save the generator as model JSON")
    s.add_argument("--input-stage", default="0", help="input stage for --model-out")
    s.set_defaults(func=cmd_cancer_demo)
    return p


def _prog(command):
    return f"phrec {command}" if command else "phrec"


def main(argv=None):
    parser = build_parser()
    command = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        args.func(args)
    except PhrecError as e:
        print(f"{_prog(command)}: [{error_module(e)}] {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, json.JSONDecodeError) as e:
        print(f"{_prog(command)}: [cli] {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

