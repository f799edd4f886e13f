"""Command-line entry point.

Every command that writes a file also writes ``<file>.manifest.json`` with the
full argument vector, so ``run --from-manifest`` can replay it. Exit codes:
0 success, 1 a checked threshold or invariant failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Sequence

import numpy as np

from . import analysis, coupling, stats
from .errors import LambdaCoalError
from .measure import INV, FiniteMeasure, integrate, mu, mu_sequence, parse_measure
from .ratetable import build_rate_table
from .rng import replicate_rng
from .simulator import CountsBatch, run_replicates, summarize, write_replicates_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_THRESHOLDS = {"kingman": 0.02, "exp": 0.025, "beta": 0.05, "conjecture": 0.05}


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _fmt(value: float) -> str:
    return repr(float(value))


def write_manifest(out: str | Path, command: str, argv: Sequence[str], config: dict, invariants: dict, started: float) -> Path:
    path = Path(str(out) + ".manifest.json")
    doc = {
        "command": command,
        "argv": list(argv),
        "config": {key: value for key, value in config.items() if key != "func"},
        "version": _version(),
        "wall_clock_s": round(time.time() - started, 3),
        "invariants": invariants,
        "outputs": [str(out)],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _measure(spec: str) -> FiniteMeasure:
    return parse_measure(spec)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args, argv, started) -> int:
    measure = _measure(args.measure)
    table = build_rate_table(max(args.size, 2), measure)
    batch = run_replicates(args.size, table, args.seed, args.reps, mode=args.mode, workers=args.workers)
    incomplete = int(np.sum(np.isnan(batch.tmrca)))
    if args.out:
        write_replicates_csv(args.out, batch)
        write_manifest(args.out, "simulate", argv, vars(args), {"complete_paths": {"pass": args.reps - incomplete, "fail": incomplete}}, started)
    else:
        _write_batch_stdout(batch)
    return EXIT_OK


def _write_batch_stdout(batch: CountsBatch) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(("replicate", "tmrca", "l_ext", "l_total", "x1", "t_1"))
    for row in range(len(batch.replicate)):
        writer.writerow((int(batch.replicate[row]), _fmt(batch.tmrca[row]), _fmt(batch.l_ext[row]), _fmt(batch.l_total[row]), int(batch.x1[row]), _fmt(batch.t_1[row])))


def cmd_divide(args, argv, started) -> int:
    m1, m2 = _measure(args.measure1), _measure(args.measure2)
    size = args.size
    t1, t2 = build_rate_table(max(size, 2), m1), build_rate_table(max(size, 2), m2)
    rows = []
    bad = 0
    for rep in range(args.reps):
        path = coupling.measure_division_simulate(size, m1, m2, replicate_rng(args.seed, rep), t1, t2)
        if not path.complete:
            bad += 1
            rows.append((rep, math.nan, math.nan, math.nan, 0, math.nan))
            continue
        summary = summarize(path)
        rows.append((rep, summary.tmrca, summary.l_ext, summary.l_total, summary.x1, summary.t_1))
    report = {"complete_paths": {"pass": args.reps - bad, "fail": bad}}
    _emit_rows(args.out, ("replicate", "tmrca", "l_ext", "l_total", "x1", "t_1"), rows)
    if args.out:
        write_manifest(args.out, "divide", argv, vars(args), report, started)
    return EXIT_OK


def _emit_rows(out: str | None, header: Sequence[str], rows: list[tuple]) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(tuple(_fmt(value) if isinstance(value, float) else value for value in row))
    finally:
        if out:
            fh.close()


TWOTYPE_COLUMNS = ("replicate", "tmrca", "l_total", "first_mark_1", "noise_external_1", "first_mark_2", "noise_external_2")


def cmd_twotype(args, argv, started) -> int:
    measure = _measure(args.measure)
    size = args.size
    if size < 2:
        raise UsageError("twotype needs --n >= 2")
    m1, m2 = coupling.default_split(size, measure)
    table1 = build_rate_table(size, m1)
    eta = coupling.EtaSampler(m2) if integrate(m2, INV) > 0 else None
    rows = []
    label_bad = 0
    for rep in range(args.reps):
        tp = coupling.two_type_simulate(size, m1, m2, replicate_rng(args.seed, rep), horizon=args.horizon, table1=table1, eta=eta)
        seen: set[int] = set()
        for _, flipped in tp.label_updates:
            if seen.intersection(flipped):
                label_bad += 1
                break
            seen.update(flipped)
        path = tp.path
        done = path.complete
        tmrca = path.times[-1] if done and path.times else (0.0 if size == 1 else math.nan)
        l_total = summarize(path).l_total if done else math.nan
        rows.append((rep, float(tmrca), float(l_total), float(tp.first_mark[0]), float(tp.noise_external[0]), float(tp.first_mark[1]), float(tp.noise_external[1])))
    _emit_rows(args.out, TWOTYPE_COLUMNS, rows)
    if args.out:
        write_manifest(args.out, "twotype", argv, vars(args), {"label_monotonicity": {"pass": args.reps - label_bad, "fail": label_bad}}, started)
    return EXIT_OK if label_bad == 0 else EXIT_FAIL


def cmd_tripling(args, argv, started) -> int:
    measure = _measure(args.measure)
    rep = coupling.tripling_check(args.size, measure, args.horizon_t, args.reps, replicate_rng(args.seed, 0))
    doc = {
        "reps": rep.reps,
        "violations": rep.violations,
        "w_mean": rep.w_mean,
        "w_mean_se": rep.w_mean_se,
        "w_sq_mean": rep.w_sq_mean,
        "w_sq_mean_se": rep.w_sq_mean_se,
        "exact_mean": rep.exact_mean,
        "exact_sq_mean": rep.exact_sq_mean,
        "n_draws": rep.n_draws,
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        write_manifest(args.out, "tripling", argv, vars(args), {"tripling_bound": {"pass": rep.reps - rep.violations, "fail": rep.violations}}, started)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.violations == 0 else EXIT_FAIL


def cmd_diagnose(args, argv, started) -> int:
    measure = _measure(args.measure)
    grid = [float(token) for token in args.grid.split(",")]
    rep = analysis.condition_diagnostics(measure, grid, with_f=not args.no_f)
    text = json.dumps(rep.to_json(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        write_manifest(args.out, "diagnose", argv, vars(args), {}, started)
    else:
        sys.stdout.write(text)
    return EXIT_OK


PERTURBATIONS = ("none", "log5")


def cmd_recur(args, argv, started) -> int:
    measure = _measure(args.measure)
    table = build_rate_table(args.nmax, measure)
    mus = mu_sequence(args.nmax, measure)
    if args.which == "a":
        if args.perturb == "log5":
            vals = analysis.solve_external_recurrence(args.nmax, table, analysis.perturbed_cost(table), seeds=[args.seed_value] * 5)
        else:
            vals = analysis.solve_external_recurrence(args.nmax, table)
        scaled = mus * vals
    else:
        if args.perturb != "none":
            raise UsageError("--perturb applies to --which a only")
        vals = analysis.solve_total_recurrence(args.nmax, table, mus)
        scaled = vals
    rows = [(size, float(vals[size]), float(mus[size]), float(scaled[size])) for size in range(1, args.nmax + 1)]
    _emit_rows(args.out, ("n", "value", "mu", "normalized"), rows)
    if args.out:
        write_manifest(args.out, "recur", argv, vars(args), {}, started)
    return EXIT_OK


def _beta_shape(measure: FiniteMeasure) -> tuple[float, float]:
    if len(measure.pieces) == 1 and not measure.atoms and measure.pieces[0].family == "beta":
        shape_a, shape_b, _ = measure.pieces[0].params
        return shape_a, shape_b
    raise UsageError("--law beta/conjecture needs a single beta piece (use --a/--b or --c otherwise)")


def cmd_verify(args, argv, started) -> int:
    measure = _measure(args.measure)
    size = args.size
    table = build_rate_table(size, measure)
    batch = run_replicates(size, table, args.seed, args.reps, mode="counts", workers=args.workers)
    external = batch.t_1
    if args.law == "kingman":
        scaled = size * external
        law = stats.kingman_law()
    elif args.law == "exp":
        scale = integrate(measure, INV) if args.scale == "total" else mu(size, measure)
        scaled = scale * external
        law = stats.exp_law()
    elif args.law == "beta":
        shape_a, shape_b = (args.shape_a, args.shape_b) if args.shape_a is not None else _beta_shape(measure)
        scaled = size ** (1 - shape_a) * external
        law = stats.beta_limit_law(shape_a, shape_b)
    else:
        if args.constant is not None:
            constant = args.constant
        else:
            shape_a = args.shape_a if args.shape_a is not None else _beta_shape(measure)[0]
            constant = stats.beta_conjecture_c(shape_a)
        scaled = mu(size, measure) * external
        law = stats.conjecture_law(constant)
    distance, p_value = stats.ks_test(scaled, law)
    thr = args.threshold if args.threshold is not None else DEFAULT_THRESHOLDS[args.law]
    ok = distance < thr
    doc = {"law": law.name, "n": size, "reps": args.reps, "ks": distance, "p_value": p_value, "threshold": thr, "pass": ok}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        write_manifest(args.out, "verify", argv, vars(args), {"ks_threshold": {"pass": int(ok), "fail": int(not ok)}}, started)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_run(args, argv, started) -> int:
    doc = json.loads(Path(args.from_manifest).read_text())
    inner = doc.get("argv")
    if not isinstance(inner, list) or not inner or inner[0] == "run":
        raise UsageError("manifest has no replayable argv")
    return main(inner)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lambdacoal", description="Exact Lambda-coalescent simulation and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, measure=True, reps=True):
        if measure:
            sp.add_argument("--measure", required=True, help="preset (kingman, lebesgue, beta:a,b, logpow:p,q,r) or file:path.json")
        sp.add_argument("--n", dest="size", type=int, required=True)
        if reps:
            sp.add_argument("--reps", type=int, required=True)
            sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)

    sp = sub.add_parser("simulate", help="simulate replicates and write per-replicate statistics")
    common(sp)
    sp.add_argument("--mode", choices=("full", "counts"), default="counts")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("divide", help="measure-division construction from two measures")
    sp.add_argument("--measure1", required=True)
    sp.add_argument("--measure2", required=True)
    common(sp, measure=False)
    sp.set_defaults(func=cmd_divide)

    sp = sub.add_parser("twotype", help="two-type marked coalescent, split at 1/n")
    common(sp)
    sp.add_argument("--horizon", type=float, default=math.inf)
    sp.set_defaults(func=cmd_twotype)

    sp = sub.add_parser("tripling", help="tripling bound and first-collision moments")
    common(sp)
    sp.add_argument("--t", dest="horizon_t", type=float, required=True)
    sp.set_defaults(func=cmd_tripling)

    sp = sub.add_parser("diagnose", help="growth-condition diagnostics on a grid of n")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--grid", default="1e2,1e3,1e4,1e5")
    sp.add_argument("--no-f", action="store_true", help="skip the nested-quadrature f column")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("recur", help="solve the external-branch or total-length recurrence")
    sp.add_argument("--measure", required=True)
    sp.add_argument("--nmax", type=int, required=True)
    sp.add_argument("--which", choices=("a", "b"), default="a")
    sp.add_argument("--perturb", choices=PERTURBATIONS, default="none", help="log5: c_n = (1 + 5/ln n)/g_n with five seeded values")
    sp.add_argument("--seed-value", type=float, default=7.0)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_recur)

    sp = sub.add_parser("verify", help="KS check of a scaled external branch against a limit law")
    common(sp)
    sp.add_argument("--law", choices=tuple(DEFAULT_THRESHOLDS), required=True)
    sp.add_argument("--threshold", type=float, default=None)
    sp.add_argument("--scale", choices=("mu", "total"), default="mu", help="exp law: scale by mu_n or by the full x^-1 integral")
    sp.add_argument("--a", dest="shape_a", type=float, default=None)
    sp.add_argument("--b", dest="shape_b", type=float, default=None)
    sp.add_argument("--c", dest="constant", type=float, default=None)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("run", help="replay a command from its manifest")
    sp.add_argument("--from-manifest", required=True)
    sp.set_defaults(func=cmd_run)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    started = time.time()
    try:
        return args.func(args, argv, started)
    except (UsageError, LambdaCoalError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
