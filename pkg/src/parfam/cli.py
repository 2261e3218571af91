"""Command-line interface: fit, benchmark, expressivity, generate.

Exit codes are stable API: 0 success, 2 input error, 3 budget exhaustion
with no result.  The seed comes from --seed, falling back to the
PARFAM_SEED environment variable, then 0.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
import zlib
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import expressions as ex
from .dataio import (
    build_configs,
    build_gen_config,
    fit_result_items,
    format_value,
    read_csv_dataset,
    read_kv_file,
    write_csv_dataset,
    write_kv_file,
)
from .datagen import generate_problem
from .errors import DatasetFormatError, ExpressionSyntaxError, NoCandidateError, ParfamError
from .expressivity import TreeParams, exact_counts, ratio_table
from .metrics import ACCURACY_R2, add_noise, complexity, symbolic_match
from .optimize import split_validation
from .search import FitResult, fit_auto

TEST_FRACTION = 0.2


def _resolve_seed(arg_seed) -> int:
    if arg_seed is not None:
        return int(arg_seed)
    env = os.environ.get("PARFAM_SEED")
    return int(env) if env else 0


def _split_test(X, y):
    """Hold out the last 20% of rows as the test set."""
    n = X.shape[0]
    n_test = max(1, int(round(TEST_FRACTION * n))) if n > 3 else 0
    cut = n - n_test
    return X[:cut], y[:cut], X[cut:], y[cut:]


def _tree_r2(tree, X, y):
    from .metrics import r_squared

    if X.shape[0] == 0:
        return None
    values = ex.evaluate(tree, X)
    if not np.all(np.isfinite(values)):
        return float("-inf")
    return r_squared(y, values)


# ---------------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    seed = _resolve_seed(args.seed)
    X, y = read_csv_dataset(args.data)
    search_cfg, fit_cfg = build_configs(read_kv_file(args.config) if args.config else {})
    if args.time_budget is not None:
        search_cfg = replace(search_cfg, time_budget=float(args.time_budget))
    if args.eval_budget is not None:
        search_cfg = replace(search_cfg, eval_budget=int(args.eval_budget))
    fit_cfg = replace(fit_cfg, seed=seed)

    X_fit, y_fit, X_test, y_test = _split_test(X, y)
    result = fit_auto(X_fit, y_fit, search_cfg, fit_cfg)
    result.r2_test = _tree_r2(result.expression, X_test, y_test)

    if args.out:
        write_kv_file(args.out, fit_result_items(result))
    print(f"expression: {result.expression_text}")
    print(f"r2_train: {format_value(result.r2_train)}")
    print(f"r2_val: {format_value(result.r2_val)}")
    if result.r2_test is not None:
        print(f"r2_test: {format_value(result.r2_test)}")
    return 0


# ---------------------------------------------------------------------------
# benchmark


def _problem_seed(root_seed: int, name: str) -> int:
    return (int(root_seed) * 1_000_003 + zlib.crc32(name.encode("utf-8"))) % (2**32)


def _benchmark_one(task) -> tuple[str, dict]:
    """Fit a single problem; returns plain types so it can cross processes."""
    (csv_path, expr_path, config_overrides, time_budget, eval_budget,
     noise_sigma, root_seed) = task
    name = Path(csv_path).stem
    X, y = read_csv_dataset(csv_path)
    truth = ex.parse(Path(expr_path).read_text(encoding="utf-8").strip())
    search_cfg, fit_cfg = build_configs(config_overrides)
    if time_budget is not None:
        search_cfg = replace(search_cfg, time_budget=float(time_budget))
    if eval_budget is not None:
        search_cfg = replace(search_cfg, eval_budget=int(eval_budget))
    seed = _problem_seed(root_seed, name)
    fit_cfg = replace(fit_cfg, seed=seed)
    rng = np.random.default_rng(seed)

    X_fit, y_fit, X_test, y_test = _split_test(X, y)
    y_fit = add_noise(y_fit, noise_sigma, rng)
    result = fit_auto(X_fit, y_fit, search_cfg, fit_cfg)
    r2_test = _tree_r2(result.expression, X_test, y_test)
    r2 = r2_test if r2_test is not None else result.r2_val
    domain = (X.min(axis=0), X.max(axis=0))
    symbolic = symbolic_match(result.expression, truth, domain, rng)
    return name, {
        "expression": result.expression_text,
        "r2": float(r2),
        "accuracy": bool(r2 > ACCURACY_R2),
        "symbolic": bool(symbolic),
        "complexity": int(complexity(result.expression)),
        "eval_count": int(result.eval_count),
    }


def cmd_benchmark(args) -> int:
    seed = _resolve_seed(args.seed)
    problems_dir = Path(args.problems)
    if not problems_dir.is_dir():
        raise DatasetFormatError(f"{problems_dir} is not a directory")
    csv_paths = sorted(problems_dir.glob("*.csv"))
    if not csv_paths:
        raise DatasetFormatError(f"no problem CSVs found in {problems_dir}")
    overrides = read_kv_file(args.config) if args.config else {}
    build_configs(overrides)  # fail fast on bad config

    tasks = []
    skipped = []
    for csv_path in csv_paths:
        expr_path = csv_path.with_suffix(".expr")
        try:
            ex.parse(expr_path.read_text(encoding="utf-8").strip())
        except (OSError, ExpressionSyntaxError):
            skipped.append(csv_path.stem)
            continue
        tasks.append((str(csv_path), str(expr_path), overrides, args.time_budget,
                      args.eval_budget, float(args.noise), seed))

    results: dict[str, dict] = {}
    part_dir = Path(str(args.out) + ".problems") if args.out else None
    if part_dir:
        part_dir.mkdir(parents=True, exist_ok=True)

    def record(name: str, row: dict) -> None:
        results[name] = row
        if part_dir:
            write_kv_file(part_dir / f"{name}.txt",
                          [(k, row[k]) for k in sorted(row)])

    if args.jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for name, row in pool.map(_benchmark_one, tasks):
                record(name, row)
    else:
        for task in tasks:
            name, row = _benchmark_one(task)
            record(name, row)

    evaluated = sorted(results)
    n = len(evaluated)
    accuracy_rate = sum(results[p]["accuracy"] for p in evaluated) / n if n else 0.0
    symbolic_rate = sum(results[p]["symbolic"] for p in evaluated) / n if n else 0.0

    items: list[tuple[str, object]] = []
    for name in evaluated:
        row = results[name]
        for key in ("expression", "r2", "accuracy", "symbolic", "complexity"):
            items.append((f"problem.{name}.{key}", row[key]))
    items.extend([
        ("aggregate.n_problems", n),
        ("aggregate.n_skipped", len(skipped)),
        ("aggregate.accuracy_rate", accuracy_rate),
        ("aggregate.symbolic_rate", symbolic_rate),
        ("aggregate.noise_sigma", float(args.noise)),
        ("aggregate.seed", seed),
        ("aggregate.note", "symbolic rate uses an evaluation-based equivalence check"),
    ])
    if args.out:
        write_kv_file(args.out, items)
    print(f"problems evaluated: {n} (skipped: {len(skipped)})")
    print(f"accuracy-solution rate: {format_value(accuracy_rate)}")
    print(f"symbolic-solution rate: {format_value(symbolic_rate)}")
    return 0


# ---------------------------------------------------------------------------
# expressivity


def cmd_expressivity(args) -> int:
    if min(args.b, args.k_max, args.n_max) < 1 or args.length < 0:
        raise DatasetFormatError("expressivity arguments must be positive")
    ks = range(1, args.k_max + 1)
    ns = range(1, args.n_max + 1)
    table = ratio_table(args.b, ks, ns)

    width = 8
    print(f"coverage ratio r2/x1 for b={args.b}")
    print("n/k".rjust(4) + "".join(f"{k}".rjust(width) for k in ks))
    for n, row in zip(ns, table):
        print(f"{n}".rjust(4) + "".join(f"{v:.4f}".rjust(width) for v in row))

    rows: list[tuple[str, object]] = []
    for n, row in zip(ns, table):
        for k, value in zip(ks, row):
            rows.append((f"ratio.b{args.b}.k{k}.n{n}", f"{value:.4f}"))

    if args.length > 0:
        params = TreeParams(n=args.n, k=args.k, b=args.b)
        _, c_l, d_l = exact_counts(params, args.length)
        print(f"\nexact counts for b={args.b}, k={args.k}, n={args.n}")
        print("l".rjust(4) + "c_l".rjust(24) + "d_l".rjust(24))
        for l in range(args.length + 1):
            print(f"{l}".rjust(4) + f"{c_l[l]}".rjust(24) + f"{d_l[l]}".rjust(24))
        for l in range(args.length + 1):
            rows.append((f"count.l{l}", f"{c_l[l]},{d_l[l]}"))

    print("\nmachine-readable:")
    for key, value in rows:
        print(f"{key}={value}")
    if args.out:
        write_kv_file(args.out, rows)
    return 0


# ---------------------------------------------------------------------------
# generate


def cmd_generate(args) -> int:
    seed = _resolve_seed(args.seed)
    overrides = read_kv_file(args.gen_config) if args.gen_config else {}
    config = build_gen_config(overrides)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    accepted = 0
    rejected = 0
    while accepted < args.count:
        problem = generate_problem(config, rng)
        if problem is None:
            rejected += 1
            continue
        X, y, tree = problem
        stem = f"problem_{accepted:03d}"
        write_csv_dataset(out_dir / f"{stem}.csv", X, y)
        tmp = out_dir / f"{stem}.expr"
        tmp.write_text(ex.to_string(tree) + "\n", encoding="utf-8")
        accepted += 1
    print(f"wrote {accepted} problems to {out_dir} (rejected {rejected} candidates)")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parfam",
        description="Fit interpretable closed-form expressions to tabular data.")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit one CSV dataset")
    fit.add_argument("--data", required=True)
    fit.add_argument("--config")
    fit.add_argument("--out")
    fit.add_argument("--seed", type=int)
    fit.add_argument("--time-budget", type=float)
    fit.add_argument("--eval-budget", type=int)
    fit.set_defaults(func=cmd_fit)

    bench = sub.add_parser("benchmark", help="run a directory of problems")
    bench.add_argument("--problems", required=True)
    bench.add_argument("--config")
    bench.add_argument("--out")
    bench.add_argument("--noise", type=float, default=0.0)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--time-budget", type=float)
    bench.add_argument("--eval-budget", type=int)
    bench.set_defaults(func=cmd_benchmark)

    expr = sub.add_parser("expressivity", help="print coverage ratios and counts")
    expr.add_argument("--b", type=int, default=4)
    expr.add_argument("--k-max", type=int, default=6)
    expr.add_argument("--n-max", type=int, default=9)
    expr.add_argument("--length", "-L", type=int, default=0)
    expr.add_argument("--k", type=int, default=3)
    expr.add_argument("--n", type=int, default=1)
    expr.add_argument("--out")
    expr.set_defaults(func=cmd_expressivity)

    gen = sub.add_parser("generate", help="write synthetic problems")
    gen.add_argument("--gen-config")
    gen.add_argument("--out-dir", required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int)
    gen.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoCandidateError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (DatasetFormatError, ExpressionSyntaxError, FileNotFoundError,
            NotADirectoryError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ParfamError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
