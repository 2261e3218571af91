#!/usr/bin/env python3
"""Desk-scale equation-recovery experiment on the Nguyen-style targets.

Fits each target over several seeds and reports the symbolic-recovery rate,
mirroring the benchmark protocol used in the test suite but with knobs for
longer runs.  Example:

    python scripts/run_nguyen.py --seeds 6 --problems nguyen1 nguyen5
"""

import argparse
import sys
import time

import numpy as np

from parfam import expressions as ex
from parfam.metrics import symbolic_match
from parfam.optimize import FitConfig
from parfam.search import SearchConfig, fit_auto

PROBLEMS = {
    "nguyen1": ("(((x0 ^ 3.0) + (x0 ^ 2.0)) + x0)", (-2.0, 2.0)),
    "nguyen2": ("((((x0 ^ 4.0) + (x0 ^ 3.0)) + (x0 ^ 2.0)) + x0)", (-2.0, 2.0)),
    "nguyen3": ("(((((x0 ^ 5.0) + (x0 ^ 4.0)) + (x0 ^ 3.0)) + (x0 ^ 2.0)) + x0)", (-2.0, 2.0)),
    "nguyen4": ("((((((x0 ^ 6.0) + (x0 ^ 5.0)) + (x0 ^ 4.0)) + (x0 ^ 3.0)) + (x0 ^ 2.0)) + x0)",
                (-2.0, 2.0)),
    "nguyen5": ("((sin((x0 ^ 2.0)) * cos(x0)) - 1.0)", (-3.0, 3.0)),
}


def nguyen_search_config() -> SearchConfig:
    return SearchConfig(
        max_deg_input_num=2, max_deg_input_den=0,
        max_deg_output_num=6, max_deg_output_den=0,
        max_var_power=6, base_function_pool=("sin", "cos"),
        max_base_functions=2, time_budget=900.0, eval_budget=10_000_000)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--problems", nargs="*", default=sorted(PROBLEMS))
    parser.add_argument("--seeds", type=int, default=6)
    parser.add_argument("--points", type=int, default=256)
    parser.add_argument("--lam", type=float, default=0.001)
    parser.add_argument("--bh-iterations", type=int, default=30)
    parser.add_argument("--local-steps", type=int, default=600)
    args = parser.parse_args(argv)

    for name in args.problems:
        truth_text, (lo, hi) = PROBLEMS[name]
        truth = ex.parse(truth_text)
        truth_fn = lambda X: ex.evaluate(truth, X)  # noqa: E731
        hits = 0
        for seed in range(args.seeds):
            rng = np.random.default_rng(1000 + seed)
            X = rng.uniform(lo, hi, (args.points, 1))
            y = truth_fn(X)
            fit_cfg = FitConfig(lam=args.lam, bh_iterations=args.bh_iterations,
                                max_local_steps=args.local_steps, seed=seed)
            started = time.perf_counter()
            result = fit_auto(X, y, nguyen_search_config(), fit_cfg)
            elapsed = time.perf_counter() - started
            hit = symbolic_match(result.expression, truth, (lo, hi),
                                 np.random.default_rng(seed))
            hits += hit
            print(f"{name} seed={seed} {'HIT ' if hit else 'miss'} "
                  f"t={elapsed:6.1f}s r2_val={result.r2_val:.6f} "
                  f"expr={result.expression_text[:80]}")
        print(f"{name}: {hits}/{args.seeds} symbolic recoveries")
    return 0


if __name__ == "__main__":
    sys.exit(main())
