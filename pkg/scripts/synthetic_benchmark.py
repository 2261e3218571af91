#!/usr/bin/env python3
"""Generate a synthetic problem suite and run the benchmark on it.

End-to-end demo of the generator + fitter + metrics pipeline:

    python scripts/synthetic_benchmark.py --count 10 --noise 0.001 --workdir /tmp/suite
"""

import argparse
import sys
import tempfile
from pathlib import Path

from parfam.cli import main as cli_main
from parfam.dataio import write_kv_file

GEN_OVERRIDES = [
    ("gen.n_vars", "1"),
    ("gen.deg_output_num", "3"),
    ("gen.deg_output_den", "1"),
    ("gen.n_points", "200"),
]

FIT_OVERRIDES = [
    ("model.max_deg_input_num", "1"),
    ("model.max_deg_input_den", "0"),
    ("model.max_deg_output_num", "3"),
    ("model.max_deg_output_den", "1"),
    ("model.base_functions", ""),
    ("model.max_base_functions", "0"),
    ("optim.bh_iterations", "5"),
]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--workdir", default=None)
    args = parser.parse_args(argv)

    workdir = Path(args.workdir) if args.workdir else Path(tempfile.mkdtemp(prefix="parfam_"))
    workdir.mkdir(parents=True, exist_ok=True)
    gen_cfg = workdir / "gen.txt"
    fit_cfg = workdir / "fit.txt"
    write_kv_file(gen_cfg, GEN_OVERRIDES)
    write_kv_file(fit_cfg, FIT_OVERRIDES)
    problems = workdir / "problems"

    rc = cli_main(["generate", "--gen-config", str(gen_cfg), "--out-dir", str(problems),
                   "--count", str(args.count), "--seed", str(args.seed)])
    if rc != 0:
        return rc
    summary = workdir / "summary.txt"
    rc = cli_main(["benchmark", "--problems", str(problems), "--config", str(fit_cfg),
                   "--out", str(summary), "--noise", str(args.noise),
                   "--seed", str(args.seed), "--jobs", str(args.jobs)])
    print(f"summary written to {summary}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
