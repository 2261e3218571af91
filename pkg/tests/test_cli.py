import numpy as np
import pytest

from parfam import expressions as ex
from parfam.cli import main
from parfam.dataio import read_kv_file, write_csv_dataset, write_kv_file

FAST_CONFIG = {
    "model.max_deg_input_num": "1",
    "model.max_deg_input_den": "0",
    "model.max_deg_output_num": "3",
    "model.max_deg_output_den": "1",
    "model.base_functions": "sin",
    "optim.bh_iterations": "3",
}


@pytest.fixture
def fast_config_path(tmp_path):
    path = tmp_path / "config.txt"
    write_kv_file(path, sorted(FAST_CONFIG.items()))
    return path


def write_square_problem(path, n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2, 2, size=(n, 1))
    write_csv_dataset(path, X, X[:, 0] ** 2)


class TestFit:
    def test_end_to_end(self, tmp_path, fast_config_path, capsys):
        data = tmp_path / "square.csv"
        out = tmp_path / "result.txt"
        write_square_problem(data)
        rc = main(["fit", "--data", str(data), "--config", str(fast_config_path),
                   "--out", str(out), "--seed", "5"])
        assert rc == 0
        doc = read_kv_file(out)
        tree = ex.parse(doc["expression"])
        assert float(doc["r2.test"]) > 0.999
        assert doc["seed"] == "5"
        X = np.linspace(-2, 2, 9)[:, None]
        np.testing.assert_allclose(ex.evaluate(tree, X), X[:, 0] ** 2, atol=1e-5)
        assert "expression:" in capsys.readouterr().out

    def test_identical_seeds_byte_identical(self, tmp_path, fast_config_path):
        data = tmp_path / "square.csv"
        write_square_problem(data)
        outs = []
        for name in ("a.txt", "b.txt"):
            out = tmp_path / name
            rc = main(["fit", "--data", str(data), "--config", str(fast_config_path),
                       "--out", str(out), "--seed", "3"])
            assert rc == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_file_exits_2_without_output(self, tmp_path):
        out = tmp_path / "result.txt"
        rc = main(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(out)])
        assert rc == 2
        assert not out.exists()

    def test_malformed_csv_exits_2(self, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("x0,y\n1.0,2.0\nbroken\n")
        rc = main(["fit", "--data", str(data)])
        assert rc == 2

    def test_env_seed_fallback(self, tmp_path, fast_config_path, monkeypatch):
        data = tmp_path / "square.csv"
        out = tmp_path / "result.txt"
        write_square_problem(data)
        monkeypatch.setenv("PARFAM_SEED", "77")
        rc = main(["fit", "--data", str(data), "--config", str(fast_config_path),
                   "--out", str(out)])
        assert rc == 0
        assert read_kv_file(out)["seed"] == "77"

    def test_budget_exhaustion_exits_3(self, tmp_path):
        data = tmp_path / "over.csv"
        X = np.full((30, 1), 1e200)
        write_csv_dataset(data, X, np.ones(30))
        rc = main(["fit", "--data", str(data), "--eval-budget", "500"])
        assert rc == 3


class TestBenchmark:
    def write_suite(self, root, n_problems=2):
        root.mkdir(exist_ok=True)
        rng = np.random.default_rng(1)
        for i in range(n_problems):
            X = rng.uniform(-2, 2, size=(50, 1))
            y = (i + 1.0) * X[:, 0] ** 2
            write_csv_dataset(root / f"p{i}.csv", X, y)
            (root / f"p{i}.expr").write_text(f"({float(i + 1)!r} * (x0 ^ 2.0))\n")

    def test_easy_suite_all_solved(self, tmp_path, fast_config_path):
        suite = tmp_path / "suite"
        self.write_suite(suite)
        out = tmp_path / "summary.txt"
        rc = main(["benchmark", "--problems", str(suite), "--config",
                   str(fast_config_path), "--out", str(out), "--seed", "1"])
        assert rc == 0
        doc = read_kv_file(out)
        assert doc["aggregate.n_problems"] == "2"
        assert float(doc["aggregate.accuracy_rate"]) == 1.0
        assert float(doc["aggregate.symbolic_rate"]) == 1.0
        assert (tmp_path / "summary.txt.problems" / "p0.txt").exists()

    def test_unreadable_truth_skipped(self, tmp_path, fast_config_path):
        suite = tmp_path / "suite"
        self.write_suite(suite)
        (suite / "p1.expr").unlink()
        out = tmp_path / "summary.txt"
        rc = main(["benchmark", "--problems", str(suite), "--config",
                   str(fast_config_path), "--out", str(out)])
        assert rc == 0
        doc = read_kv_file(out)
        assert doc["aggregate.n_problems"] == "1"
        assert doc["aggregate.n_skipped"] == "1"

    def test_empty_directory_exits_2(self, tmp_path):
        empty = tmp_path / "none"
        empty.mkdir()
        assert main(["benchmark", "--problems", str(empty)]) == 2

    def test_parallel_matches_sequential(self, tmp_path, fast_config_path):
        suite = tmp_path / "suite"
        self.write_suite(suite)
        docs = []
        for jobs, name in (("1", "seq.txt"), ("2", "par.txt")):
            out = tmp_path / name
            rc = main(["benchmark", "--problems", str(suite), "--config",
                       str(fast_config_path), "--out", str(out), "--jobs", jobs,
                       "--seed", "4"])
            assert rc == 0
            docs.append(out.read_bytes())
        assert docs[0] == docs[1]


class TestExpressivity:
    def test_table_printed(self, capsys):
        assert main(["expressivity"]) == 0
        out = capsys.readouterr().out
        assert "0.9799" in out
        assert "0.9712" in out

    def test_counts_printed(self, capsys, tmp_path):
        rows = tmp_path / "rows.txt"
        assert main(["expressivity", "--length", "2", "--k", "3", "--n", "1",
                     "--out", str(rows)]) == 0
        out = capsys.readouterr().out
        assert "68" in out and "77" in out
        doc = read_kv_file(rows)
        assert doc["count.l2"] == "68,77"

    def test_bad_arguments_exit_2(self):
        assert main(["expressivity", "--b", "0"]) == 2


class TestGenerate:
    def test_writes_problems_deterministically(self, tmp_path):
        gen_cfg = tmp_path / "gen.txt"
        write_kv_file(gen_cfg, [("gen.deg_output_num", "2"), ("gen.n_points", "40")])
        dirs = []
        for name in ("one", "two"):
            out_dir = tmp_path / name
            rc = main(["generate", "--gen-config", str(gen_cfg), "--out-dir",
                       str(out_dir), "--count", "3", "--seed", "9"])
            assert rc == 0
            dirs.append(out_dir)
        for stem in ("problem_000", "problem_001", "problem_002"):
            assert (dirs[0] / f"{stem}.csv").read_bytes() == (dirs[1] / f"{stem}.csv").read_bytes()
            assert (dirs[0] / f"{stem}.expr").read_bytes() == (dirs[1] / f"{stem}.expr").read_bytes()

    def test_generated_problems_feed_benchmark(self, tmp_path, fast_config_path):
        gen_cfg = tmp_path / "gen.txt"
        write_kv_file(gen_cfg, [("gen.deg_output_num", "2"), ("gen.n_points", "60")])
        problems = tmp_path / "problems"
        assert main(["generate", "--gen-config", str(gen_cfg), "--out-dir",
                     str(problems), "--count", "2", "--seed", "2"]) == 0
        out = tmp_path / "summary.txt"
        rc = main(["benchmark", "--problems", str(problems), "--config",
                   str(fast_config_path), "--out", str(out), "--seed", "0"])
        assert rc == 0
        doc = read_kv_file(out)
        assert doc["aggregate.n_problems"] == "2"
