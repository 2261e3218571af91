"""File formats: CSV datasets, flat key/value configs, result documents.

All three formats are plain UTF-8 text.  Floats are written in shortest
round-trip decimal so a write/read cycle is lossless, and documents are
written atomically (temp file + rename) with fixed key order so identical
runs produce byte-identical artifacts.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .datagen import GenConfig
from .errors import DatasetFormatError
from .family import BaseFunction, ModelSpec
from .optimize import FitConfig
from .search import SearchConfig

# ---------------------------------------------------------------------------
# CSV datasets


def write_csv_dataset(path, X, y) -> None:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    header = ",".join([f"x{i}" for i in range(X.shape[1])] + ["y"])
    lines = [header]
    for row, target in zip(X, y):
        lines.append(",".join(repr(float(v)) for v in row) + "," + repr(float(target)))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a dataset with header x0,...,x{n-1},y; '#' starts a comment line.

    Raises DatasetFormatError (with the 1-based line number) on ragged rows
    or non-numeric cells.
    """
    path = Path(path)
    rows: list[list[float]] = []
    n_cols = None
    header_seen = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if not header_seen:
                expected = [f"x{i}" for i in range(len(cells) - 1)] + ["y"]
                if cells != expected:
                    raise DatasetFormatError(
                        f"line {lineno}: bad header {cells!r}, expected {expected!r}",
                        row=lineno)
                n_cols = len(cells)
                header_seen = True
                continue
            if len(cells) != n_cols:
                raise DatasetFormatError(
                    f"line {lineno}: expected {n_cols} cells, got {len(cells)}", row=lineno)
            try:
                rows.append([float(c) for c in cells])
            except ValueError as err:
                raise DatasetFormatError(f"line {lineno}: {err}", row=lineno) from None
    if not header_seen:
        raise DatasetFormatError("no header row found")
    if not rows:
        raise DatasetFormatError("no data rows found")
    data = np.array(rows, dtype=float)
    return data[:, :-1], data[:, -1]


# ---------------------------------------------------------------------------
# flat key/value documents


def parse_kv_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetFormatError(f"line {lineno}: expected key=value", row=lineno)
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def read_kv_file(path) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_kv_file(path, items) -> None:
    """Write key/value pairs in the given order, atomically."""
    lines = [f"{key}={format_value(value)}" for key, value in items]
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# configuration

CONFIG_DEFAULTS = {
    "model.max_deg_input_num": "2",
    "model.max_deg_input_den": "2",
    "model.max_deg_output_num": "4",
    "model.max_deg_output_den": "3",
    "model.max_var_power": "3",
    "model.base_functions": "sqrt,cos,exp",
    "model.max_base_functions": "1",
    "search.success_r2": "0.999",
    "search.time_budget": "28800",
    "search.eval_budget": "1000000",
    "optim.lambda": "0.001",
    "optim.bh_iterations": "10",
    "optim.max_local_steps": "auto",
    "optim.step_size": "0.5",
    "optim.temperature": "1.0",
    "optim.backend": "basin_hopping",
    "optim.n_starts": "10",
    "optim.thresholds": "1e-05,0.0001,0.001,0.01",
}


def build_configs(overrides: dict[str, str] | None = None) -> tuple[SearchConfig, FitConfig]:
    """Merge overrides into the default configuration tables."""
    table = dict(CONFIG_DEFAULTS)
    for key, value in (overrides or {}).items():
        if key not in table:
            raise DatasetFormatError(f"unknown config key {key!r}")
        table[key] = value

    def flt(key):
        return float(table[key])

    def integer(key):
        return int(table[key])

    search = SearchConfig(
        max_deg_input_num=integer("model.max_deg_input_num"),
        max_deg_input_den=integer("model.max_deg_input_den"),
        max_deg_output_num=integer("model.max_deg_output_num"),
        max_deg_output_den=integer("model.max_deg_output_den"),
        max_var_power=integer("model.max_var_power"),
        base_function_pool=tuple(
            k for k in table["model.base_functions"].split(",") if k),
        max_base_functions=integer("model.max_base_functions"),
        success_r2=flt("search.success_r2"),
        time_budget=flt("search.time_budget"),
        eval_budget=integer("search.eval_budget"),
    )
    raw_steps = table["optim.max_local_steps"]
    fit = FitConfig(
        lam=flt("optim.lambda"),
        bh_iterations=integer("optim.bh_iterations"),
        max_local_steps=None if raw_steps == "auto" else int(raw_steps),
        step_size=flt("optim.step_size"),
        temperature=flt("optim.temperature"),
        backend=table["optim.backend"],
        n_starts=integer("optim.n_starts"),
        threshold_schedule=tuple(
            float(t) for t in table["optim.thresholds"].split(",") if t),
    )
    return search, fit


def load_configs(path=None) -> tuple[SearchConfig, FitConfig]:
    overrides = read_kv_file(path) if path else {}
    return build_configs(overrides)


GEN_DEFAULTS = {
    "gen.n_vars": "1",
    "gen.base_functions": "",
    "gen.deg_input_num": "0",
    "gen.deg_input_den": "0",
    "gen.deg_output_num": "3",
    "gen.deg_output_den": "0",
    "gen.max_var_power": "3",
    "gen.n_points": "200",
    "gen.domain_low": "1.0",
    "gen.domain_high": "5.0",
    "gen.min_nonzero": "1",
    "gen.max_nonzero": "3",
    "gen.coeff_std": "3.0",
    "gen.y_cap": "1000.0",
    "gen.max_resamples": "6",
}


def build_gen_config(overrides: dict[str, str] | None = None) -> GenConfig:
    table = dict(GEN_DEFAULTS)
    for key, value in (overrides or {}).items():
        if key not in table:
            raise DatasetFormatError(f"unknown generator config key {key!r}")
        table[key] = value
    kinds = [k for k in table["gen.base_functions"].split(",") if k]
    spec = ModelSpec(
        n_vars=int(table["gen.n_vars"]),
        base_functions=tuple(BaseFunction(k) for k in kinds),
        deg_input_num=int(table["gen.deg_input_num"]),
        deg_input_den=int(table["gen.deg_input_den"]),
        deg_output_num=int(table["gen.deg_output_num"]),
        deg_output_den=int(table["gen.deg_output_den"]),
        max_var_power=int(table["gen.max_var_power"]),
    )
    return GenConfig(
        spec=spec,
        n_points=int(table["gen.n_points"]),
        domain_low=float(table["gen.domain_low"]),
        domain_high=float(table["gen.domain_high"]),
        min_nonzero=int(table["gen.min_nonzero"]),
        max_nonzero=int(table["gen.max_nonzero"]),
        coeff_std=float(table["gen.coeff_std"]),
        y_cap=float(table["gen.y_cap"]),
        max_resamples=int(table["gen.max_resamples"]),
    )


# ---------------------------------------------------------------------------
# fit-result documents


def spec_items(spec: ModelSpec) -> list[tuple[str, str]]:
    return [
        ("spec.n_vars", str(spec.n_vars)),
        ("spec.base_functions", ",".join(bf.kind for bf in spec.base_functions)),
        ("spec.deg_input_num", str(spec.deg_input_num)),
        ("spec.deg_input_den", str(spec.deg_input_den)),
        ("spec.deg_output_num", str(spec.deg_output_num)),
        ("spec.deg_output_den", str(spec.deg_output_den)),
        ("spec.max_var_power", str(spec.max_var_power)),
    ]


def parse_spec_items(doc: dict[str, str]) -> ModelSpec:
    kinds = [k for k in doc["spec.base_functions"].split(",") if k]
    return ModelSpec(
        n_vars=int(doc["spec.n_vars"]),
        base_functions=tuple(BaseFunction(k) for k in kinds),
        deg_input_num=int(doc["spec.deg_input_num"]),
        deg_input_den=int(doc["spec.deg_input_den"]),
        deg_output_num=int(doc["spec.deg_output_num"]),
        deg_output_den=int(doc["spec.deg_output_den"]),
        max_var_power=int(doc["spec.max_var_power"]),
    )


def fit_result_items(result) -> list[tuple[str, object]]:
    """Serialized FitResult; volatile timing is deliberately excluded so
    identical (seed, config, data) runs produce byte-identical documents."""
    items: list[tuple[str, object]] = [
        ("expression", result.expression_text),
        ("r2.train", float(result.r2_train)),
        ("r2.val", float(result.r2_val)),
    ]
    if result.r2_test is not None:
        items.append(("r2.test", float(result.r2_test)))
    items.append(("n_nonzero", result.n_nonzero))
    items.extend(spec_items(result.spec))
    items.extend([
        ("spec.index", result.spec_index),
        ("seed", result.seed),
        ("eval_count", result.eval_count),
    ])
    return items
