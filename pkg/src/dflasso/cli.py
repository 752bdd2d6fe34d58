"""Command line front end.

One JSON configuration file drives every subcommand; sections the command
does not use are rejected, as are unknown keys inside a section, so a typo
cannot silently fall back to a default. Output files are CSV (comma
separated, '.' decimal point, LF line ends, UTF-8) with floats printed to 17
significant digits so values round-trip exactly.

Subcommands
  simulate  draw the benchmark dataset          -> y.csv F.csv truth.csv
  fit       one Gibbs chain on given data       -> draws_*.csv summary.csv
  forecast  rolling one-step refit forecasts    -> forecast.csv
  evaluate  fit, forecast, score against truth  -> evaluation.csv
  compare   several models on the same data     -> comparison.csv
  density   tabulate the prior's closed forms   -> curves.csv weight.csv

Exit status: 0 on success, 2 for configuration problems, 3 for numerical
failure inside a sampler.
"""

import argparse
import dataclasses
import gzip
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalError
from .gibbs import ChainConfig, GibbsSampler, ModelConfig
from .harness import (
    DgpSpec,
    activation_profile,
    comparison_table,
    evaluate_fit,
    expected_counts,
    sequential_forecast,
    simulate_dataset,
)
from .prior import (
    Weights,
    conditional_shrinkage_mean,
    shrinkage_weight_density,
    stationary_density,
    transition_density,
)

SECTIONS = {
    "simulate": {"dgp"},
    "fit": {"data", "model", "chain", "output"},
    "forecast": {"data", "model", "chain", "forecast"},
    "evaluate": {"data", "model", "chain", "origin_chain", "forecast"},
    "compare": {"data", "models", "chain", "origin_chain", "forecast"},
    "density": {"weights", "grid"},
}

DATA_KEYS = {"y", "design", "truth"}
FORECAST_KEYS = {"start_time", "levels"}
OUTPUT_KEYS = {"gzip"}
WEIGHT_KEYS = {"rate", "ratio"}
GRID_KEYS = {"x_lo", "x_hi", "x_count", "x_prev", "weight_count"}


# -- config plumbing ---------------------------------------------------------

def _reject_unknown(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _build(cls, section: dict, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"section {where} must be an object")
    _reject_unknown(section, [f.name for f in dataclasses.fields(cls)], where)
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"bad {where} section: {exc}") from exc


def load_config(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _section(cfg: dict, name: str, default=None):
    value = cfg.get(name, default if default is not None else {})
    if not isinstance(value, dict):
        raise ConfigError(f"section {name} must be an object")
    return value


def _data_paths(cfg: dict, base: Path, need_truth: bool = False) -> dict:
    data = cfg.get("data")
    if data is None:
        raise ConfigError("a data section with file paths is required")
    _reject_unknown(data, DATA_KEYS, "data")
    need = {"y", "design"} | ({"truth"} if need_truth else set())
    missing = sorted(need - set(data))
    if missing:
        raise ConfigError(f"data section lacks: {', '.join(missing)}")
    return {key: base / str(val) if not Path(str(val)).is_absolute() else Path(str(val))
            for key, val in data.items()}


def _forecast_options(cfg: dict) -> tuple:
    section = _section(cfg, "forecast")
    _reject_unknown(section, FORECAST_KEYS, "forecast")
    start_time = section.get("start_time", 25)
    levels = section.get("levels", [0.95])
    if not isinstance(levels, (list, tuple)) or not levels:
        raise ConfigError("forecast levels must be a nonempty list")
    return int(start_time), tuple(float(v) for v in levels)


# -- csv helpers -------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: Path, header, rows, compress: bool = False) -> Path:
    if compress:
        path = path.with_name(path.name + ".gz")
        fh = gzip.open(path, "wt", encoding="utf-8", newline="")
    else:
        fh = open(path, "w", encoding="utf-8", newline="")
    with fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _read_matrix(path: Path, what: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise ConfigError(f"cannot read {what} from {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{what} file {path} is not numeric CSV: {exc}") from exc


def read_observations(path: Path) -> np.ndarray:
    mat = _read_matrix(path, "observations")
    if mat.shape[1] != 1:
        raise ConfigError(f"observations file {path} must have one column")
    return mat[:, 0]


def read_design(path: Path) -> np.ndarray:
    return _read_matrix(path, "design")


def read_trajectories(path: Path) -> np.ndarray:
    """Long-format (time, series, value) back to a (T, p) array."""
    mat = _read_matrix(path, "trajectories")
    if mat.shape[1] != 3:
        raise ConfigError(f"trajectory file {path} must have time,series,value columns")
    times = mat[:, 0].astype(np.int64)
    series = mat[:, 1].astype(np.int64)
    if times.min() < 1 or series.min() < 1:
        raise ConfigError("trajectory indices are 1-based")
    out = np.full((times.max(), series.max()), np.nan)
    out[times - 1, series - 1] = mat[:, 2]
    if np.isnan(out).any():
        raise ConfigError(f"trajectory file {path} does not cover the full grid")
    return out


# -- subcommands -------------------------------------------------------------

def cmd_simulate(cfg: dict, args) -> None:
    spec = _build(DgpSpec, _section(cfg, "dgp"), "dgp")
    data = simulate_dataset(spec, args.seed)
    write_csv(args.out / "y.csv", ["value"], ([v] for v in data.y))
    write_csv(args.out / "F.csv",
              [f"coef{j + 1}" for j in range(spec.n_coef)], data.design)
    rows = ([t + 1, j + 1, data.truth[t, j]]
            for t in range(spec.n_times) for j in range(spec.n_coef))
    write_csv(args.out / "truth.csv", ["time", "series", "value"], rows)


def _run_fit(cfg: dict, args, base: Path):
    paths = _data_paths(cfg, base)
    y = read_observations(paths["y"])
    design = read_design(paths["design"])
    model = _build(ModelConfig, _section(cfg, "model"), "model")
    chain = _build(ChainConfig, _section(cfg, "chain"), "chain")
    sampler = GibbsSampler(y, design, model, seed=args.seed)
    return sampler.run(chain), model, y, design, chain


def cmd_fit(cfg: dict, args) -> None:
    out, model, _, _, chain = _run_fit(cfg, args, args.config.parent)
    output = _section(cfg, "output")
    _reject_unknown(output, OUTPUT_KEYS, "output")
    compress = bool(output.get("gzip", False))
    if out.states is None:
        raise ConfigError("the posterior summary needs store_states")

    draws = {"rate": out.rate, "noise_var": out.noise_var}
    if model.shrinks_marginally:
        draws["ratio"] = out.ratio
        draws["count_total"] = out.count_total
    else:
        draws["init_rate"] = out.init_rate
    if model.pools_rate:
        draws["shrink_level"] = out.shrink_level
    for name, series in draws.items():
        write_csv(args.out / f"draws_{name}.csv", ["draw", "value"],
                  ([i, v] for i, v in enumerate(series)), compress)
    if model.baseline == "estimated":
        p = out.baseline.shape[1]
        write_csv(args.out / "draws_baseline.csv",
                  ["draw"] + [f"coef{j + 1}" for j in range(p)],
                  ([i] + list(row) for i, row in enumerate(out.baseline)), compress)
    n_keep, t_len, p = out.states.shape
    rows = ([i, t + 1, j + 1, out.states[i, t, j]]
            for i in range(n_keep) for t in range(t_len) for j in range(p))
    write_csv(args.out / "draws_states.csv", ["draw", "time", "series", "value"],
              rows, compress)

    mean = out.states.mean(axis=0)
    lo, hi = np.quantile(out.states, [0.025, 0.975], axis=0)
    header = ["time", "series", "mean", "lo95", "hi95"]
    if out.counts is not None:
        header += ["prob_active", "mean_count"]
        prob, count = activation_profile(out), expected_counts(out)
    rows = []
    for t in range(t_len):
        for j in range(p):
            row = [t + 1, j + 1, mean[t, j], lo[t, j], hi[t, j]]
            if out.counts is not None:
                row += [prob[t, j], count[t, j]]
            rows.append(row)
    write_csv(args.out / "summary.csv", header, rows)


def _forecast_columns(levels) -> list:
    cols = []
    for level in levels:
        pct = format(100.0 * level, "g").replace(".", "_")
        cols += [f"lo{pct}", f"hi{pct}"]
    return cols


def cmd_forecast(cfg: dict, args) -> None:
    base = args.config.parent
    paths = _data_paths(cfg, base)
    y = read_observations(paths["y"])
    design = read_design(paths["design"])
    model = _build(ModelConfig, _section(cfg, "model"), "model")
    chain = _build(ChainConfig, _section(cfg, "chain"), "chain")
    start_time, levels = _forecast_options(cfg)
    table = sequential_forecast(y, design, model, chain, start_time=start_time,
                                seed=args.seed, levels=levels,
                                threads=args.threads)
    header = ["s", "mean"] + _forecast_columns(levels) + ["realized"]
    rows = []
    for i, s in enumerate(table.origins):
        row = [s, table.mean[i]]
        for k in range(len(levels)):
            row += [table.lower[k, i], table.upper[k, i]]
        row.append(table.realized[i])
        rows.append(row)
    write_csv(args.out / "forecast.csv", header, rows)


def _evaluate_one(y, design, truth, model, chain, origin_chain, start_time,
                  levels, seed, threads):
    sampler = GibbsSampler(y, design, model, seed=seed)
    fit = sampler.run(chain)
    table = sequential_forecast(y, design, model, origin_chain,
                                start_time=start_time, seed=seed,
                                levels=levels, threads=threads)
    return evaluate_fit(fit, truth, start_time, table)


def cmd_evaluate(cfg: dict, args) -> None:
    base = args.config.parent
    paths = _data_paths(cfg, base, need_truth=True)
    y = read_observations(paths["y"])
    design = read_design(paths["design"])
    truth = read_trajectories(paths["truth"])
    model = _build(ModelConfig, _section(cfg, "model"), "model")
    chain = _build(ChainConfig, _section(cfg, "chain"), "chain")
    origin_chain = (_build(ChainConfig, cfg["origin_chain"], "origin_chain")
                    if "origin_chain" in cfg else chain)
    start_time, levels = _forecast_options(cfg)
    report = _evaluate_one(y, design, truth, model, chain, origin_chain,
                           start_time, levels, args.seed, args.threads)
    rows = [[f"mse_coef{j + 1}", v] for j, v in enumerate(report.coef_mse)]
    rows += [["mse_noise_block", report.noise_mse],
             ["mse_forecast", report.forecast_mse],
             ["ci_length", report.ci_length],
             ["coverage", report.coverage],
             ["degenerate", report.degenerate]]
    write_csv(args.out / "evaluation.csv", ["metric", "value"], rows)


def cmd_compare(cfg: dict, args) -> None:
    base = args.config.parent
    paths = _data_paths(cfg, base, need_truth=True)
    y = read_observations(paths["y"])
    design = read_design(paths["design"])
    truth = read_trajectories(paths["truth"])
    models = cfg.get("models")
    if not isinstance(models, dict) or not models:
        raise ConfigError("compare needs a models section mapping labels to model configs")
    chain = _build(ChainConfig, _section(cfg, "chain"), "chain")
    origin_chain = (_build(ChainConfig, cfg["origin_chain"], "origin_chain")
                    if "origin_chain" in cfg else chain)
    start_time, levels = _forecast_options(cfg)
    reports = {}
    for label, section in models.items():
        model = _build(ModelConfig, section, f"models.{label}")
        reports[label] = _evaluate_one(y, design, truth, model, chain,
                                       origin_chain, start_time, levels,
                                       args.seed, args.threads)
    header, rows = comparison_table(reports)
    write_csv(args.out / "comparison.csv", header, rows)


def cmd_density(cfg: dict, args) -> None:
    weights = cfg.get("weights")
    if not isinstance(weights, dict):
        raise ConfigError("density needs a weights section with rate and ratio")
    _reject_unknown(weights, WEIGHT_KEYS, "weights")
    try:
        pair = Weights(beta=float(weights.get("rate", 1.0)),
                       rho=float(weights.get("ratio", 0.5)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if pair.rho == 0.0:
        raise ConfigError("density curves need a positive ratio")
    grid = _section(cfg, "grid")
    _reject_unknown(grid, GRID_KEYS, "grid")
    x_lo = float(grid.get("x_lo", -10.0))
    x_hi = float(grid.get("x_hi", 10.0))
    x_count = int(grid.get("x_count", 401))
    x_prev = float(grid.get("x_prev", 1.0))
    w_count = int(grid.get("weight_count", 201))
    if not (x_lo < x_hi) or x_count < 2 or w_count < 2:
        raise ConfigError("grid must have x_lo < x_hi and at least two points")
    if x_prev == 0.0:
        raise ConfigError("x_prev must be nonzero")

    xs = np.linspace(x_lo, x_hi, x_count)
    rows = []
    for x in xs:
        mean = conditional_shrinkage_mean(x, pair) if x != 0.0 else math.nan
        rows.append([x, transition_density(x, x_prev, pair),
                     stationary_density(x, pair), mean])
    write_csv(args.out / "curves.csv",
              ["x", "transition", "stationary", "shrink_mean"], rows)

    ws = np.linspace(0.0, 1.0, w_count)
    write_csv(args.out / "weight.csv", ["weight", "density"],
              ([w, shrinkage_weight_density(w, x_prev, pair)] for w in ws))


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "density": cmd_density,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dflasso",
        description="Dynamic fused lasso models: simulate, fit, forecast, compare.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, required=True,
                        help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=0, help="rng seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for the rolling forecast")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if args.threads < 1:
            raise ConfigError("threads must be at least 1")
        cfg = load_config(args.config)
        _reject_unknown(cfg, SECTIONS[args.command], "the config")
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
