"""Simulation study harness.

Generates the benchmark regression with time-varying coefficients (a slowly
drifting level, arcs that switch off over known windows, and a block of
coefficients that are identically zero), runs rolling-origin one-step
forecasts with a full refit at every origin, and scores fits against the
truth: per-coefficient MSE, pooled MSE over the zero block, forecast MSE,
predictive interval length and coverage.

Times are 1-based in all window arithmetic (the first observation is t = 1)
so the zero windows land where the construction says they do at any length:
coefficient 3 is off for T/4 <= t < 3T/4, coefficient 4 for t > T/2.
"""

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .gibbs import ChainConfig, ChainOutput, GibbsSampler, ModelConfig
from .samplers import make_rng

# Streams are partitioned so the data draw, the main fit, and the per-origin
# refits never share a generator even under a common seed.
DATA_STREAM = 10_000
FIT_STREAM_BASE = 20_000
ORIGIN_STREAM_BASE = 30_000

DEFAULT_START_TIME = 25


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process for the study.

    Coefficient paths, with t running 1..n_times and u = t / n_times:

      1: level_base + level_amp * sin(2 pi u)
      2: random walk from walk_start, innovation sd walk_sd, its own fixed
         seed so the truth does not move with the data seed
      3: arc3_amp * sine arcs outside the window T/4 <= t < 3T/4, exactly
         zero inside it, meeting zero continuously at both edges
      4: arc4_amp * sine arc for t <= T/2, exactly zero for t > T/2
      5..p: identically zero

    The design has a leading intercept column; the remaining columns are
    iid Uniform(0, 2) redrawn per data seed.
    """

    n_times: int = 200
    n_coef: int = 12
    noise_var: float = 1.5
    level_base: float = 2.0
    level_amp: float = 0.5
    walk_start: float = 1.0
    walk_sd: float = 0.02
    walk_seed: int = 60218
    arc3_amp: float = 1.5
    arc4_amp: float = 1.0

    def __post_init__(self):
        if self.n_times < 2:
            raise ConfigError("n_times must be at least 2")
        if self.n_coef < 1:
            raise ConfigError("n_coef must be at least 1")
        if not (self.noise_var >= 0.0 and math.isfinite(self.noise_var)):
            raise ConfigError("noise_var must be finite and nonnegative")
        if not (self.walk_sd >= 0.0 and math.isfinite(self.walk_sd)):
            raise ConfigError("walk_sd must be finite and nonnegative")

    def inactive_window(self, coef: int) -> np.ndarray:
        """Mask of times where the given coefficient (0-based) is structurally
        zero. Defined for coefficient 2 (the two-sided window), 3 (switched
        off at midsample), and the identically-zero block."""
        if not 0 <= coef < self.n_coef:
            raise ConfigError("coefficient index outside the design")
        t = np.arange(1, self.n_times + 1, dtype=np.float64)
        if coef == 2:
            return (t >= self.n_times / 4.0) & (t < 3.0 * self.n_times / 4.0)
        if coef == 3:
            return t > self.n_times / 2.0
        if coef >= 4:
            return np.ones(self.n_times, dtype=bool)
        raise ConfigError("coefficient is never switched off")

    def true_paths(self) -> np.ndarray:
        """Coefficient truth, shape (n_times, n_coef)."""
        t_len, p = self.n_times, self.n_coef
        t = np.arange(1, t_len + 1, dtype=np.float64)
        paths = np.zeros((t_len, p))
        paths[:, 0] = self.level_base + self.level_amp * np.sin(2.0 * np.pi * t / t_len)
        if p > 1:
            steps = np.random.default_rng(self.walk_seed).normal(0.0, self.walk_sd, t_len - 1)
            paths[1:, 1] = np.cumsum(steps)
            paths[:, 1] += self.walk_start
        if p > 2:
            quarter = t_len / 4.0
            early = t < quarter
            late = t >= 3.0 * quarter
            paths[early, 2] = self.arc3_amp * np.sin(np.pi * t[early] / quarter)
            paths[late, 2] = self.arc3_amp * np.sin(np.pi * (t[late] - 3.0 * quarter) / quarter)
        if p > 3:
            half = t_len / 2.0
            on = t <= half
            paths[on, 3] = self.arc4_amp * np.sin(np.pi * t[on] / half)
        return paths


@dataclass
class Dataset:
    y: np.ndarray        # (T,)
    design: np.ndarray   # (T, p)
    truth: np.ndarray    # (T, p)
    noise_var: float


def simulate_dataset(spec: DgpSpec, seed: int) -> Dataset:
    """Draw a design and observations around the spec's fixed truth."""
    rng = make_rng(seed, DATA_STREAM)
    truth = spec.true_paths()
    design = np.ones((spec.n_times, spec.n_coef))
    if spec.n_coef > 1:
        design[:, 1:] = rng.uniform(0.0, 2.0, size=(spec.n_times, spec.n_coef - 1))
    y = (design * truth).sum(axis=1)
    y = y + math.sqrt(spec.noise_var) * rng.standard_normal(spec.n_times)
    return Dataset(y=y, design=design, truth=truth, noise_var=spec.noise_var)


@dataclass
class ForecastTable:
    """Rolling one-step forecasts: origin s means the fit saw times 1..s and
    the row predicts time s+1."""

    origins: np.ndarray     # (n,) int
    mean: np.ndarray        # (n,)
    lower: np.ndarray       # (L, n) rows follow `levels`
    upper: np.ndarray       # (L, n)
    realized: np.ndarray    # (n,)
    levels: Tuple[float, ...] = (0.95,)

    def _level_row(self, level: float) -> int:
        for i, have in enumerate(self.levels):
            if math.isclose(have, level):
                return i
        raise ConfigError(f"no interval at level {level}; stored {self.levels}")

    def mse(self) -> float:
        return float(np.mean((self.mean - self.realized) ** 2))

    def mean_length(self, level: float = 0.95) -> float:
        i = self._level_row(level)
        return float(np.mean(self.upper[i] - self.lower[i]))

    def coverage(self, level: float = 0.95) -> float:
        i = self._level_row(level)
        inside = (self.realized >= self.lower[i]) & (self.realized <= self.upper[i])
        return float(np.mean(inside))


def _origin_prediction(task) -> np.ndarray:
    y, design, next_row, model, chain, seed, stream = task
    sampler = GibbsSampler(y, design, model, seed=seed, stream=stream)
    out = sampler.run(chain, predict_design=next_row)
    return out.predictions


def sequential_forecast(y: np.ndarray, design: np.ndarray, model: ModelConfig,
                        chain: ChainConfig = ChainConfig(),
                        start_time: int = DEFAULT_START_TIME, seed: int = 0,
                        stream_base: int = ORIGIN_STREAM_BASE,
                        levels: Sequence[float] = (0.95,),
                        threads: int = 1) -> ForecastTable:
    """Refit from scratch at every origin s = start_time..T-1 and draw one
    predictive observation per kept sweep; rows tabulate the draw mean and
    central intervals at the requested levels against the realized value."""
    y = np.asarray(y, dtype=np.float64)
    design = np.asarray(design, dtype=np.float64)
    t_len = y.shape[0]
    if design.shape[0] != t_len:
        raise ConfigError("design must have one row per observation")
    if not 2 <= start_time < t_len:
        raise ConfigError(f"start_time must lie in [2, {t_len - 1}] for {t_len} observations")
    levels = tuple(float(v) for v in levels)
    for level in levels:
        if not 0.0 < level < 1.0:
            raise ConfigError("interval levels must lie in (0, 1)")
    chain = dataclasses.replace(chain, store_states=False)

    origins = np.arange(start_time, t_len)
    tasks = [(y[:s], design[:s], design[s], model, chain, seed, stream_base + s)
             for s in origins]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            draws = list(pool.map(_origin_prediction, tasks))
    else:
        draws = [_origin_prediction(task) for task in tasks]

    n = origins.size
    mean = np.empty(n)
    lower = np.empty((len(levels), n))
    upper = np.empty((len(levels), n))
    for i, sample in enumerate(draws):
        mean[i] = sample.mean()
        for k, level in enumerate(levels):
            tail = 0.5 * (1.0 - level)
            lower[k, i], upper[k, i] = np.quantile(sample, [tail, 1.0 - tail])
    return ForecastTable(origins=origins, mean=mean, lower=lower, upper=upper,
                         realized=y[origins], levels=levels)


@dataclass
class EvalReport:
    """Scores for one fitted model on one dataset.

    Coefficient MSEs average over times t >= start_time; noise_mse pools the
    identically-zero block (coefficients 5..p). Forecast fields are nan when
    no forecast table was supplied. degenerate flags a posterior with zero
    spread in every cell, where coverage is meaningless.
    """

    start_time: int
    coef_mse: np.ndarray
    noise_mse: float
    forecast_mse: float
    ci_length: float
    coverage: float
    degenerate: bool


def evaluate_fit(chain: ChainOutput, truth: np.ndarray,
                 start_time: int = DEFAULT_START_TIME,
                 forecasts: Optional[ForecastTable] = None) -> EvalReport:
    if chain.states is None:
        raise ConfigError("evaluation needs stored coefficient draws")
    truth = np.asarray(truth, dtype=np.float64)
    if chain.states.shape[1:] != truth.shape:
        raise ConfigError("truth shape does not match stored draws")
    t_len, p = truth.shape
    if not 1 <= start_time <= t_len:
        raise ConfigError("start_time outside the sample")
    window = slice(start_time - 1, None)
    post_mean = chain.states.mean(axis=0)
    err = post_mean[window] - truth[window]
    coef_mse = (err ** 2).mean(axis=0)
    noise_mse = float(coef_mse[4:].mean()) if p > 4 else float("nan")
    degenerate = bool(np.all(np.ptp(chain.states, axis=0) == 0.0))
    if forecasts is None:
        forecast_mse = ci_length = coverage = float("nan")
    else:
        forecast_mse = forecasts.mse()
        ci_length = forecasts.mean_length()
        coverage = forecasts.coverage()
    return EvalReport(start_time=start_time, coef_mse=coef_mse, noise_mse=noise_mse,
                      forecast_mse=forecast_mse, ci_length=ci_length,
                      coverage=coverage, degenerate=degenerate)


def activation_profile(chain: ChainOutput) -> np.ndarray:
    """Posterior probability that each coefficient step carries at least one
    latent activation, shape (T, p); rows where the process cannot activate
    (the endpoints) report the stored zeros."""
    if chain.counts is None:
        raise ConfigError("chain stored no activation counts")
    return (chain.counts > 0).mean(axis=0)


def expected_counts(chain: ChainOutput) -> np.ndarray:
    if chain.counts is None:
        raise ConfigError("chain stored no activation counts")
    return chain.counts.mean(axis=0)


def comparison_table(reports: Dict[str, EvalReport]) -> Tuple[list, list]:
    """Rows for the model-comparison table: one row per model, columns are
    the per-coefficient MSEs for coefficients 1..4, the pooled zero-block
    MSE, then forecast MSE, mean interval length, and coverage."""
    if not reports:
        raise ConfigError("no reports to compare")
    sizes = {rep.coef_mse.shape[0] for rep in reports.values()}
    if len(sizes) > 1:
        raise ConfigError("reports disagree on the number of coefficients")
    p = sizes.pop()
    named = min(p, 4)
    header = ["model"]
    header += [f"mse_coef{j + 1}" for j in range(named)]
    if p > 4:
        header.append(f"mse_coef5_{p}")
    header += ["mse_forecast", "ci_length", "coverage"]
    rows = []
    for label, rep in reports.items():
        row = [label] + [float(rep.coef_mse[j]) for j in range(named)]
        if p > 4:
            row.append(rep.noise_mse)
        row += [rep.forecast_mse, rep.ci_length, rep.coverage]
        rows.append(row)
    return header, rows


@dataclass
class StudyResult:
    label: str
    seed: int
    report: EvalReport
    forecasts: ForecastTable
    activation: Optional[np.ndarray]   # (T, p) or None for variants without counts


def run_study(dgp: DgpSpec, models: Dict[str, ModelConfig], seed: int,
              fit_chain: ChainConfig = ChainConfig(n_sweeps=3300, n_burn=300, thin=1),
              origin_chain: ChainConfig = ChainConfig(n_sweeps=1200, n_burn=200, thin=1),
              start_time: int = DEFAULT_START_TIME,
              threads: int = 1) -> Dict[str, StudyResult]:
    """One dataset, several models: a long stored fit on the full sample for
    coefficient scores and activation profiles, plus the rolling forecast."""
    data = simulate_dataset(dgp, seed)
    results = {}
    for i, (label, model) in enumerate(models.items()):
        sampler = GibbsSampler(data.y, data.design, model,
                               seed=seed, stream=FIT_STREAM_BASE + i)
        fit = sampler.run(fit_chain)
        forecasts = sequential_forecast(
            data.y, data.design, model, origin_chain, start_time=start_time,
            seed=seed, stream_base=ORIGIN_STREAM_BASE * (i + 1), threads=threads)
        report = evaluate_fit(fit, data.truth, start_time, forecasts)
        activation = activation_profile(fit) if fit.counts is not None else None
        results[label] = StudyResult(label=label, seed=seed, report=report,
                                     forecasts=forecasts, activation=activation)
    return results
