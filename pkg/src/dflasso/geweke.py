"""Getting-it-right calibration checks for the Gibbs sweep.

Two simulators target the same joint law of (parameters, data):

  marginal-conditional   parameters from the prior, data from the likelihood;
                         every draw independent
  successive-conditional starting from one such draw, alternate a full Gibbs
                         sweep on the current data with regenerating the data
                         from the current parameters

If every conditional in the sweep is correct, both produce the same joint
distribution, so the means of any functional must agree up to Monte Carlo
error.  Heavy-tailed quantities enter through bounded transforms so that the
comparison has finite variance under every variant, including the
global-shrinkage ones whose rate prior puts real mass near zero.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .gibbs import GibbsSampler, GibbsState, ModelConfig
from .prior import Weights
from .samplers import (
    gig_half_vector,
    make_rng,
    sample_geometric,
    sample_grid,
    sample_prior_transition,
    sample_stationary,
)

__all__ = ["GewekeReport", "GewekeRunner", "default_check_model", "run_geweke"]


def default_check_model(variant: str) -> ModelConfig:
    """Hyperpriors for calibration runs.

    Chosen for finite low-order moments and informative comparisons: the
    study defaults (unit prior df on the noise, very diffuse rate prior)
    are legitimate models but make moment-based checks powerless.
    """
    return ModelConfig(
        variant=variant,
        baseline="estimated",
        baseline_sd=2.0,
        noise_df=6.0,
        noise_scale=1.5,
        rate_shape=2.0,
        rate_rate=1.0,
        init_rate_shape=2.0,
        init_rate_rate=1.0,
    )


@dataclass
class GewekeReport:
    variant: str
    names: list
    marginal_mean: np.ndarray
    marginal_se: np.ndarray
    successive_mean: np.ndarray
    successive_se: np.ndarray
    z_scores: np.ndarray
    n_marginal: int
    n_successive: int
    seconds: float

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    def lines(self) -> list:
        out = [
            f"variant {self.variant}: {self.n_marginal} independent draws vs "
            f"{self.n_successive} sweeps, max |z| = {self.max_abs_z:.2f} "
            f"({self.seconds:.0f}s)"
        ]
        for i, name in enumerate(self.names):
            out.append(
                f"  {name:<12} z = {self.z_scores[i]:+6.2f}   "
                f"independent {self.marginal_mean[i]:+.5f} ({self.marginal_se[i]:.5f})   "
                f"sweep {self.successive_mean[i]:+.5f} ({self.successive_se[i]:.5f})"
            )
        return out


def _batch_se(series: np.ndarray, n_batch: int = 50) -> float:
    m = series.size // n_batch
    means = series[: m * n_batch].reshape(n_batch, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batch))


class GewekeRunner:
    """Runs both simulators for one variant on a shared fixed design."""

    def __init__(self, model: ModelConfig, n_times: int = 10, n_coef: int = 2,
                 seed: int = 0):
        if n_times < 3:
            raise ConfigError("calibration runs need at least three time points")
        self.model = model
        self.rng = make_rng(seed, stream=900)
        design = np.column_stack(
            [np.ones(n_times), self.rng.uniform(0.0, 2.0, size=(n_times, n_coef - 1))]
        ) if n_coef > 1 else np.ones((n_times, 1))
        self.sampler = GibbsSampler(np.zeros(n_times), design, model,
                                    rng=make_rng(seed, stream=901))
        self._level_prior = self._level_log_prior()

    def _level_log_prior(self) -> np.ndarray:
        n = self.model.level_grid_count + 1
        m = np.arange(1, n)
        return -0.5 * (np.log(m) + np.log(n - m))

    # -- the prior-side simulator ------------------------------------------

    def _draw_hypers(self):
        m = self.model
        rng = self.rng
        level = 0.5
        if m.pools_rate:
            level = float(
                m.level_grid_step * (1 + sample_grid(self._level_prior, rng))
            )
            rate = math.sqrt(rng.gamma(0.5, 2.0 / level))
        else:
            rate = rng.gamma(m.rate_shape, 1.0 / m.rate_rate)
        ratio = 0.0
        if m.shrinks_marginally:
            ratio = float(
                m.ratio_grid_step
                * (1 + rng.integers(m.ratio_grid_count))
            )
        init_rate = rng.gamma(m.init_rate_shape, 1.0 / m.init_rate_rate)
        return rate, ratio, init_rate, level

    def marginal_draw(self):
        """One independent draw of (state, data) from the joint law."""
        m = self.model
        rng = self.rng
        t_len, p = self.sampler.design.shape
        rate, ratio, init_rate, level = self._draw_hypers()
        noise_var = 1.0 / rng.gamma(0.5 * m.noise_df, 2.0 / (m.noise_df * m.noise_scale))
        baseline = np.zeros(p)
        if m.baseline == "estimated":
            baseline = rng.normal(0.0, m.baseline_sd * math.sqrt(noise_var), size=p)

        x = np.empty((t_len, p))
        if m.shrinks_marginally:
            w = Weights(beta=rate, rho=ratio)
            for j in range(p):
                x[0, j] = sample_stationary(w, rng)
                for t in range(1, t_len):
                    x[t, j] = sample_prior_transition(x[t - 1, j], w, rng)
        else:
            x[0] = rng.laplace(0.0, 1.0 / init_rate, size=p)
            steps = rng.laplace(0.0, 1.0 / rate, size=(t_len - 1, p))
            x[1:] = x[0] + np.cumsum(steps, axis=0)

        counts = np.zeros((t_len, p), dtype=np.int64)
        if m.shrinks_marginally:
            q = ratio * np.exp(-rate * (1.0 - ratio) * np.abs(x[1:-1]))
            counts[1:-1] = sample_geometric(q, rng)

        state = GibbsState(
            theta=baseline[None, :] + math.sqrt(noise_var) * x,
            noise_var=noise_var,
            baseline=baseline,
            rate=rate,
            ratio=ratio,
            init_rate=init_rate,
            shrink_level=level,
            counts=counts,
            evol_scales=np.ones((t_len, p)),
            syn_scales=np.ones((t_len, p)),
            syn_active=self.sampler._active_pattern(counts),
        )
        step = np.diff(x, axis=0)
        state.evol_scales[1:] = gig_half_vector(
            np.full(step.shape, rate**2), step**2, rng
        )
        rates = self.sampler._syn_rates(state)
        act = state.syn_active
        state.syn_scales[act] = gig_half_vector(rates[act] ** 2, x[act] ** 2, rng)
        y = self.simulate_data(state)
        return state, y

    def simulate_data(self, state: GibbsState) -> np.ndarray:
        mean = np.sum(self.sampler.design * state.theta, axis=1)
        return self.rng.normal(mean, math.sqrt(state.noise_var))

    # -- the functional panel ----------------------------------------------

    @property
    def names(self) -> list:
        m = self.model
        out = ["rate_b", "noise_b", "abs_x_b", "sq_x_b", "step_b",
               "first_x_b", "y_sq_b", "y_mean_b"]
        if m.shrinks_marginally:
            out += ["ratio", "count_mean"]
        if m.pools_rate:
            out += ["level"]
        if not m.shrinks_marginally:
            out += ["init_b"]
        if m.baseline == "estimated":
            out += ["base_mean"]
        return out

    def functionals(self, state: GibbsState, y: np.ndarray) -> np.ndarray:
        m = self.model
        x = state.scaled_states()
        m_abs = float(np.mean(np.abs(x)))
        m_sq = float(np.mean(x * x))
        m_step = float(np.mean(np.abs(np.diff(x, axis=0))))
        m_first = float(np.mean(x[0] ** 2))
        y_sq = float(np.mean(y * y))
        vals = [
            state.rate / (1.0 + state.rate),
            state.noise_var / (1.0 + state.noise_var),
            m_abs / (1.0 + m_abs),
            m_sq / (1.0 + m_sq),
            m_step / (1.0 + m_step),
            m_first / (1.0 + m_first),
            y_sq / (1.0 + y_sq),
            math.tanh(float(np.mean(y)) / 5.0),
        ]
        if m.shrinks_marginally:
            interior = max(1, (x.shape[0] - 2) * x.shape[1])
            vals += [state.ratio, float(state.counts.sum()) / interior]
        if m.pools_rate:
            vals += [state.shrink_level]
        if not m.shrinks_marginally:
            vals += [state.init_rate / (1.0 + state.init_rate)]
        if m.baseline == "estimated":
            vals += [float(np.mean(state.baseline))]
        return np.asarray(vals)

    # -- the two runs ------------------------------------------------------

    def run_marginal(self, n_draws: int) -> np.ndarray:
        out = np.empty((n_draws, len(self.names)))
        for i in range(n_draws):
            state, y = self.marginal_draw()
            out[i] = self.functionals(state, y)
        return out

    def run_successive(self, n_sweeps: int, burn: int = 1000) -> np.ndarray:
        state, y = self.marginal_draw()
        out = np.empty((n_sweeps, len(self.names)))
        sampler = self.sampler
        for i in range(burn + n_sweeps):
            sampler.y = y
            sampler.sweep(state)
            y = self.simulate_data(state)
            if i >= burn:
                out[i - burn] = self.functionals(state, y)
        return out


def zscores(marginal: np.ndarray, successive: np.ndarray) -> tuple:
    """Per-functional z statistics: iid errors on the independent side,
    batch means on the sweep side."""
    m_mean = marginal.mean(axis=0)
    m_se = marginal.std(axis=0, ddof=1) / math.sqrt(marginal.shape[0])
    s_mean = successive.mean(axis=0)
    s_se = np.array([_batch_se(successive[:, k]) for k in range(successive.shape[1])])
    z = (m_mean - s_mean) / np.sqrt(m_se**2 + s_se**2)
    return z, m_mean, m_se, s_mean, s_se


def run_geweke(variant: str, n_marginal: int = 200_000, n_successive: int = 200_000,
               burn: int = 1000, n_times: int = 10, n_coef: int = 2,
               seed: int = 0, model: Optional[ModelConfig] = None) -> GewekeReport:
    started = time.time()
    model = default_check_model(variant) if model is None else model
    runner = GewekeRunner(model, n_times=n_times, n_coef=n_coef, seed=seed)
    marginal = runner.run_marginal(n_marginal)
    successive = runner.run_successive(n_successive, burn=burn)
    z, m_mean, m_se, s_mean, s_se = zscores(marginal, successive)
    return GewekeReport(
        variant=variant,
        names=runner.names,
        marginal_mean=m_mean,
        marginal_se=m_se,
        successive_mean=s_mean,
        successive_se=s_se,
        z_scores=z,
        n_marginal=n_marginal,
        n_successive=n_successive,
        seconds=time.time() - started,
    )
