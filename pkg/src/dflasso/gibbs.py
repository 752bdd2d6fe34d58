"""Gibbs sampler for dynamic regression under fused shrinkage priors.

The observation model is y_t = F_t' theta_t + noise, noise ~ N(0, V).  Each
coefficient path, standardized as x_t = (theta_t - baseline) / sqrt(V),
carries one of four priors:

  dfl   stationary dynamic fused lasso process with rates (ratio*rate, rate)
  de    double-exponential random walk: x_1 ~ DE(init_rate), steps ~ DE(rate)
  dfhs  dfl with the fusion rate tied to a global shrinkage level through
        rate^2 | level ~ Ga(1/2, level/2)
  hs    de with the same global-shrinkage construction on the step rate

All variants share the conditionally Gaussian representation of
:mod:`dflasso.cdlm`: exponential scale mixtures turn every Laplace factor into
a Gaussian kernel, marginal shrinkage terms become synthetic observations,
and the interior marginal terms of the dfl/dfhs prior appear and disappear
with geometric activation counts.

Sweep order: states and the noise variance jointly, then activation counts
(latent scales of the count terms integrated out), then the rate parameters
(all scales integrated out), then every scale redrawn, then the baseline.
The count and rate steps are collapsed, so the scales must be refreshed
before any other step consumes them; this ordering keeps each collapsed pair
a proper block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cdlm import CdlmSpec, backward_sample, forward_filter, sample_scale
from .errors import ConfigError
from .prior import Weights
from .samplers import (
    gig_half_vector,
    make_rng,
    sample_extended_gamma,
    sample_geometric,
    sample_grid,
    sample_prior_transition,
)

__all__ = [
    "VARIANTS",
    "ModelConfig",
    "ChainConfig",
    "GibbsState",
    "ChainOutput",
    "GibbsSampler",
]

VARIANTS = ("dfl", "de", "dfhs", "hs")


@dataclass(frozen=True)
class ModelConfig:
    """Model variant, priors, and fixed-parameter overrides.

    Rates follow the standardized coefficient scale; the baseline prior is
    N(0, baseline_sd^2 * V) so the whole parameter block scales with the
    noise.  Setting any ``fixed_*`` field pins that parameter and skips its
    update, which the conditional-level tests rely on.
    """

    variant: str = "dfl"
    baseline: str = "estimated"       # "estimated" or "zero"
    baseline_sd: float = 10.0
    noise_df: float = 1.0             # prior df of the observation variance
    noise_scale: float = 1.0          # prior scale of the observation variance
    rate_shape: float = 1.0           # Ga(shape, rate) prior on the fusion rate
    rate_rate: float = 0.1
    init_rate_shape: float = 1.0      # Ga prior on the de/hs initial-state rate
    init_rate_rate: float = 0.1
    fixed_noise: Optional[float] = None
    fixed_rate: Optional[float] = None
    fixed_ratio: Optional[float] = None
    fixed_init_rate: Optional[float] = None
    fixed_shrink_level: Optional[float] = None
    ratio_grid_step: float = 1e-3
    ratio_grid_count: int = 900
    level_grid_step: float = 1e-3
    level_grid_count: int = 999
    diffuse_init_var: float = 1e10

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.baseline not in ("estimated", "zero"):
            raise ConfigError(f"baseline must be 'estimated' or 'zero', got {self.baseline!r}")
        for name in ("baseline_sd", "noise_df", "noise_scale", "rate_shape", "rate_rate",
                     "init_rate_shape", "init_rate_rate", "ratio_grid_step",
                     "level_grid_step", "diffuse_init_var"):
            if not (getattr(self, name) > 0.0 and math.isfinite(getattr(self, name))):
                raise ConfigError(f"{name} must be positive and finite")
        for name in ("fixed_noise", "fixed_rate", "fixed_init_rate", "fixed_shrink_level"):
            val = getattr(self, name)
            if val is not None and not (val > 0.0 and math.isfinite(val)):
                raise ConfigError(f"{name} must be positive when given")
        if self.ratio_grid_count < 1 or self.level_grid_count < 1:
            raise ConfigError("grids need at least one point")
        if self.ratio_grid_count * self.ratio_grid_step >= 1.0:
            raise ConfigError("ratio grid must stay below 1")
        if self.fixed_ratio is not None:
            if self.shrinks_marginally and not (0.0 < self.fixed_ratio < 1.0):
                raise ConfigError("fixed_ratio must lie in (0, 1) for dfl/dfhs")
            if not self.shrinks_marginally and self.fixed_ratio != 0.0:
                raise ConfigError("de/hs have no shrinkage ratio; only 0.0 is allowed")

    @property
    def shrinks_marginally(self) -> bool:
        """dfl/dfhs pull every state toward the baseline; de/hs only the first."""
        return self.variant in ("dfl", "dfhs")

    @property
    def pools_rate(self) -> bool:
        """dfhs/hs tie the rate to the global shrinkage level."""
        return self.variant in ("dfhs", "hs")


@dataclass(frozen=True)
class ChainConfig:
    n_sweeps: int = 2000
    n_burn: int = 500
    thin: int = 5
    store_states: bool = True

    def __post_init__(self):
        if self.n_sweeps <= 0 or self.n_burn < 0 or self.thin <= 0:
            raise ConfigError("chain controls must be positive (n_burn may be zero)")
        if self.n_burn >= self.n_sweeps:
            raise ConfigError("empty chain: burn-in consumes every sweep")

    @property
    def kept_indices(self) -> np.ndarray:
        return np.arange(self.n_burn, self.n_sweeps, self.thin)


@dataclass
class GibbsState:
    """Everything one sweep conditions on; mutated in place by the steps."""

    theta: np.ndarray        # (T, p) coefficient paths
    noise_var: float
    baseline: np.ndarray     # (p,)
    rate: float              # fusion / step rate
    ratio: float             # shrinkage-to-fusion ratio; 0 for de/hs
    init_rate: float         # de/hs initial-state rate
    shrink_level: float      # dfhs/hs global level
    counts: np.ndarray       # (T, p) activation counts; interior rows only
    evol_scales: np.ndarray  # (T, p) step-kernel scales; rows 1..T-1
    syn_scales: np.ndarray   # (T, p) synthetic-row scales where active
    syn_active: np.ndarray   # (T, p) bool

    def scaled_states(self) -> np.ndarray:
        return (self.theta - self.baseline[None, :]) / math.sqrt(self.noise_var)


@dataclass
class ChainOutput:
    """Kept draws; states and activation counts are (kept, T, p) when stored."""

    rate: np.ndarray
    ratio: np.ndarray
    noise_var: np.ndarray
    init_rate: np.ndarray
    shrink_level: np.ndarray
    baseline: np.ndarray
    count_total: np.ndarray
    states: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    predictions: Optional[np.ndarray] = None


class GibbsSampler:
    """Runs the sweep on one dataset.

    ``y`` may be reassigned between sweeps (the calibration checker replays
    the sampler on freshly simulated data); everything else is fixed at
    construction.
    """

    def __init__(self, y, design, model: ModelConfig = ModelConfig(),
                 seed: int = 0, stream: int = 0,
                 rng: Optional[np.random.Generator] = None):
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.design = np.ascontiguousarray(design, dtype=np.float64)
        if self.design.ndim != 2 or self.y.ndim != 1:
            raise ConfigError("design must be (T, p) and y must be (T,)")
        if self.y.shape[0] != self.design.shape[0]:
            raise ConfigError("y and design disagree on the number of time points")
        if self.design.shape[0] < 2:
            raise ConfigError("at least two time points are required")
        self.model = model
        self.rng = rng if rng is not None else make_rng(seed, stream)
        self._ratio_grid = model.ratio_grid_step * np.arange(1, model.ratio_grid_count + 1)
        self._level_grid = model.level_grid_step * np.arange(1, model.level_grid_count + 1)

    @property
    def n_times(self) -> int:
        return self.design.shape[0]

    @property
    def n_coef(self) -> int:
        return self.design.shape[1]

    # -- initialization ----------------------------------------------------

    def _ridge_paths(self, window: int = 15, penalty: float = 1e-2) -> np.ndarray:
        """Per-time ridge fits on a centered window; crude but adequate start."""
        t_len, p = self.design.shape
        half = window // 2
        theta = np.empty((t_len, p))
        eye = np.eye(p)
        for t in range(t_len):
            lo = max(0, t - half)
            hi = min(t_len, t + half + 1)
            x = self.design[lo:hi]
            yy = self.y[lo:hi]
            theta[t] = np.linalg.solve(x.T @ x + penalty * eye, x.T @ yy)
        return theta

    def initial_state(self) -> GibbsState:
        m = self.model
        t_len, p = self.design.shape
        rate = m.fixed_rate if m.fixed_rate is not None else m.rate_shape / m.rate_rate
        if m.shrinks_marginally:
            ratio = m.fixed_ratio if m.fixed_ratio is not None \
                else float(np.median(self._ratio_grid))
        else:
            ratio = 0.0
        init_rate = m.fixed_init_rate if m.fixed_init_rate is not None \
            else m.init_rate_shape / m.init_rate_rate
        level = m.fixed_shrink_level if m.fixed_shrink_level is not None \
            else float(np.median(self._level_grid))
        if m.pools_rate and m.fixed_rate is None:
            # prior-median-ish rate implied by the level: rate^2 ~ Ga(1/2, level/2)
            rate = math.sqrt(0.9 / level)
        counts = np.zeros((t_len, p), dtype=np.int64)
        state = GibbsState(
            theta=self._ridge_paths(),
            noise_var=m.fixed_noise if m.fixed_noise is not None else m.noise_scale,
            baseline=np.zeros(p),
            rate=rate,
            ratio=ratio,
            init_rate=init_rate,
            shrink_level=level,
            counts=counts,
            evol_scales=np.full((t_len, p), 2.0 / rate**2),
            syn_scales=np.ones((t_len, p)),
            syn_active=self._active_pattern(counts),
        )
        # start the synthetic scales at their prior means given zero counts
        rates = self._syn_rates(state)
        state.syn_scales[state.syn_active] = 2.0 / rates[state.syn_active] ** 2
        return state

    # -- shared pieces -----------------------------------------------------

    def _active_pattern(self, counts: np.ndarray) -> np.ndarray:
        active = np.zeros(counts.shape, dtype=bool)
        active[0] = True
        if self.model.shrinks_marginally:
            active[-1] = True
            if counts.shape[0] > 2:
                active[1:-1] = counts[1:-1] > 0
        return active

    def _syn_rates(self, state: GibbsState) -> np.ndarray:
        """Laplace rate behind each active synthetic row."""
        rates = np.zeros_like(state.syn_scales)
        if self.model.shrinks_marginally:
            edge = state.ratio * state.rate
            rates[0] = edge
            rates[-1] = edge
            if self.n_times > 2:
                interior = state.counts[1:-1] * state.rate * (1.0 - state.ratio)
                rates[1:-1] = np.where(state.syn_active[1:-1], interior, 0.0)
        else:
            rates[0] = state.init_rate
        return rates

    def _build_spec(self, state: GibbsState) -> CdlmSpec:
        t_len, p = self.design.shape
        return CdlmSpec(
            y=self.y,
            design=self.design,
            obs_var=np.ones(t_len),
            evol_var=state.evol_scales,
            syn_active=state.syn_active,
            syn_value=np.broadcast_to(state.baseline, (t_len, p)).copy(),
            syn_var=state.syn_scales,
            init_mean=state.baseline.copy(),
            init_var=np.full(p, self.model.diffuse_init_var),
        )

    # -- sweep steps -------------------------------------------------------

    def update_states(self, state: GibbsState) -> None:
        """Joint draw of the noise variance (states marginalized) and the paths."""
        spec = self._build_spec(state)
        result = forward_filter(spec)
        if self.model.fixed_noise is not None:
            state.noise_var = self.model.fixed_noise
        else:
            state.noise_var = sample_scale(
                result, spec, self.model.noise_df, self.model.noise_scale, self.rng
            )
        state.theta = backward_sample(result, spec, state.noise_var, self.rng)

    def update_counts(self, state: GibbsState) -> None:
        """Interior activation counts, their scales integrated out: geometric
        with odds ratio * exp(-rate (1 - ratio) |x_t|)."""
        if not self.model.shrinks_marginally or self.n_times < 3:
            return
        x = state.scaled_states()
        q = state.ratio * np.exp(
            -state.rate * (1.0 - state.ratio) * np.abs(x[1:-1])
        )
        state.counts[1:-1] = sample_geometric(q, self.rng)

    def _rate_exponent(self, x: np.ndarray, state: GibbsState) -> float:
        """Coefficient S of the rate in the collapsed path density exp(-rate*S)."""
        s = float(np.sum(np.abs(np.diff(x, axis=0))))
        if self.model.shrinks_marginally:
            s += state.ratio * float(np.sum(np.abs(x[0])) + np.sum(np.abs(x[-1])))
            if self.n_times > 2:
                s += (1.0 - state.ratio) * float(
                    np.sum(state.counts[1:-1] * np.abs(x[1:-1]))
                )
        return s

    def _update_ratio(self, state: GibbsState, x: np.ndarray) -> None:
        if self.model.fixed_ratio is not None:
            return
        t_len, p = x.shape
        edge = float(np.sum(np.abs(x[0])) + np.sum(np.abs(x[-1])))
        if t_len > 2:
            activated = float(np.sum(state.counts[1:-1] * np.abs(x[1:-1])))
            total_counts = float(np.sum(state.counts[1:-1]))
        else:
            activated = 0.0
            total_counts = 0.0
        g = self._ratio_grid
        log_w = (
            (p + total_counts) * np.log(g)
            + p * (t_len - 2) * np.log1p(-g * g)
            + 2.0 * p * np.log1p(g)
            - p * np.log1p(2.0 * g)
            - state.rate * g * (edge - activated)
        )
        state.ratio = float(g[sample_grid(log_w, self.rng)])

    def _update_level(self, state: GibbsState) -> None:
        if self.model.fixed_shrink_level is not None:
            return
        n = self.model.level_grid_count + 1
        m = np.arange(1, n)
        log_w = -0.5 * np.log(n - m) - 0.5 * state.rate**2 * m * self.model.level_grid_step
        state.shrink_level = float(self._level_grid[sample_grid(log_w, self.rng)])

    def update_weights(self, state: GibbsState) -> None:
        """Rate parameters given states and counts, all scales integrated out.

        dfl:  rate ~ Ga(shape + p T, rate0 + S), then ratio on its grid
        de:   rate ~ Ga(shape + p (T-1), rate0 + D), init_rate ~ Ga(. + p, . + |x_1|)
        dfhs: rate via the extended gamma tied to the level, then level, then ratio
        hs:   as dfhs with the de-form exponent, plus init_rate
        """
        m = self.model
        x = state.scaled_states()
        t_len, p = x.shape
        s = self._rate_exponent(x, state)
        if m.shrinks_marginally:
            power = p * t_len
        else:
            power = p * (t_len - 1)
        if m.fixed_rate is None:
            if m.pools_rate:
                half = sample_extended_gamma(
                    0.5 * (power + 1), s / math.sqrt(2.0 * state.shrink_level), self.rng
                )
                state.rate = math.sqrt(2.0 * half / state.shrink_level)
            else:
                state.rate = self.rng.gamma(m.rate_shape + power, 1.0 / (m.rate_rate + s))
        if m.pools_rate:
            self._update_level(state)
        if m.shrinks_marginally:
            self._update_ratio(state, x)
        else:
            if m.fixed_init_rate is None:
                state.init_rate = self.rng.gamma(
                    m.init_rate_shape + p,
                    1.0 / (m.init_rate_rate + float(np.sum(np.abs(x[0])))),
                )

    def update_scales(self, state: GibbsState) -> None:
        """Redraw every latent scale given states, counts, and rates."""
        x = state.scaled_states()
        step = np.diff(x, axis=0)
        state.evol_scales[1:] = gig_half_vector(
            np.full(step.shape, state.rate**2), step**2, self.rng
        )
        state.syn_active = self._active_pattern(state.counts)
        rates = self._syn_rates(state)
        act = state.syn_active
        state.syn_scales[act] = gig_half_vector(rates[act] ** 2, x[act] ** 2, self.rng)

    def update_baseline(self, state: GibbsState) -> None:
        """Baseline given states and scales; conjugate normal per coefficient."""
        m = self.model
        if m.baseline == "zero":
            return
        act = state.syn_active
        weights = np.where(act, 1.0 / state.syn_scales, 0.0)
        precision = (
            1.0 / m.baseline_sd**2
            + 1.0 / m.diffuse_init_var
            + weights.sum(axis=0)
        )
        pull = state.theta[0] / m.diffuse_init_var + np.sum(weights * state.theta, axis=0)
        mean = pull / precision
        sd = np.sqrt(state.noise_var / precision)
        state.baseline = self.rng.normal(mean, sd)

    def sweep(self, state: GibbsState) -> None:
        self.update_states(state)
        self.update_counts(state)
        self.update_weights(state)
        self.update_scales(state)
        self.update_baseline(state)

    # -- prediction and the driver ----------------------------------------

    def predict_observation(self, state: GibbsState, design_row: np.ndarray) -> float:
        """One posterior-predictive draw of the next observation: advance each
        coefficient path one step under its prior, then add observation noise."""
        design_row = np.asarray(design_row, dtype=np.float64)
        if design_row.shape != (self.n_coef,):
            raise ConfigError("design_row must have one entry per coefficient")
        root_v = math.sqrt(state.noise_var)
        x_last = (state.theta[-1] - state.baseline) / root_v
        x_next = np.empty_like(x_last)
        if self.model.shrinks_marginally:
            w = Weights(beta=state.rate, rho=state.ratio)
            for j in range(self.n_coef):
                x_next[j] = sample_prior_transition(x_last[j], w, self.rng)
        else:
            x_next = x_last + self.rng.laplace(0.0, 1.0 / state.rate, size=x_last.shape)
        theta_next = state.baseline + root_v * x_next
        mean = float(design_row @ theta_next)
        return self.rng.normal(mean, root_v)

    def run(self, chain: ChainConfig = ChainConfig(),
            predict_design: Optional[np.ndarray] = None,
            state: Optional[GibbsState] = None) -> ChainOutput:
        if state is None:
            state = self.initial_state()
        kept = chain.kept_indices
        n_keep = kept.size
        out = ChainOutput(
            rate=np.empty(n_keep),
            ratio=np.empty(n_keep),
            noise_var=np.empty(n_keep),
            init_rate=np.empty(n_keep),
            shrink_level=np.empty(n_keep),
            baseline=np.empty((n_keep, self.n_coef)),
            count_total=np.empty(n_keep),
            states=np.empty((n_keep, self.n_times, self.n_coef))
            if chain.store_states else None,
            counts=np.empty((n_keep, self.n_times, self.n_coef), dtype=np.int32)
            if chain.store_states and self.model.variant in ("dfl", "dfhs") else None,
            predictions=np.empty(n_keep) if predict_design is not None else None,
        )
        keep_at = {int(s): i for i, s in enumerate(kept)}
        for s in range(chain.n_sweeps):
            self.sweep(state)
            i = keep_at.get(s)
            if i is None:
                continue
            out.rate[i] = state.rate
            out.ratio[i] = state.ratio
            out.noise_var[i] = state.noise_var
            out.init_rate[i] = state.init_rate
            out.shrink_level[i] = state.shrink_level
            out.baseline[i] = state.baseline
            out.count_total[i] = state.counts.sum()
            if out.states is not None:
                out.states[i] = state.theta
            if out.counts is not None:
                out.counts[i] = state.counts
            if out.predictions is not None:
                out.predictions[i] = self.predict_observation(state, predict_design)
        return out
