"""Conditionally Gaussian dynamic linear model with synthetic observations.

Given the latent scale variables, every model variant in this package reduces
to the same linear-Gaussian form: a random-walk state with diagonal evolution
variances, one scalar regression observation per time point, and optional
per-coefficient synthetic observations that pin a state toward its baseline
with its own variance.  This module runs the Kalman recursions for that form.

All variances are interpreted on a relative scale: a single common factor
(the observation variance of the model) multiplies every variance in the
spec.  The forward filter runs once with the factor set to one; the factor's
own conditional, states integrated out, is inverse-gamma with shape growing
by one half per real observation row only, because the synthetic rows belong
to the (properly normalized) state prior and carry no information about the
common scale.  Its rate term is the marginal quadratic of the observations,
obtained by evaluating the complete joint quadratic at the smoothed mean
path; note that the filter's own one-step errors do not compose into that
quadratic here, since synthetic rows at later times inform earlier states.
Backward sampling reuses the filter moments, scaled on the way out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, NumericalError

__all__ = [
    "CdlmSpec",
    "FilterResult",
    "forward_filter",
    "scale_quadratic",
    "sample_scale",
    "backward_sample",
    "smoother_moments",
    "ffbs_draw",
]


@dataclass
class CdlmSpec:
    """Arrays defining the conditional model.

    y           (T,)    scalar observations
    design      (T, p)  regression vectors F_t
    obs_var     (T,)    relative observation variances
    evol_var    (T, p)  relative evolution variances; row t couples t-1 -> t,
                        row 0 is ignored
    syn_active  (T, p)  which synthetic observations are present
    syn_value   (T, p)  synthetic targets (typically the baseline)
    syn_var     (T, p)  relative synthetic variances
    init_mean   (p,)    state prior mean at t = 0
    init_var    (p,)    diagonal state prior variances at t = 0
    """

    y: np.ndarray
    design: np.ndarray
    obs_var: np.ndarray
    evol_var: np.ndarray
    syn_active: np.ndarray
    syn_value: np.ndarray
    syn_var: np.ndarray
    init_mean: np.ndarray
    init_var: np.ndarray

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.design = np.ascontiguousarray(self.design, dtype=np.float64)
        if self.design.ndim != 2 or self.y.ndim != 1:
            raise ConfigError("design must be (T, p) and y must be (T,)")
        t_len, p = self.design.shape
        if t_len == 0 or p == 0:
            raise ConfigError("model needs at least one time point and one coefficient")
        self.obs_var = np.ascontiguousarray(self.obs_var, dtype=np.float64)
        self.evol_var = np.ascontiguousarray(self.evol_var, dtype=np.float64)
        self.syn_active = np.ascontiguousarray(self.syn_active, dtype=np.bool_)
        self.syn_value = np.ascontiguousarray(self.syn_value, dtype=np.float64)
        self.syn_var = np.ascontiguousarray(self.syn_var, dtype=np.float64)
        self.init_mean = np.ascontiguousarray(self.init_mean, dtype=np.float64)
        self.init_var = np.ascontiguousarray(self.init_var, dtype=np.float64)
        shapes = {
            "y": (self.y, (t_len,)),
            "obs_var": (self.obs_var, (t_len,)),
            "evol_var": (self.evol_var, (t_len, p)),
            "syn_active": (self.syn_active, (t_len, p)),
            "syn_value": (self.syn_value, (t_len, p)),
            "syn_var": (self.syn_var, (t_len, p)),
            "init_mean": (self.init_mean, (p,)),
            "init_var": (self.init_var, (p,)),
        }
        for name, (arr, want) in shapes.items():
            if arr.shape != want:
                raise ConfigError(f"{name} has shape {arr.shape}, expected {want}")
        if not np.all(self.obs_var > 0.0):
            raise ConfigError("obs_var must be positive")
        if t_len > 1 and not np.all(self.evol_var[1:] > 0.0):
            raise ConfigError("evol_var rows 1..T-1 must be positive")
        if not np.all(self.init_var > 0.0):
            raise ConfigError("init_var must be positive")
        if np.any(self.syn_active) and not np.all(self.syn_var[self.syn_active] > 0.0):
            raise ConfigError("active synthetic variances must be positive")

    @property
    def n_times(self) -> int:
        return self.design.shape[0]

    @property
    def n_coef(self) -> int:
        return self.design.shape[1]


@dataclass
class FilterResult:
    """Filtered moments on the relative scale."""

    mean: np.ndarray  # (T, p)
    cov: np.ndarray   # (T, p, p)


@njit(cache=True)
def _filter_kernel(y, design, obs_var, evol_var, syn_active, syn_value, syn_var,
                   init_mean, init_var):
    t_len, p = design.shape
    means = np.empty((t_len, p))
    covs = np.empty((t_len, p, p))
    m = init_mean.copy()
    c = np.zeros((p, p))
    for j in range(p):
        c[j, j] = init_var[j]
    for t in range(t_len):
        if t > 0:
            for j in range(p):
                c[j, j] += evol_var[t, j]
        for j in range(p):
            if syn_active[t, j]:
                a = c[:, j].copy()
                q = a[j] + syn_var[t, j]
                e = syn_value[t, j] - m[j]
                m += (e / q) * a
                c -= np.outer(a, a) / q
        f = design[t]
        a = c @ f
        q = f @ a + obs_var[t]
        e = y[t] - f @ m
        m += (e / q) * a
        c -= np.outer(a, a) / q
        means[t] = m
        covs[t] = c
    return means, covs


@njit(cache=True)
def _backward_kernel(means, covs, evol_var, v_scale, z):
    t_len, p = means.shape
    states = np.empty((t_len, p))
    eye = np.eye(p)
    cov = v_scale * covs[t_len - 1]
    # chol needs strict positive definiteness; nudge by a relative jitter
    jitter = 1e-13 * (np.trace(cov) / p + 1e-300)
    root = np.linalg.cholesky(cov + jitter * eye)
    states[t_len - 1] = means[t_len - 1] + root @ z[t_len - 1]
    for t in range(t_len - 2, -1, -1):
        pred = covs[t].copy()
        for j in range(p):
            pred[j, j] += evol_var[t + 1, j]
        gain = np.linalg.solve(pred, covs[t]).T
        mean = means[t] + gain @ (states[t + 1] - means[t])
        cov = covs[t] - gain @ covs[t]
        cov = 0.5 * v_scale * (cov + cov.T)
        jitter = 1e-13 * (np.trace(cov) / p + 1e-300)
        root = np.linalg.cholesky(cov + jitter * eye)
        states[t] = mean + root @ z[t]
    return states


@njit(cache=True)
def _smoother_kernel(means, covs, evol_var):
    t_len, p = means.shape
    smeans = np.empty((t_len, p))
    scovs = np.empty((t_len, p, p))
    smeans[t_len - 1] = means[t_len - 1]
    scovs[t_len - 1] = covs[t_len - 1]
    for t in range(t_len - 2, -1, -1):
        pred = covs[t].copy()
        for j in range(p):
            pred[j, j] += evol_var[t + 1, j]
        gain = np.linalg.solve(pred, covs[t]).T
        smeans[t] = means[t] + gain @ (smeans[t + 1] - means[t])
        delta = scovs[t + 1] - pred
        cov = covs[t] + gain @ delta @ gain.T
        scovs[t] = 0.5 * (cov + cov.T)
    return smeans, scovs


def forward_filter(spec: CdlmSpec) -> FilterResult:
    """Kalman filter with sequential scalar updates, on the relative scale."""
    means, covs = _filter_kernel(
        spec.y, spec.design, spec.obs_var, spec.evol_var,
        spec.syn_active, spec.syn_value, spec.syn_var,
        spec.init_mean, spec.init_var,
    )
    if not np.all(np.isfinite(means)):
        raise NumericalError("forward filter diverged")
    return FilterResult(mean=means, cov=covs)


def scale_quadratic(spec: CdlmSpec, path: np.ndarray) -> float:
    """The complete joint quadratic of the model evaluated at a state path.

    At the smoothed mean path this equals the marginal quadratic of the
    observations, (y - E y)' M^{-1} (y - E y) with M the relative predictive
    covariance: minimizing a Gaussian joint quadratic over the states yields
    the marginal one.
    """
    resid = spec.y - np.sum(spec.design * path, axis=1)
    out = float(np.sum(resid**2 / spec.obs_var))
    out += float(np.sum((path[0] - spec.init_mean) ** 2 / spec.init_var))
    if spec.n_times > 1:
        step = np.diff(path, axis=0)
        out += float(np.sum(step**2 / spec.evol_var[1:]))
    act = spec.syn_active
    if np.any(act):
        out += float(np.sum((spec.syn_value[act] - path[act]) ** 2 / spec.syn_var[act]))
    return out


def sample_scale(result: FilterResult, spec: CdlmSpec, prior_df: float,
                 prior_scale: float, rng: np.random.Generator) -> float:
    """Draw the common variance factor, states integrated out.

    Its inverse is Gamma with shape (prior_df + T)/2 and rate
    (prior_df * prior_scale + s)/2, where s is the marginal observation
    quadratic from :func:`scale_quadratic` at the smoothed mean path.  Only
    real observation rows count toward the shape.
    """
    if prior_df <= 0.0 or prior_scale <= 0.0:
        raise ConfigError("variance prior needs positive df and scale")
    smeans, _ = _smoother_kernel(result.mean, result.cov, spec.evol_var)
    shape = 0.5 * (prior_df + spec.n_times)
    rate = 0.5 * (prior_df * prior_scale + scale_quadratic(spec, smeans))
    precision = rng.gamma(shape, 1.0 / rate)
    if precision <= 0.0 or not math.isfinite(precision):
        raise NumericalError("variance factor draw degenerated")
    return 1.0 / precision


def backward_sample(result: FilterResult, spec: CdlmSpec, v_scale: float,
                    rng: np.random.Generator) -> np.ndarray:
    """One joint draw of the state path given the filter output and the factor."""
    if v_scale <= 0.0 or not math.isfinite(v_scale):
        raise ConfigError("v_scale must be positive and finite")
    z = rng.standard_normal(result.mean.shape)
    return _backward_kernel(result.mean, result.cov, spec.evol_var, v_scale, z)


def smoother_moments(result: FilterResult, spec: CdlmSpec):
    """Marginal smoothed means and covariances (relative scale)."""
    return _smoother_kernel(result.mean, result.cov, spec.evol_var)


def ffbs_draw(spec: CdlmSpec, prior_df: float, prior_scale: float,
              rng: np.random.Generator):
    """Joint (factor, states) draw: factor from its marginal conditional, then
    the state path given the factor."""
    result = forward_filter(spec)
    v_scale = sample_scale(result, spec, prior_df, prior_scale, rng)
    states = backward_sample(result, spec, v_scale, rng)
    return v_scale, states
