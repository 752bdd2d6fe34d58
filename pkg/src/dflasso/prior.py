"""Closed-form densities of the dynamic fused lasso (DFL) prior process.

The process couples a marginal Laplace shrinkage kernel f(x) = (a/2) exp(-a|x|)
with a fused Laplace transition kernel g(x, x') = (b/2) exp(-b|x - x'|), with
rates a = rho * b for a weight rho in [0, 1).  The one-step transition density
is

    p(x | x') = f(x) g(x, x') / h(x'),      h(x') = int f(u) g(u, x') du,

and h has the closed form implemented in :func:`log_normalizing_constant`.  The
stationary form h(x) f(x) integrates to

    Z = a b (b + 2 a) / (4 (a + b)^2),

so the stationary density is h(x) f(x) / Z.

Everything in this module is exact arithmetic on densities; sampling lives in
:mod:`dflasso.samplers`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Weights",
    "MixtureConstants",
    "mixture_constants",
    "log_normalizing_constant",
    "normalizing_constant",
    "stationary_mass",
    "transition_density",
    "log_transition_density",
    "stationary_density",
    "conditional_shrinkage_mean",
    "shrinkage_weight_cdf",
    "shrinkage_weight_pdf",
    "shrinkage_weight_density",
    "prior_count_positive_prob",
    "prior_count_mean",
    "log_geometric_weights",
]

# below this relative gap the (beta - alpha) -> 0 limit expressions are used
_EQUAL_RATE_TOL = 1e-12


@dataclass(frozen=True)
class Weights:
    """Rate pair of the process, parametrized by (beta, rho) with alpha = rho*beta.

    beta > 0 is the fusion rate; rho in [0, 1) the shrinkage-to-baseline ratio.
    rho = 0 encodes the pure random-walk (fused-only) limit used by the DE/HS
    model variants; density routines that require alpha > 0 reject it.
    """

    beta: float
    rho: float

    def __post_init__(self):
        if not (self.beta > 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if not (0.0 <= self.rho < 1.0):
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    @property
    def alpha(self) -> float:
        return self.rho * self.beta

    @property
    def equal_rates(self) -> bool:
        return (1.0 - self.rho) < _EQUAL_RATE_TOL


def _require_shrinkage(w: Weights, what: str) -> None:
    if w.rho == 0.0:
        raise ValueError(f"{what} requires alpha > 0 (rho > 0)")


@dataclass(frozen=True)
class MixtureConstants:
    """Constants of the geometric/log-geometric mixture behind 1/h.

    c0 = (beta - alpha)/2 carries the point mass at count zero and
    cplus = log(beta) - log(beta - alpha) the log-geometric branch, so
    P[count > 0] = cplus / (c0 + cplus).
    """

    c0: float
    cplus: float
    ratio: float  # alpha / beta


def mixture_constants(w: Weights) -> MixtureConstants:
    _require_shrinkage(w, "mixture_constants")
    if w.equal_rates:
        raise ValueError("mixture constants are undefined at alpha == beta")
    c0 = 0.5 * w.beta * (1.0 - w.rho)
    cplus = -math.log1p(-w.rho)
    return MixtureConstants(c0=c0, cplus=cplus, ratio=w.rho)


def log_geometric_weights(w: Weights, tail_tol: float = 1e-12) -> np.ndarray:
    """Normalized weights w_n = ratio^n / (n cplus), truncated once the
    remaining tail is below ``tail_tol``.

    The tail beyond N is bounded by ratio^(N+1) / ((N+1) cplus (1 - ratio)).
    """
    mc = mixture_constants(w)
    q = mc.ratio
    if q == 0.0:
        return np.zeros(0)
    n = 1
    weights = []
    term = q / mc.cplus
    while True:
        weights.append(term)
        bound = term * q / (1.0 - q)
        if bound < tail_tol:
            break
        n += 1
        term = q**n / (n * mc.cplus)
    return np.asarray(weights)


def _one_minus_ratio_decay(w: Weights, absx: float) -> float:
    """Stable 1 - (alpha/beta) exp(-(beta-alpha)|x|) as (d + alpha*e)/beta.

    Written as ((beta-alpha) + alpha*(-expm1(-(beta-alpha)|x|))) / beta to
    avoid cancellation when alpha ~ beta and |x| is small.
    """
    d = w.beta - w.alpha
    return (d + w.alpha * (-math.expm1(-d * absx))) / w.beta


def _decay_factor(w: Weights, absx: float) -> float:
    """(-expm1(-(beta-alpha)|x|)) / (beta-alpha), continuous limit |x| at equal rates."""
    d = w.beta - w.alpha
    if d < _EQUAL_RATE_TOL * w.beta:
        return absx
    return -math.expm1(-d * absx) / d


def log_normalizing_constant(x: float, w: Weights) -> float:
    """log h(x) for h(x) = int f(u) g(u, x) du.

    Closed form  h(x) = [alpha beta / (2 (alpha+beta))] e^{-alpha|x|}
                        [1 + alpha * k(|x|)],
    with k(|x|) = (1 - e^{-(beta-alpha)|x|}) / (beta - alpha); the k factor
    degenerates to |x| at alpha == beta, reproducing the equal-rate form
    (alpha/4) e^{-alpha|x|} (1 + alpha|x|).
    """
    _require_shrinkage(w, "normalizing constant")
    a, b = w.alpha, w.beta
    absx = abs(x)
    if not math.isfinite(absx):
        raise ValueError("x must be finite")
    k = _decay_factor(w, absx)
    return math.log(a * b / (2.0 * (a + b))) - a * absx + math.log1p(a * k)


def normalizing_constant(x: float, w: Weights) -> float:
    return math.exp(log_normalizing_constant(x, w))


def stationary_mass(w: Weights) -> float:
    """Closed-form integral of h(x) f(x): alpha beta (beta + 2 alpha) / (4 (alpha+beta)^2)."""
    _require_shrinkage(w, "stationary mass")
    a, b = w.alpha, w.beta
    return a * b * (b + 2.0 * a) / (4.0 * (a + b) ** 2)


def log_transition_density(x: float, x_prev: float, w: Weights) -> float:
    _require_shrinkage(w, "transition density")
    a, b = w.alpha, w.beta
    log_f = math.log(0.5 * a) - a * abs(x)
    log_g = math.log(0.5 * b) - b * abs(x - x_prev)
    return log_f + log_g - log_normalizing_constant(x_prev, w)


def transition_density(x: float, x_prev: float, w: Weights) -> float:
    """p(x | x_prev) = f(x) g(x, x_prev) / h(x_prev)."""
    return math.exp(log_transition_density(x, x_prev, w))


def stationary_density(x: float, w: Weights) -> float:
    """Stationary density h(x) f(x) / Z; integrates to one."""
    _require_shrinkage(w, "stationary density")
    a = w.alpha
    log_f = math.log(0.5 * a) - a * abs(x)
    return math.exp(log_normalizing_constant(x, w) + log_f - math.log(stationary_mass(w)))


def conditional_shrinkage_mean(x_prev: float, w: Weights) -> float:
    """E[w | x_prev], the posterior mean of the shrinkage weight in
    E[x | x_prev] = E[w | x_prev] * x_prev.

    Exact form (alpha < beta):

        [1 - 2 alpha (1 - e^{-(beta-alpha)|x'|}) / ((beta^2-alpha^2)|x'|)]
        / [1 - (alpha/beta) e^{-(beta-alpha)|x'|}]

    evaluated through expm1 so the near-equal-rate regime stays accurate; the
    equal-rate limit is exactly 1/2 (the shrinkage weight becomes uniform).
    """
    _require_shrinkage(w, "conditional shrinkage mean")
    if x_prev == 0.0 or not math.isfinite(x_prev):
        raise ValueError("conditional shrinkage mean requires a finite nonzero x_prev")
    a, b = w.alpha, w.beta
    absx = abs(x_prev)
    if w.equal_rates:
        return 0.5
    k = _decay_factor(w, absx)  # (1 - e^{-d|x'|}) / d
    num = 1.0 - 2.0 * a * k / ((a + b) * absx)
    den = _one_minus_ratio_decay(w, absx)
    return num / den


def _rescaled_bounds(x_prev: float, w: Weights) -> tuple[float, float]:
    absx = abs(x_prev)
    return w.alpha * absx, w.beta * absx


def shrinkage_weight_cdf(y: float, x_prev: float, w: Weights) -> float:
    """Distribution function Q(y) of the rescaled weight y = |x'| sqrt(w a^2 + (1-w) b^2).

    Q(y) = (b e^{-a|x'|} - a b |x'| y^{-1} e^{-y}) / (b e^{-a|x'|} - a e^{-b|x'|})
    on y in [a|x'|, b|x'|]; computed with the common e^{-a|x'|} factored out so
    both tails stay accurate for large rates.
    """
    _require_shrinkage(w, "shrinkage weight cdf")
    if x_prev == 0.0 or not math.isfinite(x_prev):
        raise ValueError("shrinkage weight cdf requires a finite nonzero x_prev")
    if w.equal_rates:
        raise ValueError("rescaled weight degenerates at alpha == beta")
    lo, hi = _rescaled_bounds(x_prev, w)
    if not (lo <= y <= hi):
        raise ValueError(f"y={y} outside support [{lo}, {hi}]")
    # numerator 1 - (lo / y) e^{-(y - lo)}, denominator 1 - (alpha/beta) e^{-(hi - lo)}
    num = 1.0 - (lo / y) * math.exp(-(y - lo))
    den = _one_minus_ratio_decay(w, abs(x_prev))
    # float noise near the endpoints can leave [0, 1] when alpha ~ beta
    return min(1.0, max(0.0, num / den))


def shrinkage_weight_pdf(y: float, x_prev: float, w: Weights) -> float:
    """Density q(y) = C (y^{-1} + y^{-2}) e^{-y} of the rescaled weight,
    C = a b |x'| / (b e^{-a|x'|} - a e^{-b|x'|}); same stabilization as the cdf."""
    _require_shrinkage(w, "shrinkage weight pdf")
    if x_prev == 0.0 or not math.isfinite(x_prev):
        raise ValueError("shrinkage weight pdf requires a finite nonzero x_prev")
    if w.equal_rates:
        raise ValueError("rescaled weight degenerates at alpha == beta")
    lo, hi = _rescaled_bounds(x_prev, w)
    if not (lo <= y <= hi):
        return 0.0
    den = _one_minus_ratio_decay(w, abs(x_prev))  # (denominator) * e^{a|x'|} / beta
    c = lo / den
    return c * (1.0 / y + 1.0 / y**2) * math.exp(-(y - lo))


def shrinkage_weight_density(wgt: float, x_prev: float, w: Weights) -> float:
    """Density q(w | x_prev) of the shrinkage weight itself, on w in (0, 1).

    Obtained from the rescaled form by the change of variable
    y = |x'| sqrt(w a^2 + (1-w) b^2); constant in w at equal rates.
    """
    _require_shrinkage(w, "shrinkage weight density")
    if x_prev == 0.0 or not math.isfinite(x_prev):
        raise ValueError("shrinkage weight density requires a finite nonzero x_prev")
    if not (0.0 <= wgt <= 1.0):
        return 0.0
    a, b = w.alpha, w.beta
    absx = abs(x_prev)
    rate2 = wgt * a * a + (1.0 - wgt) * b * b
    y = absx * math.sqrt(rate2)
    if w.equal_rates:
        # uniform: the jacobian cancels the vanishing support of y
        hval = normalizing_constant(x_prev, w)
        return (a**4 / (4.0 * hval)) * math.exp(-a * absx) * (absx / rate2 + 1.0 / rate2**1.5)
    # q(w) = q(y) |dy/dw|, dy/dw = -|x'| (b^2 - a^2) / (2 sqrt(rate2))
    jac = absx * (b * b - a * a) / (2.0 * math.sqrt(rate2))
    return shrinkage_weight_pdf(y, x_prev, w) * jac


def prior_count_positive_prob(w: Weights) -> float:
    """P[n_t > 0] = cplus / (c0 + cplus) under the stationary process."""
    if w.rho == 0.0:
        return 0.0
    mc = mixture_constants(w)
    return mc.cplus / (mc.c0 + mc.cplus)


def prior_count_mean(w: Weights) -> float:
    """E[n_t] = rho / ((1 - rho)(c0 + cplus)) under the stationary process."""
    if w.rho == 0.0:
        return 0.0
    mc = mixture_constants(w)
    return w.rho / ((1.0 - w.rho) * (mc.c0 + mc.cplus))
