"""Exact samplers for every non-Gaussian conditional used by the models.

All draws are exact (inversion or rejection); nothing here is Metropolis.
Functions take an explicit ``numpy.random.Generator`` so that every caller
controls its own stream; :func:`make_rng` builds reproducible generators from
a (seed, stream) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .prior import Weights, _EQUAL_RATE_TOL

__all__ = [
    "RngStream",
    "make_rng",
    "GigParams",
    "sample_gig",
    "gig_half_vector",
    "sample_geometric",
    "sample_log_geometric",
    "sample_extended_gamma",
    "sample_grid",
    "sample_prior_transition",
    "sample_stationary",
    "invert_weight_cdf",
]

# smallest admissible GIG b-parameter; zero residuals are floored here
GIG_B_FLOOR = 1e-300


@dataclass(frozen=True)
class RngStream:
    """Deterministic generator factory: same (seed, stream) -> same draws."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence((self.seed, self.stream))))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return RngStream(seed, stream).generator()


# ---------------------------------------------------------------------------
# generalized inverse Gaussian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GigParams:
    """GIG(p, a, b) with density proportional to x^(p-1) exp(-(a x + b/x)/2)."""

    p: float
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0.0 or self.b <= 0.0:
            raise ValueError(f"GIG requires a, b > 0, got a={self.a}, b={self.b}")


def _ig_unit_mean(omega: float, rng: np.random.Generator) -> float:
    """Inverse-Gaussian(mean 1, shape omega) on a cancellation-free path."""
    y = rng.standard_normal() ** 2
    # x = 1 + (y - sqrt(y^2 + 4 omega y)) / (2 omega), rationalized so that the
    # small-omega regime keeps the O(omega/y) root instead of rounding to zero
    if y < 1e-300:
        x = 1.0
    else:
        x = 4.0 * omega * y / (y + math.sqrt(y * (y + 4.0 * omega))) ** 2
    if rng.random() <= 1.0 / (1.0 + x):
        return x
    return 1.0 / x


def _gig_half(a: float, b: float, rng: np.random.Generator) -> float:
    """GIG(1/2, a, b) = sqrt(b/a) / IG(1, sqrt(ab)): the reciprocal construction."""
    omega = math.sqrt(a * b)
    return math.sqrt(b / a) / _ig_unit_mean(omega, rng)


def gig_half_vector(a: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized GIG(1/2, a, b); b is floored at GIG_B_FLOOR."""
    a = np.asarray(a, dtype=float)
    b = np.maximum(np.asarray(b, dtype=float), GIG_B_FLOOR)
    if np.any(a <= 0.0):
        raise ValueError("GIG a-parameter must be positive")
    omega = np.sqrt(a * b)
    y = np.maximum(rng.standard_normal(a.shape) ** 2, 1e-300)
    x = 4.0 * omega * y / (y + np.sqrt(y * (y + 4.0 * omega))) ** 2
    flip = rng.random(a.shape) > 1.0 / (1.0 + x)
    w = np.where(flip, 1.0 / x, x)
    return np.sqrt(b / a) / w


def _gig_psi(s, alpha, lam):
    return -alpha * (np.cosh(s) - 1.0) - lam * (np.exp(s) - s - 1.0)


def _gig_dpsi(s, alpha, lam):
    return -alpha * np.sinh(s) - lam * (np.exp(s) - 1.0)


def _gig_hat_setup(alpha: float, lam: float):
    """Pick tangent points for the three-piece hat over exp(psi).

    psi is concave with its maximum 0 at 0, so the uniform middle piece and the
    two tangent tails majorize exp(psi) for any positive tangent points; the
    branch constants below only tune the rejection rate.
    """
    x = -_gig_psi(1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        t = 1.0
    elif x > 2.0:
        t = math.sqrt(2.0 / (alpha + lam))
    else:
        t = math.log(4.0 / (alpha + 2.0 * lam))
    x = -_gig_psi(-1.0, alpha, lam)
    if 0.5 <= x <= 2.0:
        s = 1.0
    elif x > 2.0:
        s = math.sqrt(4.0 / (alpha * math.cosh(1.0) + lam))
    else:
        cands = [math.log(1.0 + 1.0 / alpha + math.sqrt(1.0 / alpha**2 + 2.0 / alpha))]
        if lam > 0.0:
            cands.append(1.0 / lam)
        s = min(cands)
    return t, s


def _gig_general(p: float, a: float, b: float, rng: np.random.Generator) -> float:
    """GIG(p, a, b) for p > 0 by log-scale rejection under a three-piece hat.

    The variable s = log(x / mode) has log-density
    psi(s) = -sqrt(omega^2 + p^2) (cosh s - 1) + p (s - sinh s) + const,
    omega = sqrt(a b); concavity of psi makes the tangent hat exact.
    """
    lam = p
    omega = math.sqrt(a * b)
    alpha = math.sqrt(omega * omega + lam * lam) - lam
    t, s = _gig_hat_setup(alpha, lam)
    eta = -_gig_psi(t, alpha, lam)
    zeta = -_gig_dpsi(t, alpha, lam)
    theta = -_gig_psi(-s, alpha, lam)
    xi = _gig_dpsi(-s, alpha, lam)
    pp = 1.0 / xi
    rr = 1.0 / zeta
    td = t - rr * eta
    sd = s - pp * theta
    q = td + sd
    for _ in range(10000):
        u = rng.random()
        v = rng.random()
        w = rng.random()
        if u < q / (pp + q + rr):
            rnd = -sd + q * v
        elif u < (q + rr) / (pp + q + rr):
            rnd = td - rr * math.log(v)
        else:
            rnd = -sd + pp * math.log(v)
        if -sd <= rnd <= td:
            hat = 1.0
        elif rnd > td:
            hat = math.exp(-eta - zeta * (rnd - t))
        else:
            hat = math.exp(-theta + xi * (rnd + s))
        if w * hat <= math.exp(_gig_psi(rnd, alpha, lam)):
            mode_scale = lam / omega + math.sqrt(1.0 + (lam / omega) ** 2)
            return math.exp(rnd) * mode_scale * math.sqrt(b / a)
    raise NumericalError(f"GIG rejection failed to accept (p={p}, a={a}, b={b})")


def sample_gig(params: GigParams, rng: np.random.Generator) -> float:
    """One exact GIG(p, a, b) draw; p = 1/2 uses the inverse-Gaussian construction."""
    b = max(params.b, GIG_B_FLOOR)
    if params.p == 0.5:
        return _gig_half(params.a, b, rng)
    if params.p > 0.0:
        return _gig_general(params.p, params.a, b, rng)
    raise ValueError(f"unsupported GIG order p={params.p}")


# ---------------------------------------------------------------------------
# discrete draws
# ---------------------------------------------------------------------------

def sample_geometric(q, rng: np.random.Generator):
    """Draws with P[N = n] = (1 - q) q^n on n = 0, 1, 2, ...; q may be an array."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0.0) | (q >= 1.0)):
        raise ValueError("geometric parameter must lie in [0, 1)")
    draws = rng.geometric(1.0 - q) - 1
    if np.ndim(draws) == 0:
        return int(draws)
    return draws.astype(np.int64)


def sample_log_geometric(ratio: float, rng: np.random.Generator, size=None):
    """Draws with P[N = n] = ratio^n / (n * (-log(1 - ratio))) on n = 1, 2, ...

    This is the logarithmic series distribution, delegated to the generator's
    native implementation.
    """
    if not (0.0 < ratio < 1.0):
        raise ValueError("log-geometric ratio must lie in (0, 1)")
    draws = rng.logseries(ratio, size=size)
    if size is None:
        return int(draws)
    return draws.astype(np.int64)


def sample_grid(log_weights: np.ndarray, rng: np.random.Generator) -> int:
    """Index draw proportional to exp(log_weights), normalized in log space."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty 1-d array")
    finite = lw[np.isfinite(lw)]
    if finite.size == 0:
        raise NumericalError("grid draw: all weights vanish")
    p = np.exp(lw - finite.max())
    total = p.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise NumericalError("grid draw: degenerate weight normalization")
    return int(rng.choice(lw.size, p=p / total))


# ---------------------------------------------------------------------------
# extended gamma rejection
# ---------------------------------------------------------------------------

def sample_extended_gamma(r: float, c: float, rng: np.random.Generator,
                          return_iterations: bool = False):
    """Exact draw from the density proportional to g^(r-1) exp(-g - 2 c sqrt(g)).

    Proposes sqrt(g) ~ Ga(2r, rate d) with d = c + sqrt(c^2 + 4r) and accepts
    with probability exp(-(sqrt(g) - d/2 + c)^2), which is the exact
    target/proposal ratio normalized by its maximum.
    """
    if r <= 0.0 or c < 0.0 or not (math.isfinite(r) and math.isfinite(c)):
        raise ValueError(f"extended gamma requires r > 0 and c >= 0, got r={r}, c={c}")
    d = c + math.sqrt(c * c + 4.0 * r)
    shift = 0.5 * d - c
    for it in range(1, 100000):
        s = rng.gamma(2.0 * r, 1.0 / d)
        if math.log(rng.random()) <= -((s - shift) ** 2):
            g = s * s
            return (g, it) if return_iterations else g
    raise NumericalError(f"extended gamma rejection stalled (r={r}, c={c})")


# ---------------------------------------------------------------------------
# transition draw for the fused shrinkage process
# ---------------------------------------------------------------------------

def invert_weight_cdf(u: float, x_prev: float, w: Weights) -> float:
    """Invert the rescaled-weight distribution: the y in (alpha|x'|, beta|x'|)
    with Q(y) = u, by solving y^-1 e^-y = y0 via safeguarded Newton on z = log y.

    g(z) = z + exp(z) + z0 with z0 = log y0 is increasing; the bracket
    [log(alpha|x'|), log(beta|x'|)] is maintained and any Newton step leaving
    it falls back to bisection.  Tolerance 1e-12, at most 100 iterations.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    a, b = w.alpha, w.beta
    absx = abs(x_prev)
    lo = a * absx
    hi = b * absx
    # z0 = log y0, y0 = (b e^{-lo} (1-u) + u a e^{-hi}) / (a b |x'|), all-positive form
    with np.errstate(divide="ignore"):
        z0 = np.logaddexp(math.log(b) - lo + (math.log1p(-u) if u < 1.0 else -math.inf),
                          (math.log(u * a) if u > 0.0 else -math.inf) - hi)
    z0 = float(z0) - math.log(a * b * absx)
    zl, zh = math.log(lo), math.log(hi)
    z = 0.5 * (zl + zh)
    for _ in range(100):
        g = z + math.exp(z) + z0
        if g == 0.0:
            return math.exp(z)
        if g > 0.0:
            zh = z
        else:
            zl = z
        step = g / (1.0 + math.exp(z))
        z_new = z - step
        if not (zl < z_new < zh):
            z_new = 0.5 * (zl + zh)
        if abs(z_new - z) <= 1e-12 * max(1.0, abs(z)):
            return math.exp(z_new)
        z = z_new
    raise NumericalError(
        f"weight-cdf inversion did not converge: u={u}, x_prev={x_prev}, "
        f"beta={w.beta}, rho={w.rho}"
    )


def sample_prior_transition(x_prev: float, w: Weights, rng: np.random.Generator) -> float:
    """One exact draw from the transition density p(x | x_prev).

    Composition: invert the rescaled-weight cdf for y, map to the shrinkage
    weight wgt = (beta^2 - (y/|x'|)^2) / (beta^2 - alpha^2), draw the latent
    scale z ~ GIG(3/2, (y/x')^2, x'^2) and return N(wgt * x', wgt (1-wgt) z).

    At x_prev = 0 the density collapses exactly to a Laplace with rate
    alpha + beta, which is drawn directly.
    """
    if w.rho == 0.0:
        raise ValueError("transition sampling requires alpha > 0 (rho > 0)")
    if 1.0 - w.rho < 1e-6:
        raise ValueError("transition sampling is not supported for rho this close to 1")
    if not math.isfinite(x_prev):
        raise ValueError("x_prev must be finite")
    a, b = w.alpha, w.beta
    if x_prev == 0.0:
        return rng.laplace(0.0, 1.0 / (a + b))
    y = invert_weight_cdf(rng.random(), x_prev, w)
    hi = b * abs(x_prev)
    lo = a * abs(x_prev)
    wgt = (hi * hi - y * y) / (hi * hi - lo * lo)
    wgt = min(1.0, max(0.0, wgt))
    rate = (y / x_prev) ** 2
    z = _gig_general(1.5, rate, x_prev * x_prev, rng)
    sd = math.sqrt(max(wgt * (1.0 - wgt) * z, 0.0))
    return rng.normal(wgt * x_prev, sd)


def sample_stationary(w: Weights, rng: np.random.Generator) -> float:
    """Exact draw from the stationary density h(x) f(x) / Z by rejection.

    The target is e^{-2 alpha |x|} (1 - (alpha/beta) e^{-(beta-alpha)|x|})
    up to constants; propose Laplace(rate 2 alpha) and accept with the second
    factor.  At equal rates the density is an exact two-component mixture.
    """
    if w.rho == 0.0:
        raise ValueError("stationary sampling requires alpha > 0 (rho > 0)")
    a, b = w.alpha, w.beta
    if w.equal_rates:
        # e^{-2a|x|}(1 + a|x|): mixture 2/3 Laplace(2a), 1/3 sign * Ga(2, 2a)
        if rng.random() < 2.0 / 3.0:
            return rng.laplace(0.0, 0.5 / a)
        mag = rng.gamma(2.0, 0.5 / a)
        return mag if rng.random() < 0.5 else -mag
    d = b - a
    for _ in range(100000):
        x = rng.laplace(0.0, 0.5 / a)
        accept = (d + a * (-math.expm1(-d * abs(x)))) / b
        if rng.random() <= accept:
            return x
    raise NumericalError(f"stationary rejection stalled (beta={b}, rho={w.rho})")
