"""Shared test helpers: empirical-vs-exact distribution comparisons."""

import numpy as np
from scipy import integrate, stats


def ks_statistic(sample, cdf):
    """Kolmogorov-Smirnov distance between a sample and a callable CDF."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return max(upper, lower)


def numeric_cdf(density, lo, hi, n=200_001, log_spaced=False):
    """Tabulated CDF of an unnormalized density on [lo, hi] as an interpolant."""
    if log_spaced:
        grid = np.exp(np.linspace(np.log(lo), np.log(hi), n))
    else:
        grid = np.linspace(lo, hi, n)
    dens = np.asarray([density(g) for g in grid])
    cum = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cum /= cum[-1]

    def cdf(x):
        return np.interp(x, grid, cum, left=0.0, right=1.0)

    return cdf


def chi2_pvalue(counts, probs):
    """Chi-square goodness-of-fit p-value, pooling cells with expectation < 5."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    expected = np.asarray(probs, dtype=float) * n
    keep = expected >= 5.0
    obs = list(counts[keep])
    exp = list(expected[keep])
    if not np.all(keep):
        obs.append(counts[~keep].sum())
        exp.append(expected[~keep].sum())
    obs = np.asarray(obs)
    exp = np.asarray(exp)
    # guard: the pooled tail can still be tiny
    mask = exp > 0
    stat = np.sum((obs[mask] - exp[mask]) ** 2 / exp[mask])
    dof = mask.sum() - 1
    return float(stats.chi2.sf(stat, dof))
