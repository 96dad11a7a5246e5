"""
Statistical comparisons between samples and exact or bounding laws.
"""
import functools
import warnings
from collections import Counter

import numpy as np
from scipy import stats


def quiet(func):
    """Silences numerical warnings raised on empty or degenerate inputs (logs of zero, empty means)."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with np.errstate(divide='ignore', invalid='ignore'):
                return func(*args, **kwargs)
    return wrapper


def empirical_frequencies(samples):
    """Relative frequency of each distinct sample (samples must be hashable)."""
    counts = Counter(samples)
    n = sum(counts.values())
    return {k: v / n for k, v in counts.items()}


def tv_distance(samples, exact: dict):
    """
    Total variation distance between the empirical law of `samples` and an exact probability table.

    Parameters
    ----------
    samples : iterable
              Hashable draws.
    exact : dict
            Maps each outcome to its probability. Outcomes missing from it have probability zero.

    Returns
    -------
    distance : float
    """
    freq = empirical_frequencies(samples)
    keys = set(freq) | set(exact)
    return 0.5 * sum(abs(freq.get(k, 0.0) - exact.get(k, 0.0)) for k in keys)


def standard_errors(samples, exact: dict):
    """
    For every outcome of the exact table, `(observed frequency - p) / sqrt(p (1 - p) / n)`.
    """
    counts = Counter(samples)
    n = sum(counts.values())
    out = dict()
    for k, p in exact.items():
        sd = np.sqrt(p * (1 - p) / n) if 0 < p < 1 else 0.0
        diff = counts.get(k, 0) / n - p
        out[k] = diff / sd if sd > 0 else (0.0 if diff == 0 else np.inf)
    return out


def z_exceedances(z_scores, k=3.0):
    """
    How many `|z|` exceed `k`, with the largest such count that independent standard normal scores reach within a
    k-sigma band.

    Returns
    -------
    exceeding : int
    allowance : float
    """
    z = np.abs(np.asarray(list(z_scores), dtype=float))
    expected = len(z) * 2 * stats.norm.sf(k)
    return int((z > k).sum()), float(expected + k * np.sqrt(expected) + 1)


def chi_square_pvalue(observed, expected_probabilities, min_expected=5.0):
    """
    Pearson goodness of fit, pooling cells whose expected count is below `min_expected` into one.
    """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected_probabilities, dtype=float) * observed.sum()
    small = expected < min_expected
    if small.any():
        observed = np.append(observed[~small], observed[small].sum())
        expected = np.append(expected[~small], expected[small].sum())
        if expected[-1] == 0:
            observed, expected = observed[:-1], expected[:-1]
    if len(observed) < 2:
        return 1.0
    return float(stats.chisquare(observed, expected).pvalue)


def within_sigma(observed_mean, expected_mean, sd, n, k=3.0):
    return abs(observed_mean - expected_mean) <= k * sd / np.sqrt(n)


@quiet
def survival(samples, grid):
    """Empirical P(X > g) for every g of the grid."""
    samples = np.sort(np.asarray(samples, dtype=float))
    grid = np.asarray(grid, dtype=float)
    return 1.0 - np.searchsorted(samples, grid, side='right') / max(len(samples), 1)


def binomial_band(p, n, k=3.0):
    """Half-width of a k-sigma band around an empirical proportion, with a floor for proportions near zero."""
    p = np.asarray(p, dtype=float)
    return k * np.sqrt(np.maximum(p * (1 - p), 1.0 / max(n, 1)) / max(n, 1))


@quiet
def fit_exponential_rate(grid, values, floor=0.0):
    """
    Least-squares slope of `-log(values)` against `grid`, over points where values exceed `floor`.

    Returns `nan` when fewer than two points qualify.
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > floor
    if keep.sum() < 2:
        return np.nan
    slope, _ = np.polyfit(grid[keep], np.log(values[keep]), 1)
    return float(-slope)


def dominance_violations(dominated, dominating, grid, k=3.0):
    """
    Points of `grid` where the survival function of `dominated` exceeds that of `dominating` by more than a k-sigma
    Monte Carlo band.
    """
    s_low = survival(dominated, grid)
    s_high = survival(dominating, grid)
    band = binomial_band(s_low, len(dominated), k) + binomial_band(s_high, len(dominating), k)
    return [float(g) for g, a, b, e in zip(grid, s_low, s_high, band) if a > b + e]


def envelope_violations(samples, grid, envelope, k=3.0):
    """Points where the empirical survival function exceeds `envelope(g)` beyond a k-sigma band."""
    s = survival(samples, grid)
    band = binomial_band(s, len(samples), k)
    return [float(g) for g, a, e in zip(grid, s, band) if a > envelope(g) + e]


def ks_normal(values, variance):
    """KS distance of `values` to a centred normal law with the given variance."""
    return float(stats.kstest(np.asarray(values, dtype=float), 'norm', args=(0.0, np.sqrt(variance))).statistic)


def ks_exponential(values, rate=1.0):
    return float(stats.kstest(np.asarray(values, dtype=float), 'expon', args=(0.0, 1.0 / rate)).statistic)


def ks_exponential_pvalue(values, rate=1.0):
    return float(stats.kstest(np.asarray(values, dtype=float), 'expon', args=(0.0, 1.0 / rate)).pvalue)


def dispersion(counts):
    """Variance to mean ratio of counts, with the Poisson dispersion test p-value."""
    counts = np.asarray(counts, dtype=float)
    mean = counts.mean()
    if mean == 0:
        return np.nan, np.nan
    ratio = counts.var(ddof=1) / mean
    statistic = (len(counts) - 1) * ratio
    p = 2 * min(stats.chi2.cdf(statistic, len(counts) - 1), stats.chi2.sf(statistic, len(counts) - 1))
    return float(ratio), float(p)
