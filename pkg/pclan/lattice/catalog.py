import json
import math
from typing import NamedTuple

import numpy as np

from pclan.lattice.geometry import Plaquette, Box, enumerate_through, size_counts
from pclan.utils import CutoffTooSmall, TailDivergent, EmptyRegion, PClanException

ANCHOR = Plaquette(0, 0, 0)

# Each step of a closed trail after the first has at most three continuations.
CRUDE_GROWTH = 3.0
BETA_P_BOUND = math.log(CRUDE_GROWTH)


class WeightedCatalog:
    """
    Contours up to a size cutoff, each weighted by exp(-beta * size).

    Parameters
    ----------
    beta : float
           Inverse temperature.
    n_max : int
            Size cutoff.
    entries : list
              `(Contour, weight)` pairs, sorted by contour order.
    counts : dict
             Number of contours through the anchor plaquette for each size, the `a_n` of the lambda sums.
    region : Box, None
             The region the catalog was built for, `None` for the contours through the anchor.
    anchor : Plaquette
    """
    def __init__(self, beta, n_max, entries, counts, region=None, anchor=ANCHOR):
        self.beta = float(beta)
        self.n_max = int(n_max)
        self.entries = list(entries)
        self.counts = dict(counts)
        self.region = region
        self.anchor = anchor
        self.tail_bound = crude_tail_bound(self.beta, self.n_max)
        self._weights = None

    @property
    def contours(self):
        return [g for g, _ in self.entries]

    @property
    def weights(self):
        if self._weights is None:
            self._weights = np.array([w for _, w in self.entries], dtype=float)
        return self._weights

    @property
    def total_rate(self):
        return float(self.weights.sum())

    def owned(self, anchor=None):
        """Entries owned by `anchor` (the contour's smallest plaquette), a partition of the catalog over anchors."""
        anchor = self.anchor if anchor is None else Plaquette(*anchor)
        return [(g, w) for g, w in self.entries if g.owner == anchor]

    def restrict(self, region):
        """Entries whose contours meet the region (a `Box`, a plaquette or a collection of plaquettes)."""
        hits = _region_predicate(region)
        return [(g, w) for g, w in self.entries if any(hits(p) for p in g.plaquettes)]

    def lambda_value(self):
        return sum(n * a * math.exp(-self.beta * n) for n, a in self.counts.items())

    def to_jsonl(self, path):
        with open(path, 'w') as fio:
            fio.write(json.dumps(dict(beta=self.beta, n_max=self.n_max, tail_bound=self.tail_bound,
                                      entries=len(self.entries))) + '\n')
            for g, w in self.entries:
                fio.write(json.dumps(dict(plaquettes=g.to_json(), size=g.size, weight=w)) + '\n')

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _region_predicate(region):
    if isinstance(region, Box):
        return region.__contains__
    if isinstance(region, Plaquette) or (isinstance(region, tuple) and len(region) == 3 and
                                         all(isinstance(c, int) for c in region)):
        target = Plaquette(*region)
        return lambda p: p == target
    members = frozenset(Plaquette(*p) for p in region)
    return members.__contains__


def build_catalog(beta, n_max, region=None, inside=False, anchor=ANCHOR):
    """
    Builds a weighted catalog of contours.

    Parameters
    ----------
    beta : float
           Inverse temperature, must be positive.
    n_max : int
            Size cutoff, at least 4 (the unit square).
    region : Box, None
             When given, the catalog holds every contour meeting the region instead of those through the anchor.
    inside : bool
             With a region, keep only contours lying entirely inside it (the catalog of a finite volume).
    anchor : Plaquette
             The plaquette playing the role of the origin.

    Returns
    -------
    catalog : WeightedCatalog
    """
    if n_max < 4:
        raise CutoffTooSmall("No closed contour has fewer than 4 plaquettes, got n_max={}".format(n_max))
    if beta <= 0:
        raise ValueError("beta must be positive, got {}".format(beta))

    if region is None:
        contours = enumerate_through(anchor, n_max)
    elif inside:
        # Owner-based listing visits each contour once.
        contours = [g for p in region.plaquettes() for g in enumerate_through(p, n_max)
                    if g.owner == p and region.contains_contour(g)]
    else:
        contours = set()
        for p in region.plaquettes():
            contours.update(enumerate_through(p, n_max))
    contours = sorted(contours)
    entries = [(g, math.exp(-beta * g.size)) for g in contours]
    return WeightedCatalog(beta, n_max, entries, size_counts(n_max), region=region, anchor=anchor)


def window_catalog(box: Box, beta, n_max):
    return build_catalog(beta, n_max, region=box, inside=True)


def crude_tail_bound(beta, n_max):
    """
    Upper bound on the sum over even sizes n > n_max of n * 3^n * exp(-beta * n).

    Returns infinity when the ratio 3 exp(-beta) is not below one.
    """
    r = CRUDE_GROWTH * math.exp(-beta)
    if r >= 1:
        return math.inf
    n0 = n_max + 2 - n_max % 2
    q = r * r
    return r ** n0 * (n0 / (1 - q) + 2 * q / (1 - q) ** 2)


class LambdaBeta(NamedTuple):
    value: float
    tail_bound: float

    @property
    def certified(self):
        return math.isfinite(self.tail_bound)

    @property
    def upper(self):
        return self.value + self.tail_bound


def lambda_beta(beta, n_max, strict=False, counts=None):
    """
    Truncated mean branching weight per plaquette, sum over contours through the origin of |g| exp(-beta |g|).

    Parameters
    ----------
    beta : float
    n_max : int
    strict : bool
             Raise `TailDivergent` when the tail cannot be certified, instead of returning an infinite bound.
    counts : dict, optional
             Per-size counts to use instead of the enumeration.

    Returns
    -------
    result : LambdaBeta
             `(value, tail_bound)`; the true value lies in `[value, value + tail_bound]`.
    """
    counts = size_counts(n_max) if counts is None else counts
    value = sum(n * a * math.exp(-beta * n) for n, a in counts.items() if n <= n_max)
    tail = crude_tail_bound(beta, n_max)
    if strict and not math.isfinite(tail):
        raise TailDivergent("Tail not certifiable at beta={:.4f} <= log 3".format(beta))
    return LambdaBeta(value, tail)


class BetaM(NamedTuple):
    lo: float
    hi: float

    @property
    def value(self):
        """The certified threshold used to gate subcritical operations."""
        return self.hi


def _bisect(fn, lo, hi, tol):
    flo = fn(lo)
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def beta_M(d=2, n_max=10, counts=None, tol=1e-10):
    """
    Brackets the inverse temperature where lambda_beta crosses 1/(d-1).

    The lower root uses the truncated value alone, which underestimates lambda. The upper root adds the certified tail,
    which overestimates it, and is the threshold every subcritical operation checks against.

    Returns
    -------
    bracket : BetaM
              `(lo, hi)`
    """
    if d < 2:
        raise ValueError("Dimension must be at least 2, got {}".format(d))
    if counts is None:
        if d != 2:
            raise PClanException("Contour counts are only enumerable in two dimensions, pass counts for d={}".format(d))
        counts = size_counts(n_max)
    target = 1.0 / (d - 1)

    def value_gap(b):
        return lambda_beta(b, n_max, counts=counts).value - target

    def certified_gap(b):
        lb = lambda_beta(b, n_max, counts=counts)
        return (lb.upper if lb.certified else math.inf) - target

    hi_bracket = 50.0
    lo = _bisect(value_gap, 1e-6, hi_bracket, tol)
    hi = _bisect(certified_gap, BETA_P_BOUND + 1e-12, hi_bracket, tol)
    return BetaM(lo, max(lo, hi))


class ReferenceBounds(NamedTuple):
    beta_lm: float
    beta_refined: float
    beta_p_lower: float
    beta_p_bound: float


def reference_bounds(d):
    """
    Closed-form reference thresholds, for display alongside computed ones.

    Returns `64 log d / d`, `6 log d / d`, `log d / (2d)` and the analytic Peierls bound `log 3`.
    """
    if d < 2:
        raise ValueError("Dimension must be at least 2, got {}".format(d))
    ld = math.log(d)
    return ReferenceBounds(64 * ld / d, 6 * ld / d, ld / (2 * d), BETA_P_BOUND)


def total_rate_and_sample(catalog: WeightedCatalog, region, rng: np.random.Generator):
    """
    Total birth rate of the catalog contours meeting `region`, with one contour drawn proportionally to weight.
    """
    entries = catalog.restrict(region)
    if not entries:
        raise EmptyRegion("No catalog contour meets {}".format(region))
    weights = np.array([w for _, w in entries])
    rate = float(weights.sum())
    index = rng.choice(len(entries), p=weights / rate)
    return rate, entries[index][0]


def contour_frequencies(catalog: WeightedCatalog, region, rng: np.random.Generator, draws):
    """Counts of repeated proportional draws, indexed like `catalog.restrict(region)`."""
    entries = catalog.restrict(region)
    if not entries:
        raise EmptyRegion("No catalog contour meets {}".format(region))
    weights = np.array([w for _, w in entries])
    picks = rng.choice(len(entries), size=draws, p=weights / weights.sum())
    return np.bincount(picks, minlength=len(entries)), weights / weights.sum()
