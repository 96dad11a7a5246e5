"""
Branching processes dominating the clans, and the explicit constants derived from them.
"""
import math
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from pclan.lattice.geometry import Contour, size_counts, unit_square
from pclan.lattice.catalog import lambda_beta, beta_M, CRUDE_GROWTH
from pclan.lattice.universe import ContourUniverse
from pclan.utils import PClanException, RadiusExceeded, SubcriticalityViolated, CapExceeded, replica_range, \
    standard_logging

GENERATION_CAP = 10 ** 6


class BranchingSpec:
    """
    Parameters of the dominating branching processes.

    Each individual is a plaquette. Its offspring is `Y = sum over contours g through it of (d-1)|g| X_g`, with the
    `X_g` independent Poisson(exp(-beta |g|)), so the mean offspring is `m = (d-1) lambda_beta`.

    Parameters
    ----------
    beta : float
    d : int
        Dimension, entering through the factor `d - 1`.
    n_max : int
            Size cutoff of the contour counts.
    counts : dict, optional
             Per-size contour counts through a plaquette. Enumerated in two dimensions when omitted.
    """
    def __init__(self, beta, d=2, n_max=10, counts=None):
        if counts is None:
            if d != 2:
                raise PClanException("Contour counts are only enumerable in two dimensions, pass counts for d={}"
                                     .format(d))
            counts = size_counts(n_max)
        self.beta = float(beta)
        self.d = int(d)
        self.n_max = int(n_max)
        self.counts = {n: a for n, a in counts.items() if n <= n_max}
        self.sizes = np.array(sorted(self.counts), dtype=float)
        self.multiplicities = np.array([self.counts[n] for n in sorted(self.counts)], dtype=float)
        self.size_weights = self.multiplicities * np.exp(-self.beta * self.sizes)
        self.lam = lambda_beta(self.beta, self.n_max, counts=self.counts)
        self._beta_m = None
        self._kernel = None

    @property
    def mean_offspring(self):
        return (self.d - 1) * self.lam.value

    @property
    def beta_m(self):
        if self._beta_m is None:
            self._beta_m = beta_M(self.d, self.n_max, counts=self.counts)
        return self._beta_m

    @property
    def subcritical(self):
        return self.beta > self.beta_m.hi

    def require_subcritical(self, allow_supercritical=False):
        if not self.subcritical and not allow_supercritical:
            raise SubcriticalityViolated("beta={:.4f} does not exceed the certified threshold {:.4f}".format(
                self.beta, self.beta_m.hi))

    def with_cutoff(self, n_max):
        return BranchingSpec(self.beta, self.d, n_max, counts=None if self.d == 2 else self.counts)

    @property
    def kernel(self):
        if self._kernel is None:
            self._kernel = OffspringKernel(ContourUniverse(self.beta, self.n_max))
        return self._kernel

    def __repr__(self):
        return "BranchingSpec(beta={}, d={}, n_max={})".format(self.beta, self.d, self.n_max)


class FValue(NamedTuple):
    value: float
    error_bound: float


def _tail_sum(spec: BranchingSpec, a):
    r = CRUDE_GROWTH * math.exp(-spec.beta) * a ** (spec.d - 1)
    if r >= 1:
        return math.inf
    n0 = spec.n_max + 2 - spec.n_max % 2
    return r ** n0 / (1 - r * r)


def f_gen(a, spec: BranchingSpec, strict=False):
    """
    Offspring generating function `f(a) = exp(sum over g through 0 of exp(-beta |g|) (a^((d-1)|g|) - 1))`.

    Parameters
    ----------
    a : float
        Non-negative argument.
    spec : BranchingSpec
    strict : bool
             Raise `RadiusExceeded` when the truncation error cannot be certified at `a`.

    Returns
    -------
    result : FValue
             Truncated value and a bound on its distance to the untruncated value (possibly infinite).
    """
    if a < 0:
        raise ValueError("Generating function argument must be non-negative, got {}".format(a))
    exponent = float(np.dot(spec.size_weights, a ** ((spec.d - 1) * spec.sizes) - 1))
    value = math.exp(exponent)
    tail = max(_tail_sum(spec, max(a, 1.0)), _tail_sum(spec, 1.0))
    if strict and not math.isfinite(tail):
        raise RadiusExceeded("a={:.4f} is beyond the certified radius {:.4f}".format(a, certified_radius(spec)))
    return FValue(value, value * math.expm1(tail) if math.isfinite(tail) else math.inf)


def f_prime(a, spec: BranchingSpec):
    k = (spec.d - 1) * spec.sizes
    return f_gen(a, spec).value * float(np.dot(spec.size_weights * k, a ** (k - 1)))


def certified_radius(spec: BranchingSpec):
    return math.exp((spec.beta - math.log(CRUDE_GROWTH)) / (spec.d - 1))


class CriticalPoints(NamedTuple):
    a_bar: float
    b_bar: float


def closed_form_a_bar(spec: BranchingSpec):
    return math.exp((spec.beta - spec.beta_m.lo) / (spec.d - 1))


def critical_points(spec: BranchingSpec, allow_supercritical=False):
    """
    The point `a_bar` where `(d-1) sum |g| exp(-beta |g|) a^((d-1)|g|)` reaches one, and `b_bar = a_bar / f(a_bar)`,
    the radius of convergence of the total-progeny transform.

    Returns
    -------
    points : CriticalPoints
    """
    spec.require_subcritical(allow_supercritical)
    target = 1.0 / (spec.d - 1)
    k = (spec.d - 1) * spec.sizes

    def gap(a):
        return float(np.dot(spec.size_weights * spec.sizes, a ** k)) - target

    if gap(1.0) >= 0:
        raise SubcriticalityViolated("Truncated mean offspring {:.4f} is not below one".format(spec.mean_offspring))
    hi = 2.0
    while gap(hi) <= 0:
        hi *= 2
    a_bar = brentq(gap, 1.0, hi, xtol=1e-14, rtol=1e-14)
    return CriticalPoints(a_bar, a_bar / f_gen(a_bar, spec).value)


class RateBundle(NamedTuple):
    """
    Constants of the exponential bounds.

    `M2` is the total-progeny transform at `b_bar`, which equals `a_bar`; `M2_simulated` is its Monte Carlo estimate.
    """
    M2: float
    M3: float
    time_exponent: float
    M0: float
    a_bar: float
    b_bar: float
    M2_simulated: float


def rate_bundle(spec: BranchingSpec, rng: np.random.Generator = None, replicas=10 ** 5, allow_supercritical=False,
                verbose=False):
    """
    Parameters
    ----------
    spec : BranchingSpec
    rng : np.random.Generator, optional
          When given, `M2` is also estimated by simulating `replicas` total progenies.
    replicas : int
    allow_supercritical : bool
    verbose : bool

    Returns
    -------
    bundle : RateBundle
    """
    a_bar, b_bar = critical_points(spec, allow_supercritical)
    m = spec.mean_offspring
    simulated = math.nan
    if rng is not None:
        progeny, _ = sample_total_progeny(spec, replicas, rng, verbose=verbose)
        simulated = total_progeny_transform(b_bar, progeny)
    return RateBundle(M2=a_bar, M3=math.log(b_bar), time_exponent=1 - m, M0=(1 - m) / (2 - m), a_bar=a_bar,
                      b_bar=b_bar, M2_simulated=simulated)


def simulate_gw(spec: BranchingSpec, rng: np.random.Generator, cap=GENERATION_CAP):
    """
    Total progeny of the plaquette Galton-Watson process started from one individual.

    A generation of `z` individuals has offspring `sum over sizes n of (d-1) n Poisson(z a_n exp(-beta n))`, the
    superposition of the individual offspring laws.
    """
    step = (spec.d - 1) * spec.sizes.astype(int)
    z = 1
    total = 1
    generations = 0
    while z > 0:
        z = int(np.dot(rng.poisson(z * spec.size_weights), step))
        total += z
        generations += 1
        if total > cap:
            raise CapExceeded("Galton-Watson progeny exceeded {}".format(cap), size=total, depth=generations)
    return total


def sample_total_progeny(spec: BranchingSpec, replicas, rng: np.random.Generator, cap=GENERATION_CAP,
                         verbose=False):
    """
    Independent total progenies. Capped replicas are dropped and counted.

    Returns
    -------
    progeny : np.ndarray
    capped : int
    """
    out = []
    capped = 0
    for _ in replica_range(replicas, 'Galton-Watson', verbose):
        try:
            out.append(simulate_gw(spec, rng, cap))
        except CapExceeded:
            capped += 1
    if capped and verbose:
        standard_logging(dict(capped=capped, replicas=replicas), "Galton-Watson cap reached:")
    return np.array(out, dtype=float), capped


def total_progeny_transform(b, progeny):
    """Monte Carlo estimate of `F(b) = E[b^Z]`."""
    progeny = np.asarray(progeny, dtype=float)
    return float(np.mean(np.exp(progeny * math.log(b))))


def fixed_point_residual(b, F, spec: BranchingSpec):
    """`|F - b f(F)|`, zero for the exact total-progeny transform."""
    return abs(F - b * f_gen(F, spec).value)


class OffspringKernel:
    """
    Offspring of the multitype branching process: an individual of type `g` leaves Poisson(exp(-beta |t|)) children
    of every type `t` incompatible with `g`. Types are contours up to translation.

    Parameters
    ----------
    universe : ContourUniverse
               Lattice universe giving incompatibility and weights.
    """
    def __init__(self, universe: ContourUniverse):
        self.universe = universe
        self._memo = dict()

    def __call__(self, shape: Contour):
        if shape not in self._memo:
            children = self.universe.incompatible_with(shape)
            self._memo[shape] = ([t.normalized() for t in children], self.universe.weights(children))
        return self._memo[shape]

    def mean_offspring(self, shape: Contour):
        return float(self(shape.normalized())[1].sum())

    def mean_offspring_plaquettes(self, shape: Contour):
        children, weights = self(shape.normalized())
        return float(np.dot([t.size for t in children], weights))


class PopulationPath:
    """Population size after each death event of a multitype branching run."""
    def __init__(self, times, sizes, horizon):
        self.times = np.asarray(times, dtype=float)
        self.sizes = np.asarray(sizes, dtype=int)
        self.horizon = horizon

    @property
    def extinction_time(self):
        if self.sizes[-1] == 0:
            return float(self.times[-1])
        return math.inf

    def size_at(self, t):
        i = np.searchsorted(self.times, t, side='right') - 1
        return int(self.sizes[max(i, 0)])

    def alive_at(self, t):
        return self.size_at(t) > 0


def simulate_multitype(spec: BranchingSpec, gamma0: Contour, horizon, rng: np.random.Generator, kernel=None,
                       cap=GENERATION_CAP):
    """
    Continuous-time multitype branching: every individual lives an Exp(1) time, then is replaced by its offspring.

    Parameters
    ----------
    spec : BranchingSpec
    gamma0 : Contour
             Type of the single initial individual.
    horizon : float
              Simulation stops at this time.
    rng : np.random.Generator
    kernel : callable, optional
             Maps a type to `(children types, Poisson means)`. Defaults to the incompatibility kernel of `spec`.
    cap : int
          Maximum population.

    Returns
    -------
    path : PopulationPath
    """
    kernel = spec.kernel if kernel is None else kernel
    population = [gamma0.normalized()]
    t = 0.0
    times, sizes = [0.0], [1]
    while population:
        t += rng.exponential(1.0 / len(population))
        if t > horizon:
            break
        i = int(rng.integers(len(population)))
        population[i], population[-1] = population[-1], population[i]
        children, means = kernel(population.pop())
        if len(children):
            total = means.sum()
            n = rng.poisson(total)
            if n:
                population.extend(children[j] for j in rng.choice(len(children), size=n, p=means / total))
        if len(population) > cap:
            raise CapExceeded("Multitype population exceeded {}".format(cap), size=len(population))
        times.append(t)
        sizes.append(len(population))
    return PopulationPath(times, sizes, horizon)


def survival_envelope(spec: BranchingSpec, t):
    return np.exp((spec.mean_offspring - 1) * np.asarray(t, dtype=float))


def survival_curve(spec: BranchingSpec, grid, replicas, rng: np.random.Generator, gamma0=None, kernel=None,
                   verbose=False):
    """Empirical probability that the multitype population started from `gamma0` is alive at each grid time."""
    gamma0 = unit_square() if gamma0 is None else gamma0
    grid = np.asarray(grid, dtype=float)
    alive = np.zeros(len(grid))
    for _ in replica_range(replicas, 'Multitype', verbose):
        path = simulate_multitype(spec, gamma0, grid.max(), rng, kernel=kernel)
        alive += [path.alive_at(t) for t in grid]
    return alive / replicas


def truncation_bias(spec: BranchingSpec, grid, replicas, rng: np.random.Generator):
    """Difference of survival curves at cutoffs `n_max` and `n_max - 2`."""
    coarse = spec.with_cutoff(spec.n_max - 2)
    return survival_curve(spec, grid, replicas, rng) - survival_curve(coarse, grid, replicas, rng)


def certified_margin(M2, M3, support_size=1, tol=1e-3):
    """Smallest distance to the complement of a volume making the finite-volume envelope smaller than `tol`."""
    if M3 <= 0:
        return math.inf
    return max(0, math.ceil(math.log(support_size * M2 / tol) / M3))


def volume_envelope(M2, M3, distances):
    """`M2 * sum exp(-M3 d)` over the distances of the observable's support to the complement of the volume."""
    return float(M2 * np.sum(np.exp(-M3 * np.asarray(distances, dtype=float))))


def clustering_envelope(M2, M3, distances):
    """`2 M2^2 * sum |x - y| exp(-M3 |x - y|)` over pairs of support points at the given distances."""
    r = np.asarray(distances, dtype=float)
    return float(2 * M2 ** 2 * np.sum(r * np.exp(-M3 * r)))
