"""
Statistical experiments checking the samplers against the explicit exponential bounds.

Every run takes a :class:`RunConfig`, reads its constants from :mod:`pclan.processes.bounds` only, and returns a
:class:`Report` with its rows, summary values and named acceptance checks.
"""
import math
from collections import Counter
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from pclan.configuratron.config import RunConfig, ExperimentConfig
from pclan.lattice.geometry import Box, Plaquette, unit_square, plaquette_distance
from pclan.lattice.catalog import ANCHOR, window_catalog
from pclan.lattice.universe import ContourUniverse
from pclan.processes.bounds import BranchingSpec, rate_bundle, sample_total_progeny, volume_envelope, \
    clustering_envelope, certified_margin, truncation_bias
from pclan.processes.forward import couple, generate_marks, packed_configuration, long_run_states
from pclan.processes.clan import PerfectSampler, clan_stats, sharing_probability
from pclan.metrics import oracle
from pclan.metrics.base import fit_exponential_rate, survival, dominance_violations, envelope_violations, ks_normal, \
    ks_exponential, dispersion, tv_distance, standard_errors, z_exceedances, chi_square_pvalue
from pclan.experiments.reporting import Report
from pclan.utils import derive_rng, replica_range, DegenerateVariance, PClanConfigException, TooFewContours

_RARE = 'rare'


def branching_constants(cfg: RunConfig, beta):
    spec = BranchingSpec(beta, cfg.d, cfg.bounds_n_max)
    return spec, rate_bundle(spec)


def inflated(box: Box, margin):
    return Box(box.width + 2 * margin, box.height + 2 * margin, box.x0 - margin, box.y0 - margin)


def support_weight(box: Box, support, M3):
    """`sum exp(-M3 d)` over the support plaquettes, `d` being their distance to the complement of `box`."""
    return float(np.sum(np.exp(-M3 * np.array([box.distance_to_complement(p) for p in support], dtype=float))))


def box_weight(box: Box, M3):
    """
    Upper bound on :func:`support_weight` for an observable supported on the whole box: each distance `k >= 0` is
    shared by at most `4 (width + height + 2)` plaquettes.
    """
    return 4 * (box.width + box.height + 2) / (1 - math.exp(-M3))


def bound_columns(cfg: RunConfig, spec: BranchingSpec, bundle, weight=1.0):
    """
    Certified margin for an observable of the given support weight, and the largest survival-curve change when the
    cutoff of the branching constants drops by two.
    """
    rng = derive_rng(cfg.seed, '{}/bias/{}'.format(cfg.name, spec.beta))
    bias = truncation_bias(spec, np.linspace(0.0, cfg.bias_horizon, 7), cfg.bias_replicas, rng)
    return dict(certified_margin=certified_margin(bundle.M2, bundle.M3, weight, cfg.margin_tol),
                truncation_bias=float(np.abs(bias).max()))


def sampling_box(cfg: RunConfig, box: Box, bounds, report: Report):
    """The box perfect samples are drawn on: `box` grown by the certified margin when `inflate` is set."""
    margin = bounds['certified_margin']
    if not cfg.inflate:
        return box
    report.check('margin_finite', report.checks.get('margin_finite', True) and math.isfinite(margin))
    return inflated(box, margin) if math.isfinite(margin) else box


def centred_box(width):
    """Square box of `width` cells whose central cell (for odd widths) has lower-left vertex at the origin."""
    return Box(width, width, -(width // 2), -(width // 2))


def square_presence(gamma):
    return lambda config: gamma in config


def pooled_z_scores(samples, exact: dict, min_expected):
    """
    Per-configuration z-scores over the configurations expected at least `min_expected` times, the remaining
    probability mass pooled into one extra cell.
    """
    n = len(samples)
    table = {k: p for k, p in exact.items() if p * n >= min_expected}
    rare = 1.0 - sum(table.values())
    if rare > 0:
        table[_RARE] = rare
    return standard_errors([s if s in table else _RARE for s in samples], table)


def equivalence_row(report: Report, cfg: RunConfig, source, samples, exact: dict):
    """Adds one row comparing `samples` with the exact table, and the checks that go with it."""
    counts = Counter(samples)
    keys = list(exact)
    z = pooled_z_scores(samples, exact, cfg.min_expected)
    exceeding, allowance = z_exceedances(z.values(), cfg.sigmas)
    tv = tv_distance(samples, exact)
    unexpected = sum(v for k, v in counts.items() if k not in exact)
    report.add_row(source=source, samples=len(samples), tv=tv,
                   chi_square_p=chi_square_pvalue([counts.get(k, 0) for k in keys], [exact[k] for k in keys]),
                   cells=len(z), max_abs_z=float(max((abs(v) for v in z.values()), default=0.0)),
                   exceeding=exceeding, allowance=allowance, unexpected=unexpected)
    report.check(source + '_tv', tv <= cfg.tv)
    report.check(source + '_z_scores', exceeding <= allowance)
    report.check(source + '_support', unexpected == 0)


def run_oracle_equivalence(cfg: RunConfig):
    """
    Samples of the perfect sampler and of one long forward run against the exact table of a small box: total
    variation, per-configuration z-scores and detailed balance of the generator.
    """
    report = Report('oracle_equivalence', cfg.as_dict(), cfg.seed)
    box = Box(cfg.box)
    measure = oracle.measure(box, cfg.beta, cfg.n_max)
    exact = measure.as_dict()
    report.note(configurations=len(measure), contours=len(measure.contours),
                partition_function=measure.partition_function)

    for source in cfg.samplers:
        if source == 'perfect':
            sampler = PerfectSampler(box, cfg.beta, cfg.n_max)
            samples = [sampler.sample(derive_rng(cfg.seed, 'oracle_equivalence/perfect', r))
                       for r in replica_range(cfg.samples, 'Perfect', cfg.verbose)]
        elif source == 'forward':
            samples = long_run_states(window_catalog(box, cfg.beta, cfg.n_max), box, cfg.epochs,
                                      derive_rng(cfg.seed, 'oracle_equivalence/forward'), spacing=cfg.spacing,
                                      burn_in=cfg.burn_in)
        else:
            raise PClanConfigException("Unknown sampler `{}`, expected `perfect` or `forward`".format(source))
        equivalence_row(report, cfg, source, samples, exact)

    pairs = oracle.detailed_balance_pairs(oracle.measure(Box(cfg.balance_box), cfg.beta, cfg.n_max))
    error = max((abs(a - b) / max(a, b) for _, _, a, b in pairs), default=0.0)
    report.note(balance_pairs=len(pairs), balance_error=error)
    report.check('detailed_balance', error <= cfg.balance_tolerance)
    return report


def run_convergence(cfg: RunConfig):
    """
    Couples a packed start with the empty start on one set of marks and fits the decay rate of the mean discrepancy.
    """
    report = Report('r2', cfg.as_dict(), cfg.seed)
    spec, bundle = branching_constants(cfg, cfg.beta)
    bounds = bound_columns(cfg, spec, bundle)
    box = Box(cfg.box)
    catalog = window_catalog(box, cfg.beta, cfg.n_max)
    full = packed_configuration(catalog.contours)
    grid = np.arange(0.0, cfg.t_end + cfg.step / 2, cfg.step)

    gaps = np.zeros((cfg.replicas, len(grid)))
    coalescence = np.zeros(cfg.replicas)
    for r in replica_range(cfg.replicas, 'R2', cfg.verbose):
        rng = derive_rng(cfg.seed, 'r2', r)
        coupling = couple(full, (), generate_marks(catalog, box, cfg.t_end, rng), rng=rng)
        gaps[r] = coupling.discrepancy(grid)
        coalescence[r] = coupling.coalescence_time()

    mean = gaps.mean(axis=0)
    for t, m in zip(grid, mean):
        report.add_row(t=t, mean_discrepancy=m, envelope=len(full) * math.exp(-bundle.M0 * t), **bounds)
    rate = fit_exponential_rate(grid, mean)
    finished = np.isfinite(coalescence)
    report.note(fitted_rate=rate, M0=bundle.M0, start_size=len(full), coalesced=int(finished.sum()),
                mean_coalescence=float(coalescence[finished].mean()) if finished.any() else math.inf)
    report.check('rate_exceeds_M0', rate >= bundle.M0 - cfg.tolerance)
    report.check('initial_discrepancy', (gaps[:, 0] == len(full)).all())
    report.check('zero_after_coalescence', all((gaps[r][grid >= coalescence[r]] == 0).all()
                                               for r in range(cfg.replicas)))
    return report


def run_volume_effect(cfg: RunConfig):
    """
    Exact presence probability of the unit square at the origin in nested centred boxes, compared with the
    finite-volume envelope of the inner box.
    """
    report = Report('r3', cfg.as_dict(), cfg.seed)
    spec, bundle = branching_constants(cfg, cfg.beta)
    target = unit_square()
    bounds = bound_columns(cfg, spec, bundle, support_weight(centred_box(min(cfg.boxes)), target, bundle.M3))
    widths = sorted(cfg.boxes)
    values = [oracle.measure(centred_box(w), cfg.beta, cfg.n_max).marginal(target) for w in widths]

    gaps, half_widths, below = [], [], []
    for inner, outer, v_in, v_out in zip(widths, widths[1:], values, values[1:]):
        box = centred_box(inner)
        envelope = volume_envelope(bundle.M2, bundle.M3, [box.distance_to_complement(p) for p in target])
        gap = abs(v_in - v_out)
        report.add_row(inner=inner, outer=outer, half_width=inner // 2, inner_value=v_in, outer_value=v_out,
                       gap=gap, envelope=envelope, **bounds)
        gaps.append(gap)
        half_widths.append(inner // 2)
        below.append(gap <= envelope)

    rate = fit_exponential_rate(half_widths, gaps)
    report.note(fitted_rate=rate, M2=bundle.M2, M3=bundle.M3)
    report.check('below_envelope', all(below))
    report.check('gaps_decrease', all(np.diff(gaps) <= 0))
    if np.isfinite(rate):
        report.check('rate_exceeds_M3', rate >= bundle.M3 - cfg.tolerance)
    return report


def _pair_envelope(bundle, f_support, g_support):
    return clustering_envelope(bundle.M2, bundle.M3, [plaquette_distance(p, q) for p in f_support for q in g_support])

def run_clustering(cfg: RunConfig):
    """
    Two-point covariances of square-presence indicators: exact along a one-cell strip, and from perfect samples on a
    square box, against the clustering envelope. With `inflate`, perfect samples are drawn on the box grown by the
    certified margin of the sampled squares and read on the box itself.
    """
    report = Report('r4', cfg.as_dict(), cfg.seed)
    spec, bundle = branching_constants(cfg, cfg.beta)
    box = Box(cfg.box)
    y = cfg.box // 2
    left = unit_square(0, y)
    rights = [unit_square(r, y) for r in range(1, min(cfg.distance, cfg.box - 1) + 1)]
    support = set(left).union(*rights)
    bounds = bound_columns(cfg, spec, bundle, support_weight(box, support, bundle.M3))

    strip = oracle.measure(Box(cfg.strip, 1), cfg.beta, cfg.n_max)
    origin = unit_square(0, 0)
    distances, covariances, below = [], [], []
    for r in range(1, cfg.strip):
        other = unit_square(r, 0)
        cov = oracle.covariance(strip, square_presence(origin), square_presence(other))
        envelope = _pair_envelope(bundle, origin, other)
        report.add_row(source='exact', distance=r, covariance=cov, standard_error=0.0, envelope=envelope, **bounds)
        distances.append(r)
        covariances.append(abs(cov))
        below.append(abs(cov) <= envelope)
    rate = fit_exponential_rate(distances, covariances)

    sampled = sampling_box(cfg, box, bounds, report)
    sampler = PerfectSampler(sampled, cfg.beta, cfg.n_max)
    samples = [sampler.sample(derive_rng(cfg.seed, 'r4', r)) for r in replica_range(cfg.replicas, 'R4', cfg.verbose)]
    f = np.array([left in s for s in samples], dtype=float)
    for r, right in enumerate(rights, start=1):
        g = np.array([right in s for s in samples], dtype=float)
        products = (f - f.mean()) * (g - g.mean())
        cov = float(products.mean())
        se = float(products.std(ddof=1) / math.sqrt(len(products)))
        envelope = _pair_envelope(bundle, left, right)
        report.add_row(source='perfect', distance=r, covariance=cov, standard_error=se, envelope=envelope, **bounds)
        below.append(abs(cov) <= envelope + cfg.sigmas * se)

    report.note(fitted_rate=rate, M2=bundle.M2, M3=bundle.M3, presence=float(f.mean()), sampled_box=sampled.width)
    report.check('below_envelope', all(below))
    report.check('rate_exceeds_M3', np.isfinite(rate) and rate >= bundle.M3 - cfg.tolerance)
    return report


def square_occupancy(config, box: Box):
    """Indicator of a unit square on each cell of the box, ignoring contours outside it."""
    grid = np.zeros((box.width, box.height))
    for g in config:
        if g.size == 4 and box.contains_contour(g):
            x0, y0, _, _ = g.bounding_box()
            grid[x0 - box.x0, y0 - box.y0] = 1.0
    return grid


def _overlap(n, shift):
    return slice(max(0, -shift), n - max(0, shift)), slice(max(0, shift), n - max(0, -shift))


def asymptotic_variance(fields, mean, radius):
    """
    Sum of empirical covariances `cov(f, f shifted by x)` over shifts with `|x|_inf <= radius`, averaged over positions
    and replicas.

    Parameters
    ----------
    fields : np.ndarray
             `(replicas, width, height)` observable values.
    mean : float
           Estimated mean of the observable.
    radius : int
             Truncation radius.
    """
    centred = fields - mean
    _, w, h = centred.shape
    total = 0.0
    for dx in range(-radius, radius + 1):
        ax, bx = _overlap(w, dx)
        for dy in range(-radius, radius + 1):
            ay, by = _overlap(h, dy)
            total += float(np.mean(centred[:, ax, ay] * centred[:, bx, by]))
    if not total > 0:
        raise DegenerateVariance("Estimated asymptotic variance {} is not positive at radius {}".format(total, radius))
    return total


def run_clt(cfg: RunConfig):
    """
    Standardized sums of the centred unit-square indicator over a box, compared with the normal law of the estimated
    asymptotic variance.
    """
    report = Report('r5', cfg.as_dict(), cfg.seed)
    box = Box(cfg.box)
    spec, bundle = branching_constants(cfg, cfg.beta)
    bounds = bound_columns(cfg, spec, bundle, box_weight(box, bundle.M3))
    sampled = sampling_box(cfg, box, bounds, report)
    sampler = PerfectSampler(sampled, cfg.beta, cfg.n_max)
    fields = np.array([square_occupancy(sampler.sample(derive_rng(cfg.seed, 'r5', r)), box)
                       for r in replica_range(cfg.replicas, 'R5', cfg.verbose)])
    mean = float(fields.mean())
    sums = (fields - mean).sum(axis=(1, 2)) / math.sqrt(box.cells)
    report.note(mean=mean, sample_variance=float(sums.var(ddof=1)), sampled_box=sampled.width)

    try:
        variance = asymptotic_variance(fields, mean, cfg.radius)
        doubled = asymptotic_variance(fields, mean, 2 * cfg.radius)
    except DegenerateVariance as e:
        report.add_row(radius=cfg.radius, variance=math.nan, **bounds)
        report.note(degenerate=str(e))
        report.check('positive_variance', False)
        return report

    change = abs(doubled - variance) / variance
    ks = ks_normal(sums, variance)
    for radius, value in ((cfg.radius, variance), (2 * cfg.radius, doubled)):
        report.add_row(radius=radius, variance=value, **bounds)
    report.note(variance=variance, relative_change=change, ks=ks)
    report.check('positive_variance', True)
    report.check('variance_stable', change < cfg.stability)
    report.check('ks_normal', ks <= cfg.ks)
    return report


class PoissonRescaling(NamedTuple):
    """
    Space rescaling under which size-`size` contours at inverse temperature `beta` have unit intensity: lengths are
    divided by `exp(beta size / d)`, so volumes shrink by `exp(beta size)`.
    """
    beta: float
    size: int = 4
    d: int = 2

    @property
    def factor(self):
        return math.exp(self.beta * self.size)

    @property
    def linear(self):
        return self.factor ** (1.0 / self.d)

    def rescale(self, points):
        return np.asarray(points, dtype=float) / self.linear

    def window(self, expected, blocks):
        """Square box expected to hold about `expected` size-`size` contours, with a side divisible by `blocks`."""
        side = math.ceil(math.sqrt(expected * self.factor))
        return Box(blocks * math.ceil(side / blocks))

    def rescaled_side(self, box: Box):
        return box.width / self.linear


def contour_centres(config, box: Box, size):
    """Bounding-box centres of the size-`size` contours inside `box`, relative to its lower-left vertex."""
    out = [((x0 + x1) / 2 - box.x0, (y0 + y1) / 2 - box.y0)
           for x0, y0, x1, y1 in (g.bounding_box() for g in config if g.size == size and box.contains_contour(g))]
    return np.array(out, dtype=float).reshape(-1, 2)


def nearest_neighbour_statistic(points, side, guard=None):
    """
    `pi * intensity * r^2` for each point's nearest-neighbour distance `r`, over points at least `guard` from the border
    (three mean spacings by default). Exp(1) distributed for a planar Poisson process, up to a censoring of order
    `exp(-pi intensity guard^2)`.
    """
    if len(points) < 2:
        return np.zeros(0)
    intensity = len(points) / side ** 2
    guard = 3 / math.sqrt(intensity) if guard is None else guard
    border = np.minimum(points, side - points).min(axis=1)
    keep = border >= guard
    if not keep.any():
        return np.zeros(0)
    r, _ = cKDTree(points).query(points[keep], k=2)
    return math.pi * intensity * r[:, 1] ** 2


def run_poisson(cfg: RunConfig):
    """
    Positions of size-`size` contours in rescaled perfect samples: block counts against Poisson dispersion,
    neighbouring-block correlation and nearest-neighbour distances.
    """
    report = Report('r6', cfg.as_dict(), cfg.seed)
    low, high = cfg.dispersion
    deviations = []
    for i, beta in enumerate(cfg.betas):
        scaling = PoissonRescaling(beta, cfg.size, cfg.d)
        box = scaling.window(cfg.contours, cfg.blocks)
        side = scaling.rescaled_side(box)
        spec, bundle = branching_constants(cfg, beta)
        bounds = bound_columns(cfg, spec, bundle, box_weight(box, bundle.M3))
        sampled = sampling_box(cfg, box, bounds, report)
        sampler = PerfectSampler(sampled, beta, cfg.n_max)

        counts, pairs, nn = [], ([], []), []
        total = 0
        for r in replica_range(cfg.replicas, 'R6', cfg.verbose):
            points = scaling.rescale(contour_centres(sampler.sample(derive_rng(cfg.seed, 'r6/{}'.format(i), r)), box,
                                                     cfg.size))
            total += len(points)
            grid, _, _ = np.histogram2d(points[:, 0], points[:, 1], bins=cfg.blocks, range=[[0, side], [0, side]])
            counts.append(grid.ravel())
            pairs[0].extend(np.concatenate([grid[:-1, :].ravel(), grid[:, :-1].ravel()]))
            pairs[1].extend(np.concatenate([grid[1:, :].ravel(), grid[:, 1:].ravel()]))
            nn.append(nearest_neighbour_statistic(points, side))
        if total < cfg.minimum:
            raise TooFewContours("Only {} contours of size {} at beta={}, increase the window".format(
                total, cfg.size, beta))

        ratio, p = dispersion(np.concatenate(counts))
        rho = float(np.corrcoef(pairs[0], pairs[1])[0, 1])
        nn = np.concatenate(nn)
        intensity = total / (cfg.replicas * side ** 2)
        report.add_row(beta=beta, window=box.width, sampled_window=sampled.width, contours=total, intensity=intensity,
                       dispersion=ratio, dispersion_p=p, correlation=rho,
                       nn_ks=ks_exponential(nn) if len(nn) else math.nan, **bounds)
        deviations.append(abs(ratio - 1))
        if math.isclose(beta, cfg.beta):
            report.check('dispersion_in_band', low <= ratio <= high)
            report.check('blocks_uncorrelated', abs(rho) <= cfg.correlation)
            report.check('enough_contours', total >= cfg.minimum)

    report.note(dispersion_deviations=deviations, trend_monotone=bool(all(np.diff(deviations) <= 0)))
    return report


def mean_or_nan(values):
    values = np.asarray(values, dtype=float)
    return float(values.mean()) if len(values) else math.nan


def run_clan_tails(cfg: RunConfig):
    """
    Tails of clan size, width and time length over a grid of inverse temperatures, with the branching envelopes and
    the one-sided domination by the Galton-Watson total progeny.
    """
    report = Report('clan_tails', cfg.as_dict(), cfg.seed)
    emptiness = []
    for i, beta in enumerate(cfg.betas):
        spec = BranchingSpec(beta, cfg.d, cfg.n_max)
        bundle = rate_bundle(spec)
        universe = ContourUniverse(beta, cfg.n_max)
        rng = derive_rng(cfg.seed, 'clan_tails', i)

        stats, capped = clan_stats([ANCHOR], universe, cfg.replicas, rng, cfg.cap, cfg.verbose)
        planted, planted_capped = clan_stats([unit_square()], universe, cfg.replicas, rng, cfg.cap,
                                            cfg.verbose)
        progeny, gw_capped = sample_total_progeny(spec, cfg.gw_replicas, rng, verbose=cfg.verbose)

        def tail_envelope(k):
            return bundle.M2 * math.exp(-bundle.M3 * k)

        sizes = np.array([s.size for s in stats], dtype=float)
        widths = np.array([s.width for s in stats], dtype=float)
        times = np.array([s.time_length for s in planted], dtype=float)
        support = np.unique(np.concatenate([sizes, progeny]))

        dominance = dominance_violations(sizes, progeny, support, cfg.sigmas) if len(sizes) else []
        gw_tail = envelope_violations(progeny, np.unique(progeny), tail_envelope, cfg.sigmas)
        size_tail = envelope_violations(sizes, np.unique(sizes), tail_envelope, cfg.sigmas)
        width_tail = envelope_violations(widths, np.unique(widths), tail_envelope, cfg.sigmas)

        time_rate = math.nan
        if len(times):
            t_grid = np.linspace(0.0, float(np.quantile(times, 0.99)), 20)
            time_rate = fit_exponential_rate(t_grid, survival(times, t_grid), floor=10.0 / len(times))
        sharing = {'share_{}'.format(n): sharing_probability(universe, ANCHOR, Plaquette(n, 0, 0),
                                                             cfg.sharing_replicas, rng) for n in cfg.distances}
        empty = mean_or_nan(sizes == 0)
        emptiness.append(empty)

        report.add_row(beta=beta, M2=bundle.M2, M3=bundle.M3, time_exponent=bundle.time_exponent,
                       empty_fraction=empty, mean_size=mean_or_nan(sizes), mean_width=mean_or_nan(widths),
                       mean_time_length=mean_or_nan(times), mean_progeny=mean_or_nan(progeny), time_rate=time_rate,
                       capped=capped + planted_capped, gw_capped=gw_capped, dominance_violations=len(dominance),
                       gw_tail_violations=len(gw_tail), size_tail_violations=len(size_tail),
                       width_tail_violations=len(width_tail), **sharing)
        tag = '[beta={}]'.format(beta)
        report.check('clans_completed' + tag, len(sizes) > 0 and len(times) > 0)
        report.check('gw_dominance' + tag, not dominance)
        report.check('gw_tail' + tag, not gw_tail)
        report.check('size_tail' + tag, not size_tail)
        report.check('width_tail' + tag, not width_tail)
        report.check('time_rate' + tag, np.isfinite(time_rate) and time_rate >= bundle.time_exponent - cfg.tolerance)

    report.note(tails_steepen=bool(all(np.diff(emptiness) >= 0)))
    return report


RUNS = {
    'oracle_equivalence': run_oracle_equivalence,
    'r2': run_convergence,
    'r3': run_volume_effect,
    'r4': run_clustering,
    'r5': run_clt,
    'r6': run_poisson,
    'clan_tails': run_clan_tails,
}


def run_experiment(name, config: ExperimentConfig):
    return RUNS[name](config[name])
