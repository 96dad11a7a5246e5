import math
import unittest

import numpy as np

from pclan.lattice.geometry import unit_square
from pclan.lattice.universe import ContourUniverse
from pclan.metrics.base import within_sigma, ks_exponential_pvalue, binomial_band
from pclan.processes.bounds import BranchingSpec, f_gen, f_prime, certified_radius, critical_points, \
    closed_form_a_bar, rate_bundle, simulate_gw, sample_total_progeny, fixed_point_residual, OffspringKernel, \
    PopulationPath, simulate_multitype, survival_curve, survival_envelope, truncation_bias, certified_margin, \
    volume_envelope, clustering_envelope
from pclan.utils import SubcriticalityViolated, RadiusExceeded, CapExceeded
from tests.dummy_contours import *


def _no_offspring(shape):
    return [], np.zeros(0)


class TestGeneratingFunction(unittest.TestCase):

    def setUp(self) -> None:
        self.spec = BranchingSpec(BETA)

    def test_AtOne(self):
        self.assertAlmostEqual(1.0, f_gen(1.0, self.spec).value, places=14)

    def test_DerivativeAtOne(self):
        self.assertAlmostEqual(self.spec.mean_offspring, f_prime(1.0, self.spec), places=12)
        self.assertAlmostEqual((self.spec.d - 1) * self.spec.lam.value, f_prime(1.0, self.spec), places=12)

    def test_DerivativeFiniteDifference(self):
        h = 1e-5
        slope = (f_gen(1 + h, self.spec).value - f_gen(1 - h, self.spec).value) / (2 * h)
        expected = (self.spec.d - 1) * self.spec.lam.value
        self.assertLess(abs(slope - expected), 1e-4 * expected)

    def test_AtZero(self):
        self.assertAlmostEqual(math.exp(-self.spec.size_weights.sum()), f_gen(0.0, self.spec).value)

    def test_Increasing(self):
        values = [f_gen(a, self.spec).value for a in np.linspace(0, 2, 9)]
        self.assertEqual(sorted(values), values)

    def test_NegativeArgument(self):
        with self.assertRaises(ValueError):
            f_gen(-0.5, self.spec)

    def test_StrictBeyondRadius(self):
        radius = certified_radius(self.spec)
        self.assertTrue(math.isfinite(f_gen(0.9 * radius, self.spec, strict=True).error_bound))
        with self.assertRaises(RadiusExceeded):
            f_gen(1.1 * radius, self.spec, strict=True)
        self.assertTrue(math.isinf(f_gen(1.1 * radius, self.spec).error_bound))


class TestCriticalPoints(unittest.TestCase):

    def test_SupercriticalRefused(self):
        with self.assertRaises(SubcriticalityViolated):
            critical_points(BranchingSpec(1.0))
        with self.assertRaises(SubcriticalityViolated):
            BranchingSpec(1.0).require_subcritical()

    def test_Subcritical(self):
        spec = BranchingSpec(BETA)
        self.assertTrue(spec.subcritical)
        self.assertLess(spec.mean_offspring, 1)

    def test_ClosedForm(self):
        for beta in (1.5, 2.0, 3.0):
            with self.subTest(beta=beta):
                spec = BranchingSpec(beta)
                self.assertAlmostEqual(closed_form_a_bar(spec), critical_points(spec).a_bar, delta=1e-3)

    def test_Ordering(self):
        a_bar, b_bar = critical_points(BranchingSpec(BETA))
        self.assertGreater(a_bar, 1)
        self.assertGreater(b_bar, 1)
        self.assertLess(b_bar, a_bar)

    def test_FixedPoint(self):
        spec = BranchingSpec(BETA)
        a_bar, b_bar = critical_points(spec)
        self.assertLess(fixed_point_residual(b_bar, a_bar, spec), 1e-12)

    def test_Bundle(self):
        spec = BranchingSpec(BETA)
        bundle = rate_bundle(spec)
        m = spec.mean_offspring
        self.assertEqual(bundle.a_bar, bundle.M2)
        self.assertAlmostEqual(math.log(bundle.b_bar), bundle.M3)
        self.assertAlmostEqual(1 - m, bundle.time_exponent)
        self.assertAlmostEqual((1 - m) / (2 - m), bundle.M0)
        self.assertTrue(math.isnan(bundle.M2_simulated))

    def test_ExponentsDecreaseWithTemperature(self):
        hot, cold = rate_bundle(BranchingSpec(1.6)), rate_bundle(BranchingSpec(2.4))
        self.assertLess(hot.M3, cold.M3)
        self.assertLess(hot.time_exponent, cold.time_exponent)


class TestGaltonWatson(unittest.TestCase):

    def test_MeanProgeny(self):
        spec = BranchingSpec(BETA_SAMPLING)
        progeny, capped = sample_total_progeny(spec, 20000, np.random.default_rng(SEED))
        self.assertEqual(0, capped)
        m = spec.mean_offspring
        offspring_variance = float(np.dot(spec.size_weights, ((spec.d - 1) * spec.sizes) ** 2))
        sd = math.sqrt(offspring_variance / (1 - m) ** 3)
        self.assertTrue(within_sigma(progeny.mean(), 1 / (1 - m), sd, len(progeny), k=4))

    def test_BarrenRoot(self):
        spec = BranchingSpec(BETA_SAMPLING)
        progeny, _ = sample_total_progeny(spec, 20000, np.random.default_rng(SEED))
        self.assertTrue(check_proportion(int((progeny == 1).sum()), len(progeny), f_gen(0.0, spec).value))

    def test_ProgenySupport(self):
        progeny, _ = sample_total_progeny(BranchingSpec(BETA), 500, np.random.default_rng(SEED))
        self.assertTrue(np.all(progeny >= 1))
        # every offspring comes in whole contours of even size
        self.assertTrue(np.all((progeny - 1) % 2 == 0))

    def test_Cap(self):
        with self.assertRaises(CapExceeded) as ctx:
            simulate_gw(BranchingSpec(BETA), np.random.default_rng(SEED), cap=0)
        self.assertGreaterEqual(ctx.exception.size, 1)
        progeny, capped = sample_total_progeny(BranchingSpec(BETA), 10, np.random.default_rng(SEED), cap=0)
        self.assertEqual(10, capped)
        self.assertEqual(0, len(progeny))

    def test_SimulatedTransform(self):
        bundle = rate_bundle(BranchingSpec(BETA), rng=np.random.default_rng(SEED), replicas=2000)
        self.assertTrue(math.isfinite(bundle.M2_simulated))
        self.assertGreaterEqual(bundle.M2_simulated, bundle.b_bar)


class TestMultitype(unittest.TestCase):

    def test_PureDeath(self):
        rng = np.random.default_rng(SEED)
        spec = BranchingSpec(BETA)
        times = [simulate_multitype(spec, SQUARE, 100.0, rng, kernel=_no_offspring).extinction_time
                 for _ in range(2000)]
        self.assertGreater(ks_exponential_pvalue(times), 1e-3)

    def test_PathQueries(self):
        path = PopulationPath([0.0, 0.5, 1.5], [1, 2, 0], horizon=3.0)
        self.assertEqual(1, path.size_at(0.2))
        self.assertEqual(2, path.size_at(1.0))
        self.assertFalse(path.alive_at(2.0))
        self.assertEqual(1.5, path.extinction_time)
        self.assertTrue(math.isinf(PopulationPath([0.0, 0.5], [1, 3], horizon=1.0).extinction_time))

    def test_KernelMatchesUniverse(self):
        universe = ContourUniverse(BETA, 6)
        kernel = OffspringKernel(universe)
        self.assertAlmostEqual(universe.mean_incompatible_mass(SQUARE), kernel.mean_offspring(SQUARE))
        self.assertAlmostEqual(kernel.mean_offspring(SQUARE), kernel.mean_offspring(unit_square(4, -7)))

    def test_PerPlaquetteBound(self):
        spec = BranchingSpec(BETA, n_max=6)
        kernel = OffspringKernel(ContourUniverse(BETA, 6))
        # children share a vertex with the parent, four plaquettes meet at each vertex
        bound = 4 * len(SQUARE.vertices) * spec.lam.value
        self.assertLessEqual(kernel.mean_offspring_plaquettes(SQUARE), bound)

    def test_SurvivalCurve(self):
        spec = BranchingSpec(BETA, n_max=6)
        grid = np.linspace(0, 3, 7)
        replicas = 1000
        curve = survival_curve(spec, grid, replicas, np.random.default_rng(SEED))
        self.assertEqual(1.0, curve[0])
        self.assertTrue(np.all(np.diff(curve) <= 0))
        # the root alone survives to t with probability exp(-t)
        self.assertTrue(np.all(curve >= np.exp(-grid) - binomial_band(np.exp(-grid), replicas)))

    def test_SurvivalEnvelope(self):
        spec = BranchingSpec(BETA)
        self.assertEqual(1.0, survival_envelope(spec, 0.0))
        self.assertAlmostEqual(math.exp(-(1 - spec.mean_offspring) * 2), survival_envelope(spec, 2.0))

    def test_TruncationBias(self):
        spec = BranchingSpec(BETA, n_max=6)
        bias = truncation_bias(spec, [0.0, 1.0], 50, np.random.default_rng(SEED))
        self.assertEqual(2, len(bias))
        self.assertEqual(0.0, bias[0])


class TestEnvelopes(unittest.TestCase):

    def test_CertifiedMargin(self):
        bundle = rate_bundle(BranchingSpec(BETA))
        margin = certified_margin(bundle.M2, bundle.M3, tol=1e-3)
        self.assertLessEqual(volume_envelope(bundle.M2, bundle.M3, [margin]), 1e-3)
        if margin > 0:
            self.assertGreater(volume_envelope(bundle.M2, bundle.M3, [margin - 1]), 1e-3)

    def test_MarginWithoutDecay(self):
        self.assertTrue(math.isinf(certified_margin(2.0, 0.0)))

    def test_VolumeEnvelopeSums(self):
        self.assertAlmostEqual(2 * math.exp(-3) + 2 * math.exp(-6), volume_envelope(2.0, 1.5, [2, 4]))

    def test_ClusteringEnvelope(self):
        self.assertEqual(0.0, clustering_envelope(2.0, 1.0, [0]))
        self.assertAlmostEqual(2 * 4 * 3 * math.exp(-3), clustering_envelope(2.0, 1.0, [3]))
        self.assertGreater(clustering_envelope(2.0, 1.0, [2]), clustering_envelope(2.0, 1.0, [6]))


if __name__ == '__main__':
    unittest.main()
