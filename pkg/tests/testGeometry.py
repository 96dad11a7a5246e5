import unittest

import numpy as np

from pclan.lattice.geometry import Plaquette, Contour, Box, Shift, adjacent, incompatible, is_contour, translate, \
    enumerate_through, size_counts, cell_boundary, contour_from_json, plaquette_between, random_contour_pairs
from tests.dummy_contours import *


class TestPlaquettes(unittest.TestCase):

    def test_Endpoints(self):
        self.assertEqual(((0, 0), (1, 0)), Plaquette(0, 0, 0).endpoints())
        self.assertEqual(((2, 3), (2, 4)), Plaquette(2, 3, 1).endpoints())

    def test_Between(self):
        self.assertEqual(Plaquette(0, 0, 0), plaquette_between((1, 0), (0, 0)))
        self.assertEqual(Plaquette(4, -1, 1), plaquette_between((4, -1), (4, 0)))
        with self.assertRaises(ValueError):
            plaquette_between((0, 0), (1, 1))

    def test_Adjacent(self):
        self.assertTrue(adjacent(Plaquette(0, 0, 0), Plaquette(1, 0, 0)))
        self.assertTrue(adjacent(Plaquette(0, 0, 0), Plaquette(0, 0, 1)))
        self.assertFalse(adjacent(Plaquette(0, 0, 0), Plaquette(2, 0, 0)))
        self.assertFalse(adjacent(Plaquette(0, 0, 0), Plaquette(0, 0, 0)))


class TestContours(unittest.TestCase):

    def test_UnitSquareIsContour(self):
        self.assertTrue(is_contour(SQUARE))
        self.assertEqual(4, SQUARE.size)

    def test_OpenPathIsNotContour(self):
        self.assertFalse(is_contour(SQUARE.plaquettes[:3]))

    def test_DisconnectedIsNotContour(self):
        self.assertFalse(is_contour(SQUARE.plaquettes + FAR_SQUARE.plaquettes))

    def test_FigureEightIsContour(self):
        self.assertTrue(is_contour(SQUARE.plaquettes + unit_square(1, 1).plaquettes))

    def test_EmptyIsNotContour(self):
        self.assertFalse(is_contour([]))

    def test_Validation(self):
        with self.assertRaises(ValueError):
            Contour(SQUARE.plaquettes[:2], validate=True)

    def test_CanonicalEquality(self):
        self.assertEqual(SQUARE, Contour(reversed(SQUARE.plaquettes)))
        self.assertEqual(hash(SQUARE), hash(Contour(reversed(SQUARE.plaquettes))))

    def test_SharedEdgeIncompatible(self):
        self.assertTrue(incompatible(SQUARE, NEIGHBOUR_SQUARE))

    def test_SharedVertexIncompatible(self):
        self.assertTrue(incompatible(SQUARE, unit_square(1, 1)))

    def test_FarCompatible(self):
        self.assertFalse(incompatible(SQUARE, FAR_SQUARE))
        self.assertFalse(incompatible(SQUARE, unit_square(2, 0)))

    def test_IncompatibilitySymmetric(self):
        rng = np.random.default_rng(SEED)
        for i, (a, b) in enumerate(random_contour_pairs(6, 200, rng)):
            with self.subTest(i=i):
                self.assertEqual(incompatible(a, b), incompatible(b, a))
                self.assertEqual(incompatible(a, b), any(p == q or adjacent(p, q) for p in a for q in b))

    def test_SelfIncompatible(self):
        self.assertTrue(incompatible(SQUARE, SQUARE))

    def test_JsonCanonicalOrder(self):
        self.assertEqual([[0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 1]], SQUARE.to_json())
        self.assertEqual(SQUARE, contour_from_json(SQUARE.to_json()))

    def test_Normalized(self):
        moved = translate(SQUARE, Shift(7, -3))
        self.assertEqual(SQUARE, moved.normalized())
        self.assertEqual((7, -3, 8, -2), moved.bounding_box())

    def test_CellBoundary(self):
        rectangle = cell_boundary([(0, 0), (1, 0)])
        self.assertEqual(6, len(rectangle))
        self.assertNotIn(Plaquette(1, 0, 1), rectangle)
        self.assertTrue(is_contour(rectangle))


class TestEnumeration(unittest.TestCase):

    def test_KnownCounts(self):
        self.assertEqual(KNOWN_COUNTS, size_counts(N_MAX))

    def test_BothAxesAgree(self):
        self.assertEqual(len(enumerate_through(Plaquette(0, 0, 0), N_MAX)),
                         len(enumerate_through(Plaquette(0, 0, 1), N_MAX)))

    def test_BelowFourIsEmpty(self):
        self.assertEqual([], enumerate_through(ORIGIN, 3))

    def test_AllContainPlaquette(self):
        p = Plaquette(3, -2, 1)
        for gamma in enumerate_through(p, N_MAX):
            with self.subTest(gamma=gamma):
                self.assertIn(p, gamma)
                self.assertTrue(is_contour(gamma))
                self.assertLessEqual(gamma.size, N_MAX)

    def test_TranslationCovariant(self):
        p = Plaquette(3, -2, 1)
        moved = set(translate(g, Shift(3, -2)) for g in enumerate_through(Plaquette(0, 0, 1), N_MAX))
        self.assertEqual(moved, set(enumerate_through(p, N_MAX)))

    def test_MatchesBruteForce(self):
        for n_max in (4, 6, 8):
            for p in (Plaquette(0, 0, 0), Plaquette(2, 1, 1)):
                with self.subTest(n_max=n_max, p=p):
                    self.assertEqual(brute_force_through(p, n_max), set(enumerate_through(p, n_max)))

    def test_SortedBySize(self):
        sizes = [g.size for g in enumerate_through(ORIGIN, N_MAX)]
        self.assertEqual(sorted(sizes), sizes)


class TestBoxes(unittest.TestCase):

    def test_PlaquetteCount(self):
        for width in (1, 2, 5):
            with self.subTest(width=width):
                self.assertEqual(2 * width * (width + 1), len(Box(width).plaquettes()))

    def test_ContainsContour(self):
        box = Box(2)
        self.assertTrue(box.contains_contour(SQUARE))
        self.assertTrue(box.contains_contour(unit_square(1, 1)))
        self.assertFalse(box.contains_contour(unit_square(2, 0)))

    def test_Offset(self):
        box = Box(3, 3, -1, -1)
        self.assertIn(Plaquette(-1, -1, 0), box)
        self.assertNotIn(Plaquette(-2, 0, 0), box)
        self.assertEqual(9, box.cells)

    def test_DistanceToComplement(self):
        self.assertEqual(1, Box(1).distance_to_complement(Plaquette(0, 0, 0)))
        self.assertEqual(3, Box(5, 5, -2, -2).distance_to_complement(Plaquette(0, 0, 0)))

    def test_Equality(self):
        self.assertEqual(Box(3, 3, 0, 0), Box(3))
        self.assertNotEqual(Box(3), Box(3, 2))


if __name__ == '__main__':
    unittest.main()
