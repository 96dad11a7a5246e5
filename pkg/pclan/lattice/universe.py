"""
Contour universes: the set of contours a sampler may use, either all contours inside a box or all contours of the
lattice, up to a size cutoff.
"""
import math

import numpy as np

from pclan.lattice.geometry import Box, Contour, Plaquette, Shift, enumerate_through, incident_plaquettes, translate
from pclan.lattice.catalog import WeightedCatalog, build_catalog
from pclan.utils import PClanException, CutoffTooSmall

# Boxes up to this many cells list their contours explicitly; larger ones are sampled by translation class.
_EXPLICIT_CELL_LIMIT = 4096


class ContourUniverse:
    """
    Contours of size at most `n_max`, inside `box` or anywhere on the lattice when `box` is `None`.

    Parameters
    ----------
    beta : float
           Inverse temperature, sets every weight `exp(-beta * size)`.
    n_max : int
            Size cutoff.
    box : Box, None
          Finite volume, or `None` for the whole lattice.
    """
    def __init__(self, beta, n_max, box: Box = None):
        if n_max < 4:
            raise CutoffTooSmall("No closed contour has fewer than 4 plaquettes, got n_max={}".format(n_max))
        self.beta = float(beta)
        self.n_max = int(n_max)
        self.box = box
        self._through = dict()
        self._incompatible = dict()
        self._shape_incompatible = dict()
        self._catalog = None
        self._shapes = None

    @property
    def finite(self):
        return self.box is not None

    @property
    def explicit(self):
        return self.finite and self.box.cells <= _EXPLICIT_CELL_LIMIT

    def weight(self, gamma: Contour):
        return math.exp(-self.beta * gamma.size)

    def weights(self, contours):
        return np.exp(-self.beta * np.array([g.size for g in contours], dtype=float))

    def inside(self, gamma: Contour):
        return self.box is None or self.box.contains_contour(gamma)

    def contours_through(self, p: Plaquette):
        p = Plaquette(*p)
        if p not in self._through:
            if self.box is not None and p not in self.box:
                self._through[p] = ()
            else:
                self._through[p] = tuple(g for g in enumerate_through(p, self.n_max) if self.inside(g))
        return self._through[p]

    def incompatible_with(self, gamma: Contour):
        """
        All contours of the universe sharing a vertex with `gamma`, `gamma` itself included.

        Computed once per translation class and translated, then filtered to the box.
        """
        if gamma not in self._incompatible:
            x0, y0, _, _ = gamma.bounding_box()
            shape = translate(gamma, Shift(-x0, -y0))
            if shape not in self._shape_incompatible:
                found = set()
                for v in shape.vertices:
                    for q in incident_plaquettes(v):
                        found.update(enumerate_through(q, self.n_max))
                self._shape_incompatible[shape] = tuple(sorted(found))
            moved = (translate(t, Shift(x0, y0)) for t in self._shape_incompatible[shape])
            self._incompatible[gamma] = tuple(t for t in moved if self.inside(t))
        return self._incompatible[gamma]

    def mean_incompatible_mass(self, gamma: Contour):
        """Sum of weights of contours incompatible with `gamma`: the mean number of its first-generation ancestors."""
        return float(self.weights(self.incompatible_with(gamma)).sum())

    def catalog(self) -> WeightedCatalog:
        """The explicit catalog of a finite universe."""
        if not self.finite:
            raise PClanException("The lattice universe has infinitely many contours")
        if self._catalog is None:
            self._catalog = build_catalog(self.beta, self.n_max, region=self.box, inside=True)
        return self._catalog

    def contours(self):
        return self.catalog().contours

    def shapes(self):
        """Translation classes as `(representative, placements, width, height)`, representatives at the origin."""
        if self._shapes is None:
            classes = set()
            for axis in (0, 1):
                classes.update(g.normalized() for g in enumerate_through(Plaquette(0, 0, axis), self.n_max))
            shapes = []
            for s in sorted(classes):
                _, _, w, h = s.bounding_box()
                if self.box is None:
                    placements = math.inf
                else:
                    placements = max(0, self.box.width - w + 1) * max(0, self.box.height - h + 1)
                if placements > 0:
                    shapes.append((s, placements, w, h))
            self._shapes = shapes
        return self._shapes

    def total_rate(self):
        if not self.finite:
            return math.inf
        return float(sum(n * self.weight(s) for s, n, _, _ in self.shapes()))

    def sample_alive(self, rng: np.random.Generator):
        """
        The contours of all free cylinders alive at one time slice, with multiplicity.

        Each contour independently has a Poisson(exp(-beta |g|)) number of alive cylinders. Small boxes draw these
        directly; large boxes draw the Poisson total and distribute it by translation class and uniform position,
        which has the same law.
        """
        if not self.finite:
            raise PClanException("Cannot draw a full time slice of the lattice universe")
        if self.explicit:
            catalog = self.catalog()
            counts = rng.poisson(catalog.weights)
            contours = catalog.contours
            return [contours[i] for i in np.flatnonzero(counts) for _ in range(counts[i])]

        shapes = self.shapes()
        rates = np.array([n * self.weight(s) for s, n, _, _ in shapes])
        total = rng.poisson(rates.sum())
        picks = rng.choice(len(shapes), size=total, p=rates / rates.sum())
        alive = []
        for i in picks:
            s, _, w, h = shapes[i]
            dx = int(rng.integers(self.box.width - w + 1))
            dy = int(rng.integers(self.box.height - h + 1))
            alive.append(translate(s, Shift(self.box.x0 + dx, self.box.y0 + dy)))
        return alive
