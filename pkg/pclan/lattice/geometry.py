"""
Lattice plaquettes and contours of the two-dimensional square lattice.

A plaquette is an undirected unit edge, stored by its lexicographically smaller endpoint and its axis. A contour is a
finite, closed and connected set of plaquettes: every vertex it touches meets two or four of its edges.
"""
import functools
from collections import Counter, defaultdict
from typing import NamedTuple

import numpy as np

_STEPS = ((1, 0), (0, 1))


class Plaquette(NamedTuple):
    x: int
    y: int
    axis: int

    @property
    def base(self):
        return self.x, self.y

    def endpoints(self):
        dx, dy = _STEPS[self.axis]
        return (self.x, self.y), (self.x + dx, self.y + dy)

    def to_json(self):
        return [self.x, self.y, self.axis]


def plaquette_between(u, v):
    """
    The plaquette joining two neighbouring vertices, in canonical encoding.
    """
    (a, b) = sorted((tuple(u), tuple(v)))
    if a[1] == b[1] and b[0] - a[0] == 1:
        return Plaquette(a[0], a[1], 0)
    if a[0] == b[0] and b[1] - a[1] == 1:
        return Plaquette(a[0], a[1], 1)
    raise ValueError("Vertices {} and {} are not lattice neighbours".format(u, v))


def incident_plaquettes(v):
    """The four plaquettes meeting at vertex `v`."""
    x, y = v
    return (Plaquette(x, y, 0), Plaquette(x - 1, y, 0), Plaquette(x, y, 1), Plaquette(x, y - 1, 1))


def adjacent(p: Plaquette, q: Plaquette):
    """
    Two distinct plaquettes are adjacent when they share a (d-2)-face, in two dimensions an endpoint.
    """
    if p == q:
        return False
    return bool(set(p.endpoints()) & set(q.endpoints()))


class Shift(NamedTuple):
    x: int
    y: int

    def __neg__(self):
        return Shift(-self.x, -self.y)


@functools.total_ordering
class Contour:
    """
    A canonical, immutable set of plaquettes.

    Contours hash and compare by their sorted plaquettes, so they can key dictionaries and sets. Construction does not
    validate closure or connectivity, use :func:`is_contour` (or `validate=True`) for that.

    Parameters
    ----------
    plaquettes : iterable
                 Plaquettes (or `(x, y, axis)` triples) making up the contour.
    validate : bool
               Raise `ValueError` when the plaquettes do not form a contour.
    """
    __slots__ = ('plaquettes', '_hash', '_vertices', '_members')

    def __init__(self, plaquettes, validate=False):
        self.plaquettes = tuple(sorted(set(Plaquette(*p) for p in plaquettes)))
        self._hash = hash(self.plaquettes)
        self._vertices = None
        self._members = None
        if validate and not is_contour(self.plaquettes):
            raise ValueError("Not a closed and connected set of plaquettes: {}".format(self.plaquettes))

    @property
    def size(self):
        return len(self.plaquettes)

    @property
    def owner(self):
        """The lexicographically smallest plaquette, which owns the contour for birth sampling."""
        return self.plaquettes[0]

    @property
    def vertices(self):
        if self._vertices is None:
            self._vertices = frozenset(v for p in self.plaquettes for v in p.endpoints())
        return self._vertices

    def bounding_box(self):
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def normalized(self):
        """Translate so the smallest vertex coordinates are zero, giving the translation-class representative."""
        x0, y0, _, _ = self.bounding_box()
        return translate(self, Shift(-x0, -y0))

    def to_json(self):
        return [p.to_json() for p in self.plaquettes]

    def __len__(self):
        return len(self.plaquettes)

    def __iter__(self):
        return iter(self.plaquettes)

    def __contains__(self, item):
        if self._members is None:
            self._members = frozenset(self.plaquettes)
        return item in self._members

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return isinstance(other, Contour) and self.plaquettes == other.plaquettes

    def __lt__(self, other):
        return (self.size, self.plaquettes) < (other.size, other.plaquettes)

    def __repr__(self):
        return "Contour(size={}, {})".format(self.size, [tuple(p) for p in self.plaquettes])


def contour_from_json(triples):
    return Contour(Plaquette(*t) for t in triples)


def incompatible(gamma: Contour, theta: Contour):
    """
    True when some plaquette of one contour equals or is adjacent to a plaquette of the other.

    In two dimensions equal-or-adjacent plaquettes are exactly those with a common endpoint, so the test reduces to
    intersecting vertex sets.
    """
    return not gamma.vertices.isdisjoint(theta.vertices)


def is_contour(plaquettes):
    """
    Checks that a finite set of plaquettes is closed (each touched vertex meets 2 or 4 of them) and connected.
    """
    plaquettes = set(Plaquette(*p) for p in plaquettes)
    if not plaquettes:
        return False
    degree = Counter(v for p in plaquettes for v in p.endpoints())
    if any(k not in (2, 4) for k in degree.values()):
        return False

    by_vertex = defaultdict(list)
    for p in plaquettes:
        for v in p.endpoints():
            by_vertex[v].append(p)
    start = next(iter(plaquettes))
    seen = {start}
    stack = [start]
    while stack:
        p = stack.pop()
        for v in p.endpoints():
            for q in by_vertex[v]:
                if q not in seen:
                    seen.add(q)
                    stack.append(q)
    return len(seen) == len(plaquettes)


def translate(gamma: Contour, s: Shift):
    return Contour(Plaquette(p.x + s[0], p.y + s[1], p.axis) for p in gamma.plaquettes)


def plaquette_distance(p: Plaquette, q: Plaquette):
    """L1 distance between base vertices."""
    return abs(p.x - q.x) + abs(p.y - q.y)


def unit_square(x=0, y=0):
    """The boundary of the lattice cell with lower-left corner `(x, y)`."""
    return Contour([Plaquette(x, y, 0), Plaquette(x, y + 1, 0), Plaquette(x, y, 1), Plaquette(x + 1, y, 1)])


def cell_boundary(cells):
    """
    The plaquettes bounding a set of cells an odd number of times, i.e. the mod-2 boundary of a union of cells.
    """
    edges = Counter()
    for x, y in cells:
        edges.update(unit_square(x, y).plaquettes)
    return frozenset(p for p, k in edges.items() if k % 2 == 1)


def _closed_trails(p: Plaquette, n_max):
    start, first = p.endpoints()
    used = {p}
    found = set()

    def walk(v, length):
        if v == start:
            found.add(frozenset(used))
        if length == n_max:
            return
        remaining = n_max - length
        for q in incident_plaquettes(v):
            if q in used:
                continue
            a, b = q.endpoints()
            w = b if a == v else a
            if abs(w[0] - start[0]) + abs(w[1] - start[1]) > remaining - 1:
                continue
            used.add(q)
            walk(w, length + 1)
            used.remove(q)

    walk(first, 1)
    return found


@functools.lru_cache(maxsize=None)
def _enumerate_at_origin(axis, n_max):
    if n_max < 4:
        return ()
    return tuple(sorted(Contour(s) for s in _closed_trails(Plaquette(0, 0, axis), n_max)))


def enumerate_through(p: Plaquette, n_max: int):
    """
    All contours containing plaquette `p` with at most `n_max` plaquettes.

    Every contour through `p` is the edge set of a closed trail (no edge used twice) that starts by traversing `p`, so
    the search walks such trails depth first, pruning walks too far from the start to close within `n_max` edges, and
    deduplicates by canonical form. Results are memoized at the origin and translated.

    Parameters
    ----------
    p : Plaquette
    n_max : int
            Size cutoff.

    Returns
    -------
    contours : list
               Sorted by size, then lexicographically.
    """
    p = Plaquette(*p)
    at_origin = _enumerate_at_origin(p.axis, int(n_max))
    if p.x == 0 and p.y == 0:
        return list(at_origin)
    return [translate(g, Shift(p.x, p.y)) for g in at_origin]


def size_counts(n_max):
    """Number of contours through a fixed plaquette, by size."""
    counts = Counter(g.size for g in _enumerate_at_origin(0, int(n_max)))
    return {n: counts[n] for n in sorted(counts)}


class Box:
    """
    A rectangular region: all plaquettes with both endpoints in the vertex rectangle [x0, x0+width] x [y0, y0+height].

    Parameters
    ----------
    width, height : int
                    Number of lattice cells along each axis.
    x0, y0 : int
             Lower-left vertex.
    """
    def __init__(self, width, height=None, x0=0, y0=0):
        self.width = int(width)
        self.height = int(width if height is None else height)
        self.x0 = int(x0)
        self.y0 = int(y0)

    @property
    def cells(self):
        return self.width * self.height

    def contains_vertex(self, v):
        return self.x0 <= v[0] <= self.x0 + self.width and self.y0 <= v[1] <= self.y0 + self.height

    def __contains__(self, p):
        p = Plaquette(*p)
        return all(self.contains_vertex(v) for v in p.endpoints())

    def contains_contour(self, gamma: Contour):
        x0, y0, x1, y1 = gamma.bounding_box()
        return self.x0 <= x0 and x1 <= self.x0 + self.width and self.y0 <= y0 and y1 <= self.y0 + self.height

    def plaquettes(self):
        out = []
        for x in range(self.x0, self.x0 + self.width + 1):
            for y in range(self.y0, self.y0 + self.height + 1):
                if x < self.x0 + self.width:
                    out.append(Plaquette(x, y, 0))
                if y < self.y0 + self.height:
                    out.append(Plaquette(x, y, 1))
        return sorted(out)

    def distance_to_complement(self, p: Plaquette):
        """Smallest plaquette distance from `p` to a plaquette not inside the box."""
        best = None
        for x in range(self.x0 - 1, self.x0 + self.width + 2):
            for y in range(self.y0 - 1, self.y0 + self.height + 2):
                for axis in (0, 1):
                    q = Plaquette(x, y, axis)
                    if q not in self:
                        d = plaquette_distance(p, q)
                        best = d if best is None else min(best, d)
        return best

    def __eq__(self, other):
        return isinstance(other, Box) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def key(self):
        return self.x0, self.y0, self.width, self.height

    def __repr__(self):
        return "Box({}x{} at ({}, {}))".format(self.width, self.height, self.x0, self.y0)


def random_contour_pairs(n_max, count, rng: np.random.Generator, spread=4):
    """Random pairs of contours near the origin, used for property checks."""
    pool = _enumerate_at_origin(0, int(n_max)) + _enumerate_at_origin(1, int(n_max))
    pairs = []
    for _ in range(count):
        a, b = rng.integers(len(pool), size=2)
        s = rng.integers(-spread, spread + 1, size=2)
        pairs.append((pool[a], translate(pool[b], Shift(int(s[0]), int(s[1])))))
    return pairs
