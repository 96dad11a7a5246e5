"""
Backward construction of clans of ancestors over a lazily generated stationary free process, and the perfect window
sampler built on it.

Times run backwards from the present at 0: a cache with horizon `T` knows every free cylinder born in `(-T, 0]`.
Cylinders alive at `-T` but born earlier are kept as horizon-boundary cylinders, with a known death and an unknown
birth, until an extension reveals it.
"""
import math
from collections import deque
from typing import NamedTuple

import numpy as np

from pclan.lattice.geometry import Box, Contour, Plaquette
from pclan.lattice.catalog import beta_M
from pclan.lattice.universe import ContourUniverse
from pclan.processes.forward import Cylinder, Configuration, KEPT, ERASED
from pclan.utils import CapExceeded, EmptyRegion, InconsistentClan, SubcriticalityViolated, replica_range, \
    standard_logging

CLAN_CAP = 10 ** 7
# Horizon step used while waiting for a boundary cylinder's birth to fall in the generated slab.
RESOLUTION_STEP = 1.0
# The subcriticality gate always uses at least this cutoff for the certified threshold.
GATE_CUTOFF = 10


def _truncated_exponential(rng, bound, size=None):
    """Exp(1) conditioned to be below `bound`, by inversion."""
    return -np.log1p(-rng.random(size) * -math.expm1(-bound))


class _ContourStream:
    """Free cylinders of one contour over its own generated horizon."""
    __slots__ = ('basis', 'rate', 'horizon', 'cylinders', 'pending')

    def __init__(self, basis: Contour, rate, alive_deaths=()):
        self.basis = basis
        self.rate = rate
        self.horizon = 0.0
        self.cylinders = []
        self.pending = [Cylinder(basis, None, float(d)) for d in alive_deaths]

    def extend(self, dt, rng: np.random.Generator):
        old = self.horizon
        new = old + dt
        reach = -math.expm1(-dt)

        still = []
        for c in self.pending:
            if rng.random() < reach:
                c.birth = -old - float(_truncated_exponential(rng, dt))
                self.cylinders.append(c)
            else:
                still.append(c)

        for _ in range(rng.poisson(self.rate * (dt - reach))):
            u = rng.uniform(0, dt)
            while rng.random() >= -math.expm1(-u):
                u = rng.uniform(0, dt)
            birth = -old - u
            self.cylinders.append(Cylinder(self.basis, birth, birth + float(_truncated_exponential(rng, u))))

        boundary = rng.poisson(self.rate * reach)
        if boundary:
            residual = _truncated_exponential(rng, dt, boundary)
            still.extend(Cylinder(self.basis, None, -new + float(r)) for r in residual)
        self.pending = still
        self.horizon = new

    def ensure(self, depth, rng):
        if depth > self.horizon:
            self.extend(depth - self.horizon, rng)

    def alive_at(self, t, born_before=None):
        """Cylinders alive at `t`, optionally only those born strictly before `born_before`."""
        cut = t if born_before is None else born_before
        out = [c for c in self.cylinders if c.death > t and c.birth <= t and (born_before is None or c.birth < cut)]
        out.extend(c for c in self.pending if c.death > t)
        return out

    def births_in(self, lo, hi):
        return sorted(c.birth for c in self.cylinders if lo < c.birth <= hi)


class FreeProcessCache:
    """
    The stationary free process restricted to a contour universe, generated one contour at a time on demand.

    Each contour gets an independent stream the first time a query touches it. The stream starts at horizon 0 with a
    Poisson(exp(-beta |g|)) number of alive cylinders, whose residual lifetimes are Exp(1). A window sampler may instead
    seed every alive cylinder at once with :meth:`seed_alive`; contours left unseeded then start empty.

    Parameters
    ----------
    universe : ContourUniverse
    rng : np.random.Generator
    """
    def __init__(self, universe: ContourUniverse, rng: np.random.Generator):
        self.universe = universe
        self.rng = rng
        self.horizon = 0.0
        self._streams = dict()
        self._seeded = False

    def __len__(self):
        return len(self._streams)

    def __contains__(self, gamma):
        return gamma in self._streams

    def _materialize(self, contours):
        fresh = [g for g in contours if g not in self._streams]
        if not fresh:
            return
        weights = self.universe.weights(fresh)
        counts = np.zeros(len(fresh), dtype=int) if self._seeded else self.rng.poisson(weights)
        for g, w, k in zip(fresh, weights, counts):
            self._streams[g] = _ContourStream(g, float(w), self.rng.exponential(1.0, size=k) if k else ())

    def stream(self, gamma: Contour):
        self._materialize((gamma,))
        return self._streams[gamma]

    def seed_alive(self, alive):
        """
        Installs the given contours (with multiplicity) as the complete set of cylinders alive at time 0.

        Returns
        -------
        roots : list
                The new cylinders, with unknown births.
        """
        if self._streams:
            raise ValueError("Alive cylinders can only be seeded into an empty cache")
        self._seeded = True
        deaths = dict()
        for g in alive:
            deaths.setdefault(g, []).append(float(self.rng.exponential(1.0)))
        roots = []
        for g in sorted(deaths):
            s = _ContourStream(g, self.universe.weight(g), deaths[g])
            self._streams[g] = s
            roots.extend(s.pending)
        return roots

    def plant(self, gamma: Contour):
        """
        Adds one extra cylinder of `gamma` alive at time 0 (a stationary cylinder conditioned to exist) and returns it.
        """
        s = self.stream(gamma)
        c = Cylinder(gamma, None, float(self.rng.exponential(1.0)))
        if s.horizon > 0:
            raise ValueError("Cylinders can only be planted before the stream of {} is extended".format(gamma))
        s.pending.append(c)
        return c

    def extend_horizon(self, dt):
        if not dt > 0:
            raise ValueError("Horizon extensions must be positive, got {}".format(dt))
        self.horizon += dt
        for s in self._streams.values():
            s.ensure(self.horizon, self.rng)
        return self

    def resolve_birth(self, cylinder: Cylinder):
        """Extends the cylinder's stream until its birth falls in the generated slab."""
        s = self.stream(cylinder.basis)
        while cylinder.birth is None:
            s.extend(RESOLUTION_STEP, self.rng)
        self.horizon = max(self.horizon, s.horizon)
        return cylinder.birth

    def _ensure(self, contours, depth):
        self._materialize(contours)
        for g in contours:
            self._streams[g].ensure(depth, self.rng)
        self.horizon = max(self.horizon, depth)

    def cylinder_ancestors(self, cylinder: Cylinder):
        b = cylinder.birth if cylinder.birth is not None else self.resolve_birth(cylinder)
        contours = self.universe.incompatible_with(cylinder.basis)
        self._ensure(contours, -b)
        return [c for g in contours for c in self._streams[g].alive_at(b, born_before=b) if c is not cylinder]

    def point_ancestors(self, x: Plaquette, t=0.0):
        if t > 0:
            raise ValueError("Query times must not be in the future, got {}".format(t))
        contours = self.universe.contours_through(x)
        self._ensure(contours, -t)
        return [c for g in contours for c in self._streams[g].alive_at(t)]

    def cylinders(self, gamma: Contour):
        """Every generated cylinder of `gamma`, boundary cylinders last."""
        s = self.stream(gamma)
        return list(s.cylinders) + list(s.pending)


def first_gen_ancestors(query, cache: FreeProcessCache):
    """
    First generation of ancestors.

    Parameters
    ----------
    query : Cylinder, Plaquette, tuple
            A cylinder, or a space-time point `(x, t)` (a bare plaquette means `t = 0`).
    cache : FreeProcessCache
            Extended as needed.

    Returns
    -------
    ancestors : list
                For a cylinder: cylinders with incompatible basis, born before it and alive at its birth. For a point:
                cylinders whose basis contains `x`, alive at `t`.
    """
    if isinstance(query, Cylinder):
        return cache.cylinder_ancestors(query)
    x, t = _as_point(query)
    return cache.point_ancestors(x, t)


def extend_horizon(cache: FreeProcessCache, dt):
    return cache.extend_horizon(dt)


def _as_point(query):
    if isinstance(query, Plaquette):
        return query, 0.0
    if len(query) == 3:
        return Plaquette(*query), 0.0
    x, t = query
    return Plaquette(*x), float(t)


class Clan:
    """
    A clan of ancestors: cylinders reached from query roots by repeatedly taking first-generation ancestors.

    Parameters
    ----------
    roots : list
            Generation-zero cylinders.
    nodes : list
            All cylinders, in discovery order (roots first).
    ancestors : dict
                First-generation ancestors of every node.
    generation : dict
                 Breadth-first generation of every node.
    targets : list
              The space-time points (or cylinders) the clan was built for.
    """
    def __init__(self, roots, nodes, ancestors, generation, targets=()):
        self.roots = list(roots)
        self.nodes = list(nodes)
        self.ancestors = ancestors
        self.generation = generation
        self.targets = list(targets)
        self.labels = None

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, cylinder):
        return cylinder in self.generation

    def __iter__(self):
        return iter(self.nodes)

    @property
    def size(self):
        """Cumulative size: total number of plaquettes over the bases of the clan's cylinders."""
        return sum(c.basis.size for c in self.nodes)

    @property
    def depth(self):
        return max(self.generation.values(), default=0)

    def projection(self):
        return set(p for c in self.nodes for p in c.basis.plaquettes)

    def oldest_birth(self):
        return min((c.birth for c in self.nodes), default=None)

    def edges(self):
        return [(a, c) for c in self.nodes for a in self.ancestors.get(c, ())]

    def kept_roots(self):
        if self.labels is None:
            resolve(self)
        return [c for c in self.roots if self.labels[c] == KEPT]

    def state(self):
        """Bases of the kept roots."""
        return Configuration((c.basis for c in self.kept_roots()), validate=False)


def build_clan(targets, cache: FreeProcessCache, cap=CLAN_CAP):
    """
    Breadth-first closure of the first-generation ancestor relation from the targets.

    Each node's birth is revealed (extending its stream) before its ancestors are listed, so every node of the returned
    clan has a known birth.

    Parameters
    ----------
    targets : iterable
              Cylinders, plaquettes or space-time points `(x, t)`.
    cache : FreeProcessCache
    cap : int
          Largest cumulative size allowed before giving up.

    Returns
    -------
    clan : Clan
    """
    targets = list(targets)
    roots = []
    for q in targets:
        for c in [q] if isinstance(q, Cylinder) else first_gen_ancestors(q, cache):
            if c not in roots:
                roots.append(c)

    generation = {c: 0 for c in roots}
    ancestors = dict()
    nodes = list(roots)
    size = sum(c.basis.size for c in nodes)
    queue = deque(roots)
    while queue:
        c = queue.popleft()
        cache.resolve_birth(c)
        ancestors[c] = cache.cylinder_ancestors(c)
        for a in ancestors[c]:
            if a not in generation:
                generation[a] = generation[c] + 1
                nodes.append(a)
                size += a.basis.size
                if size > cap:
                    raise CapExceeded("Clan cumulative size exceeded {}".format(cap), size=size,
                                      depth=generation[a])
                queue.append(a)
    return Clan(roots, nodes, ancestors, generation, targets)


def _sweep_labels(clan: Clan):
    labels = dict()
    for c in sorted(clan.nodes, key=lambda c: (c.birth, c.uid)):
        labels[c] = ERASED if any(labels[a] == KEPT for a in clan.ancestors[c]) else KEPT
    return labels


def _iterative_labels(clan: Clan):
    labels = dict()
    changed = True
    while changed:
        changed = False
        for c in clan.nodes:
            if c in labels:
                continue
            marks = [labels.get(a) for a in clan.ancestors[c]]
            if KEPT in marks:
                labels[c] = ERASED
            elif all(m == ERASED for m in marks):
                labels[c] = KEPT
            else:
                continue
            changed = True
    return labels


def resolve(clan: Clan):
    """
    Labels every clan node kept or erased.

    A chronological sweep keeps a cylinder when none of its ancestors is kept. The generation-wise rule (no ancestors:
    kept, a kept ancestor: erased, all ancestors erased: kept, repeated) is computed too and must agree.

    Returns
    -------
    labels : dict
             Maps each node to `KEPT` or `ERASED`. Also stored on the clan.
    """
    for c in clan.nodes:
        if c not in clan.ancestors:
            raise InconsistentClan("Node {} was never expanded".format(c))
        for a in clan.ancestors[c]:
            if a not in clan:
                raise InconsistentClan("Ancestor {} of {} is not a clan node".format(a, c))
            if a.birth is None or c.birth is None or not a.birth < c.birth:
                raise InconsistentClan("Ancestor {} is not born before {}".format(a, c))
    sweep = _sweep_labels(clan)
    iterative = _iterative_labels(clan)
    if sweep != iterative:
        raise InconsistentClan("Chronological and iterative resolutions disagree on {} nodes".format(
            sum(sweep.get(c) != iterative.get(c) for c in clan.nodes)))
    clan.labels = sweep
    return sweep


def _gate(beta, n_max, allow_supercritical):
    threshold = beta_M(2, max(n_max, GATE_CUTOFF)).hi
    if beta <= threshold and not allow_supercritical:
        raise SubcriticalityViolated("beta={:.4f} does not exceed the certified threshold {:.4f}".format(
            beta, threshold))


class PerfectSampler:
    """
    Exact sampler of the finite-volume contour measure of a box.

    All free cylinders alive at time 0 in the box are drawn, their clan is built with the contours of the box only, and
    the kept ones form the sample.

    Parameters
    ----------
    box : Box
    beta : float
    n_max : int
            Contour size cutoff.
    allow_supercritical : bool
                          Skip the subcriticality gate. Clans in a finite box are still finite, the cap bounds the work.
    cap : int
          Clan size cap.
    """
    def __init__(self, box: Box, beta, n_max=8, allow_supercritical=False, cap=CLAN_CAP):
        _gate(beta, n_max, allow_supercritical)
        self.box = box
        self.beta = beta
        self.n_max = n_max
        self.cap = cap
        self.universe = ContourUniverse(beta, n_max, box)

    def clan(self, rng: np.random.Generator):
        cache = FreeProcessCache(self.universe, rng)
        clan = build_clan(cache.seed_alive(self.universe.sample_alive(rng)), cache, self.cap)
        resolve(clan)
        return clan

    def sample(self, rng: np.random.Generator):
        return self.clan(rng).state()

    def samples(self, count, rng: np.random.Generator, verbose=False):
        return [self.sample(rng) for _ in replica_range(count, 'Perfect samples', verbose)]


def sample_window(box: Box, beta, rng: np.random.Generator, n_max=8, allow_supercritical=False, cap=CLAN_CAP):
    return PerfectSampler(box, beta, n_max, allow_supercritical, cap).sample(rng)


class ClanStats(NamedTuple):
    size: int
    projection_size: int
    width: int
    time_length: float
    depth: int

    @classmethod
    def of(cls, clan: Clan, centre=(0, 0), t=0.0):
        """
        Parameters
        ----------
        clan : Clan
        centre : tuple
                 Vertex the width is measured from: the smallest `w` with every clan vertex in `centre + [-w, w]^2`.
        t : float
            Query time the time length is measured from.
        """
        vertices = [v for c in clan.nodes for v in c.basis.vertices]
        width = max((max(abs(v[0] - centre[0]), abs(v[1] - centre[1])) for v in vertices), default=0)
        oldest = clan.oldest_birth()
        return cls(clan.size, len(clan.projection()), width, 0.0 if oldest is None else t - oldest, clan.depth)


def clan_stats(targets, universe: ContourUniverse, replicas, rng: np.random.Generator, cap=CLAN_CAP, verbose=False):
    """
    Statistics of independent clans of the same targets.

    Targets are plaquettes, space-time points or contours. A contour target plants one extra cylinder of it, alive at
    time 0, in each replica and uses it as a root, which samples the clan of a typical alive cylinder. The width and
    time length are measured from the first target.

    Returns
    -------
    stats : list
            One `ClanStats` per completed replica.
    capped : int
             Replicas abandoned at the cap.
    """
    targets = list(targets)
    if not targets:
        raise EmptyRegion("Clan statistics need at least one target")
    if isinstance(targets[0], Contour):
        centre, t = targets[0].owner.base, 0.0
    else:
        x, t = _as_point(targets[0])
        centre = x.base
    out = []
    capped = 0
    for _ in replica_range(replicas, 'Clans', verbose):
        cache = FreeProcessCache(universe, rng)
        roots = [cache.plant(q) if isinstance(q, Contour) else q for q in targets]
        try:
            out.append(ClanStats.of(build_clan(roots, cache, cap), centre, t))
        except CapExceeded:
            capped += 1
    if capped and verbose:
        standard_logging(dict(capped=capped, replicas=replicas), "Clan cap reached:")
    return out, capped


def clans_share_cylinder(a: Clan, b: Clan):
    return any(c in b for c in a.nodes)


def sharing_probability(universe: ContourUniverse, x: Plaquette, y: Plaquette, replicas, rng: np.random.Generator,
                        cap=CLAN_CAP):
    """Fraction of replicas in which the clans of `(x, 0)` and `(y, 0)`, built over one free process, meet."""
    hits = 0
    done = 0
    for _ in range(replicas):
        cache = FreeProcessCache(universe, rng)
        try:
            hits += clans_share_cylinder(build_clan([x], cache, cap), build_clan([y], cache, cap))
            done += 1
        except CapExceeded:
            continue
    return hits / done if done else math.nan
