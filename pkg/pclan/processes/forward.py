"""
Finite-volume loss-network dynamics built mark by mark from a marked Poisson process of contour births.
"""
import heapq
import itertools
from collections import Counter
from typing import NamedTuple

import numpy as np

from pclan.lattice.geometry import Box, Contour, incompatible
from pclan.lattice.catalog import WeightedCatalog
from pclan.utils import IncompatibleConfiguration

INITIAL = 'initial'
KEPT = 'kept'
ERASED = 'erased'
DEATH = 'death'

_uids = itertools.count()


class Cylinder:
    """
    A space-time cylinder: a contour basis alive on the interval `[birth, death)`.

    The birth may be `None` while it is only known to lie before the generated horizon of a backward construction.
    """
    __slots__ = ('basis', 'birth', 'death', 'uid')

    def __init__(self, basis: Contour, birth, death):
        if birth is not None and not death > birth:
            raise ValueError("Cylinder lifetime must be positive: born {} dies {}".format(birth, death))
        self.basis = basis
        self.birth = birth
        self.death = death
        self.uid = next(_uids)

    @classmethod
    def from_lifetime(cls, basis, birth, lifetime):
        return cls(basis, birth, birth + lifetime)

    @property
    def lifetime(self):
        return None if self.birth is None else self.death - self.birth

    def alive_at(self, t):
        return (self.birth is None or self.birth <= t) and t < self.death

    def __repr__(self):
        return "Cylinder({}, birth={}, death={:.4f})".format(self.basis, self.birth, self.death)


class Configuration(frozenset):
    """
    A set of pairwise compatible contours. Hashes and compares like the frozenset of its contours.
    """
    def __new__(cls, contours=(), validate=True):
        config = super().__new__(cls, contours)
        if validate:
            ordered = sorted(config)
            for i, g in enumerate(ordered):
                for t in ordered[i + 1:]:
                    if incompatible(g, t):
                        raise IncompatibleConfiguration("Contours {} and {} are incompatible".format(g, t))
        return config

    def __init__(self, contours=(), validate=True):
        super().__init__()

    @property
    def area(self):
        return sum(g.size for g in self)

    def to_json(self):
        return [g.to_json() for g in sorted(self)]

    def __repr__(self):
        return "Configuration({})".format(sorted(self))


class MarkStream:
    """
    Time ordered birth marks on a window `[0, t_end]`.

    Parameters
    ----------
    contours : list
               The contours the marks refer to, in canonical order.
    times : np.ndarray
            Birth times.
    indices : np.ndarray
              Index into `contours` for each mark.
    lifetimes : np.ndarray
                Exponential lifetimes.
    t_end : float
            Window length.
    """
    def __init__(self, contours, times, indices, lifetimes, t_end):
        order = np.lexsort((indices, times))
        self.contours = list(contours)
        self.times = np.asarray(times, dtype=float)[order]
        self.indices = np.asarray(indices, dtype=int)[order]
        self.lifetimes = np.asarray(lifetimes, dtype=float)[order]
        self.t_end = float(t_end)

    @classmethod
    def from_marks(cls, marks, t_end, contours=None):
        """Builds a stream from explicit `(time, contour, lifetime)` triples."""
        contours = sorted(set(g for _, g, _ in marks)) if contours is None else list(contours)
        lookup = {g: i for i, g in enumerate(contours)}
        return cls(contours, [m[0] for m in marks], [lookup[m[1]] for m in marks], [m[2] for m in marks], t_end)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        for t, i, s in zip(self.times, self.indices, self.lifetimes):
            yield float(t), self.contours[i], float(s)

    def cylinders(self):
        return [Cylinder.from_lifetime(g, t, s) for t, g, s in self]


def generate_marks(catalog: WeightedCatalog, box: Box, t_end, rng: np.random.Generator):
    """
    Superposes independent Poisson birth streams, rate `exp(-beta |g|)`, for the catalog contours inside `box`.

    Returns
    -------
    marks : MarkStream
    """
    entries = [(g, w) for g, w in catalog if box is None or box.contains_contour(g)]
    contours = [g for g, _ in entries]
    if not entries:
        return MarkStream([], [], [], [], t_end)
    weights = np.array([w for _, w in entries])
    total = weights.sum()
    n = rng.poisson(t_end * total)
    times = rng.uniform(0, t_end, size=n)
    indices = rng.choice(len(entries), size=n, p=weights / total)
    lifetimes = rng.exponential(1.0, size=n)
    return MarkStream(contours, times, indices, lifetimes, t_end)


class Event(NamedTuple):
    time: float
    kind: str
    contour: Contour


class Trajectory:
    """
    Event list of one evolution: initial cylinders, kept and erased births, and deaths of kept cylinders.
    """
    def __init__(self, initial: Configuration, events, t_end):
        self.initial = initial
        self.events = list(events)
        self.t_end = t_end

    def changes(self):
        return [e for e in self.events if e.kind in (KEPT, DEATH)]

    def states_at(self, times):
        """Configurations at each of the given (not necessarily sorted) times."""
        times = np.asarray(times, dtype=float)
        order = np.argsort(times, kind='stable')
        changes = self.changes()
        present = set(self.initial)
        out = [None] * len(times)
        k = 0
        for i in order:
            while k < len(changes) and changes[k].time <= times[i]:
                e = changes[k]
                if e.kind == KEPT:
                    present.add(e.contour)
                else:
                    present.discard(e.contour)
                k += 1
            out[i] = Configuration(present, validate=False)
        return out

    def state_at(self, t):
        return self.states_at([t])[0]

    @property
    def final_state(self):
        return self.state_at(self.t_end)

    def counts(self):
        return Counter(e.kind for e in self.events)


def _check_configuration(eta):
    if isinstance(eta, Configuration):
        return eta
    return Configuration(eta)


def initial_lifetimes(eta, rng: np.random.Generator):
    """Fresh exponential lifetimes for the cylinders of an initial configuration, in canonical contour order."""
    return {g: float(rng.exponential(1.0)) for g in sorted(eta)}


def evolve(eta0, marks: MarkStream, lifetimes=None, rng: np.random.Generator = None):
    """
    Runs the mark-by-mark construction.

    Every contour of `eta0` becomes a kept cylinder born at time 0. Marks are then visited in time order: a mark is
    kept when its basis is compatible with every kept cylinder alive at its birth, and erased otherwise.

    Parameters
    ----------
    eta0 : Configuration
           Initial configuration, must be compatible.
    marks : MarkStream
    lifetimes : dict, optional
                Lifetimes of the initial cylinders. Drawn from `rng` when missing.
    rng : np.random.Generator, optional

    Returns
    -------
    trajectory : Trajectory
    """
    eta0 = _check_configuration(eta0)
    if lifetimes is None:
        if eta0 and rng is None:
            raise ValueError("Initial cylinders need lifetimes or a generator to draw them")
        lifetimes = initial_lifetimes(eta0, rng) if eta0 else dict()

    occupied = Counter()
    deaths = []
    events = []
    order = itertools.count()
    for g in sorted(eta0):
        occupied.update(g.vertices)
        heapq.heappush(deaths, (lifetimes[g], next(order), g))
        events.append(Event(0.0, INITIAL, g))

    def bury(until):
        while deaths and deaths[0][0] <= until:
            t, _, g = heapq.heappop(deaths)
            occupied.subtract(g.vertices)
            events.append(Event(t, DEATH, g))

    for t, g, s in marks:
        bury(t)
        if any(occupied[v] > 0 for v in g.vertices):
            events.append(Event(t, ERASED, g))
        else:
            occupied.update(g.vertices)
            heapq.heappush(deaths, (t + s, next(order), g))
            events.append(Event(t, KEPT, g))
    bury(marks.t_end)
    return Trajectory(eta0, events, marks.t_end)


class Coupling:
    """Two trajectories driven by the same marks and sharing initial lifetimes on common contours."""
    def __init__(self, full: Trajectory, empty: Trajectory):
        self.full = full
        self.empty = empty

    def discrepancy(self, times):
        a = self.full.states_at(times)
        b = self.empty.states_at(times)
        return np.array([len(x.symmetric_difference(y)) for x, y in zip(a, b)])

    def coalescence_time(self):
        """First time after which both states agree until the end of the window, infinite if they never do."""
        times = sorted(set([0.0] + [e.time for e in self.full.changes()] + [e.time for e in self.empty.changes()]))
        gaps = self.discrepancy(times)
        if gaps[-1] != 0:
            return np.inf
        nonzero = np.flatnonzero(gaps)
        return times[0] if len(nonzero) == 0 else times[nonzero[-1] + 1]


def couple(xi_full, xi_empty, marks: MarkStream, lifetimes=None, rng: np.random.Generator = None):
    """
    Evolves two initial configurations with identical marks.

    Parameters
    ----------
    xi_full, xi_empty : Configuration
    marks : MarkStream
    lifetimes : dict, optional
                Lifetimes for the union of both initial configurations, drawn from `rng` when missing.
    rng : np.random.Generator, optional

    Returns
    -------
    coupling : Coupling
    """
    xi_full = _check_configuration(xi_full)
    xi_empty = _check_configuration(xi_empty)
    if lifetimes is None:
        union = xi_full | xi_empty
        if union and rng is None:
            raise ValueError("Initial cylinders need lifetimes or a generator to draw them")
        lifetimes = initial_lifetimes(union, rng) if union else dict()
    return Coupling(evolve(xi_full, marks, lifetimes), evolve(xi_empty, marks, lifetimes))


def packed_configuration(contours):
    """Greedy maximal compatible configuration, taking contours in the given order."""
    chosen = []
    used = set()
    for g in contours:
        if used.isdisjoint(g.vertices):
            chosen.append(g)
            used.update(g.vertices)
    return Configuration(chosen, validate=False)


def regeneration_times(marks: MarkStream, initial_deaths=()):
    """
    Instants in `[0, t_end]` at which no cylinder (initial or born from a mark) is alive.

    From any such instant on, the evolved state no longer depends on the initial configuration.
    """
    horizon = max(initial_deaths, default=0.0)
    out = []
    for t, _, s in marks:
        if horizon <= t:
            out.append(horizon)
        horizon = max(horizon, t + s)
    if horizon <= marks.t_end:
        out.append(horizon)
    return out


def generator_rates(eta, contours, beta):
    """
    Jump rates out of `eta`: births at `exp(-beta |g|)` for every addable contour, deaths at rate one.

    Returns
    -------
    births, deaths : dict
    """
    eta = _check_configuration(eta)
    used = set(v for g in eta for v in g.vertices)
    births = {g: float(np.exp(-beta * g.size)) for g in contours if g not in eta and used.isdisjoint(g.vertices)}
    deaths = {g: 1.0 for g in eta}
    return births, deaths


def long_run_states(catalog: WeightedCatalog, box: Box, epochs, rng: np.random.Generator, spacing=1.0,
                    burn_in=10.0, eta0=()):
    """
    Configurations read off one long forward run at `epochs` evenly spaced times after a burn in.
    """
    t_end = burn_in + spacing * epochs
    marks = generate_marks(catalog, box, t_end, rng)
    trajectory = evolve(Configuration(eta0), marks, rng=rng)
    return trajectory.states_at(burn_in + spacing * np.arange(1, epochs + 1) - spacing / 2)
