import math

import numpy as np

from pclan.lattice.geometry import Box, Contour
from pclan.lattice.catalog import window_catalog
from pclan.processes.forward import Configuration
from pclan.utils import TooLarge

NODE_GUARD = 2 ** 25


def _conflict_masks(contours):
    index_by_vertex = dict()
    for i, g in enumerate(contours):
        for v in g.vertices:
            index_by_vertex.setdefault(v, []).append(i)
    masks = []
    for g in contours:
        mask = 0
        for v in g.vertices:
            for j in index_by_vertex[v]:
                mask |= 1 << j
        masks.append(mask)
    return masks


def enumerate_X(box: Box, n_max, contours=None, guard=NODE_GUARD):
    """
    Every set of pairwise compatible contours inside `box`, the empty set included.

    Backtracks over the catalog order, skipping contours that conflict with one already chosen.

    Parameters
    ----------
    box : Box
    n_max : int
            Contour size cutoff.
    contours : list, optional
               Use these contours instead of the catalog of `box`.
    guard : int
            Maximum number of search nodes before giving up with `TooLarge`.

    Returns
    -------
    configurations : list
                     `Configuration`s in the order found.
    """
    if contours is None:
        contours = window_catalog(box, 1.0, n_max).contours
    contours = list(contours)
    masks = _conflict_masks(contours)
    found = []
    nodes = 0
    stack = [(0, 0, ())]
    while stack:
        start, blocked, chosen = stack.pop()
        nodes += 1
        if nodes > guard:
            raise TooLarge("More than {} configurations in {} with n_max={}".format(guard, box, n_max))
        found.append(Configuration((contours[i] for i in chosen), validate=False))
        for j in range(len(contours) - 1, start - 1, -1):
            if not (blocked >> j) & 1:
                stack.append((j + 1, blocked | masks[j], chosen + (j,)))
    return found


class ExactMeasure:
    """
    The finite-volume contour measure, probability proportional to exp(-beta * total area), tabulated in full.

    Parameters
    ----------
    box : Box
    beta : float
    configurations : list
                     All compatible configurations of the volume.
    contours : list
               The contours of the volume.
    """
    def __init__(self, box, beta, configurations, contours):
        self.box = box
        self.beta = float(beta)
        self.configurations = list(configurations)
        self.contours = list(contours)
        areas = np.array([c.area for c in self.configurations], dtype=float)
        weights = np.exp(-self.beta * areas)
        self.partition_function = float(math.fsum(weights))
        self.probabilities = weights / self.partition_function
        self._index = {c: i for i, c in enumerate(self.configurations)}

    def __len__(self):
        return len(self.configurations)

    def __contains__(self, config):
        return frozenset(config) in self._index

    def probability(self, config):
        i = self._index.get(frozenset(config))
        return 0.0 if i is None else float(self.probabilities[i])

    def marginal(self, gamma: Contour):
        return expectation(self, lambda c: gamma in c)

    def as_dict(self):
        return {c: float(p) for c, p in zip(self.configurations, self.probabilities)}

    def to_json(self):
        return dict(beta=self.beta, box=list(self.box.key()) if self.box is not None else None,
                    partition_function=self.partition_function,
                    table=[dict(configuration=c.to_json(), probability=float(p))
                           for c, p in zip(self.configurations, self.probabilities)])


def measure(box: Box, beta, n_max, contours=None, guard=NODE_GUARD):
    if contours is None:
        contours = window_catalog(box, beta, n_max).contours
    return ExactMeasure(box, beta, enumerate_X(box, n_max, contours=contours, guard=guard), contours)


def expectation(measure: ExactMeasure, observable):
    """Exact weighted sum of `observable(configuration)` over the table."""
    values = np.array([float(observable(c)) for c in measure.configurations])
    return float(np.dot(values, measure.probabilities))


def covariance(measure: ExactMeasure, f, g):
    return expectation(measure, lambda c: f(c) * g(c)) - expectation(measure, f) * expectation(measure, g)


def detailed_balance_pairs(measure: ExactMeasure):
    """
    Every pair `(eta, gamma)` with `eta + gamma` also compatible, with both sides of the balance identity:
    `mu(eta) exp(-beta |gamma|)` and `mu(eta + gamma)` (the death rate being one).
    """
    pairs = []
    for config, p in zip(measure.configurations, measure.probabilities):
        for gamma in measure.contours:
            if gamma in config:
                continue
            bigger = frozenset(config | {gamma})
            if bigger in measure:
                pairs.append((config, gamma, float(p) * math.exp(-measure.beta * gamma.size),
                              measure.probability(bigger)))
    return pairs
