import zlib

import numpy as np
import tqdm


class PClanException(BaseException):
    """
    Base exception for contour, sampler and bound failures.
    """
    pass


class PClanConfigException(BaseException):
    """
    Exception to be triggered when experiment-configuration parsing fails.
    """
    pass


class CutoffTooSmall(PClanException):
    """
    Exception to be triggered when a contour size cutoff admits no closed contour.
    """
    pass


class TailDivergent(PClanException):
    """
    Exception to be triggered when the truncation tail cannot be certified with the crude contour count.
    """
    pass


class RadiusExceeded(PClanException):
    """
    Exception to be triggered when a generating function is evaluated beyond its certified radius.
    """
    pass


class SubcriticalityViolated(PClanException):
    """
    Exception to be triggered when an operation requires the dominating branching process to be subcritical.
    """
    pass


class CapExceeded(PClanException):
    """
    Exception to be triggered when a branching population or clan grows past its safety cap.
    """
    def __init__(self, message, size=None, depth=None):
        super().__init__(message)
        self.size = size
        self.depth = depth


class EmptyRegion(PClanException):
    """
    Exception to be triggered when no catalog contour meets the requested region.
    """
    pass


class TooLarge(PClanException):
    """
    Exception to be triggered when exhaustive enumeration would exceed its node guard.
    """
    pass


class IncompatibleConfiguration(PClanException):
    """
    Exception to be triggered when a configuration holds two incompatible contours.
    """
    pass


class InconsistentClan(PClanException):
    """
    Exception to be triggered when a clan is missing ancestor links needed for resolution.
    """
    pass


class DegenerateVariance(PClanException):
    """
    Exception to be triggered when an estimated asymptotic variance is not strictly positive.
    """
    pass


class TooFewContours(PClanException):
    """
    Exception to be triggered when a window holds too few contours for a counting statistic.
    """
    pass


def derive_seed_sequence(seed, experiment_id='', replica=0):
    """
    Derives the seed sequence for one replica of one experiment.

    Parameters
    ----------
    seed : int
           The root seed of the run.
    experiment_id : str
                    Identifier of the experiment, hashed so any string can be used.
    replica : int
              Replica index.

    Returns
    -------
    sequence : np.random.SeedSequence
    """
    return np.random.SeedSequence([int(seed), zlib.crc32(str(experiment_id).encode()), int(replica)])


def derive_rng(seed, experiment_id='', replica=0):
    return np.random.default_rng(derive_seed_sequence(seed, experiment_id, replica))


def standard_logging(metrics: dict, start_message="Summary"):
    """
    Writes a single line of named values, without disturbing any active progress bars.
    """
    for m, v in metrics.items():
        if isinstance(v, float):
            start_message += " {}: {:.3e} |".format(m, v) if v != 0 and abs(v) < 1e-2 else " {}: {:.3f} |".format(m, v)
        else:
            start_message += " {}: {} |".format(m, v)
    tqdm.tqdm.write(start_message)


def replica_range(replicas, desc, verbose=True):
    if verbose:
        return tqdm.trange(replicas, desc=desc, unit='replica')
    return range(replicas)
