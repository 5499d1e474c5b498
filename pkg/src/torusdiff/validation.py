"""Argument checks shared by the estimator and the command line."""

import numbers

import numpy as np

from .diffusion import PathSample
from .exceptions import DomainError
from .inference import as_paths
from .special import TWO_PI


def check_angles(theta, name="theta"):
    """Finite float array of angles, wrapped into [0, 2 pi)."""
    a = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} must be finite")
    return np.mod(a, TWO_PI)


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_level(value, name="alpha"):
    if not isinstance(value, numbers.Real) or not 0 < value < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def check_paths(X, delta=None, dim=1):
    """Normalize estimator input to a list of :class:`PathSample`.

    ``X`` may be a PathSample, a list of them, a 1-d angle array (one path)
    or a 2-d array with one path per row; arrays need ``delta``.
    """
    if delta is not None:
        check_positive(delta, "delta")
    if not isinstance(X, PathSample) and not (isinstance(X, (list, tuple)) and X
                                               and isinstance(X[0], PathSample)):
        X = check_angles(X, "X")
        if X.ndim == 0 or X.shape[-1] < 2:
            raise DomainError("each path needs at least two observations")
    paths = as_paths(X, delta)
    for p in paths:
        if p.dim != dim:
            raise DomainError(f"expected {dim}-dimensional paths, got {p.dim}")
        if p.n < 1:
            raise DomainError("each path needs at least two observations")
    return paths
