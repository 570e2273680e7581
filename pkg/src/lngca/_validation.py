"""Input validation helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


class InputError(ValueError):
    """Raised when user-supplied data or parameters violate a precondition."""


class SingularCovarianceError(InputError):
    """Raised when the sample covariance cannot be inverted safely."""

    def __init__(self, eigenvalue, largest):
        self.eigenvalue = eigenvalue
        self.largest = largest
        super().__init__(
            "sample covariance is singular: smallest eigenvalue %.3e is below "
            "1e-12 times the largest (%.3e)" % (eigenvalue, largest)
        )


def check_sample_matrix(X, name="X", min_samples=2):
    """Return ``X`` as a finite 2-d float array with at least ``min_samples`` rows.

    1-d input is treated as a single column.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError("%s must be 2-d, got shape %r" % (name, X.shape))
    n, p = X.shape
    if n < min_samples:
        raise InputError(
            "%s needs at least %d samples, got %d" % (name, min_samples, n)
        )
    if p < 1:
        raise InputError("%s has no columns" % name)
    if not np.all(np.isfinite(X)):
        raise InputError("%s contains NaN or infinite values" % name)
    return X


def check_square(C, name="cost"):
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InputError("%s must be a square matrix, got shape %r" % (name, C.shape))
    if not np.all(np.isfinite(C)):
        raise InputError("%s contains NaN or infinite values" % name)
    return C


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    Accepts None, an int, a SeedSequence or an existing Generator (returned
    as-is so that callers can share a stream deliberately).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    if isinstance(seed, (list, tuple)):
        return np.random.default_rng(list(seed))
    raise InputError("cannot build a random generator from %r" % (seed,))


def check_n_components(q, p, allow_zero=False):
    lo = 0 if allow_zero else 1
    if not isinstance(q, numbers.Integral) or not lo <= q <= p:
        raise InputError(
            "number of non-Gaussian components must be an integer in [%d, %d], got %r"
            % (lo, p, q)
        )
    return int(q)
