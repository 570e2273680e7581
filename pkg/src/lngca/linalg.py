"""Dense matrix primitives: centering, whitening, orthogonalization and the
signed-permutation error between two sets of unmixing rows.

Data matrices follow the row-per-observation convention throughout, so a
whitened sample is ``Z = (Y - mean) @ H.T`` and components are ``Z @ W.T``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._validation import (
    InputError,
    SingularCovarianceError,
    check_random_state,
    check_sample_matrix,
    check_square,
)

EIGEN_FLOOR = 1e-12


@dataclass(frozen=True)
class WhiteningResult:
    """Whitened data together with the map that produced it.

    Attributes
    ----------
    Z : ndarray, shape (n, p)
        Whitened sample, ``Z = (Y - mean) @ H.T``.
    H : ndarray, shape (p, p)
        Symmetric inverse square root of the sample covariance.
    Hinv : ndarray, shape (p, p)
        Symmetric square root of the sample covariance.
    mean : ndarray, shape (p,)
        Column means removed before whitening.
    """

    Z: np.ndarray
    H: np.ndarray
    Hinv: np.ndarray
    mean: np.ndarray

    def inverse(self, Z=None):
        """Map whitened rows back to the observation scale."""
        Z = self.Z if Z is None else np.asarray(Z, dtype=float)
        return Z @ self.Hinv.T + self.mean


@dataclass(frozen=True)
class SignedPermutation:
    """Row reordering plus per-row sign flips.

    ``perm[i]`` is the row of the estimate matched to reference row ``i`` and
    ``signs[i]`` the sign applied to it, so ``apply(What)[i] = signs[i] * What[perm[i]]``.
    """

    perm: np.ndarray
    signs: np.ndarray

    def apply(self, M):
        M = np.asarray(M)
        return self.signs[:, None] * M[self.perm]

    def apply_columns(self, X):
        """Same reordering applied to the columns of a component matrix."""
        X = np.asarray(X)
        return X[:, self.perm] * self.signs[None, :]

    @classmethod
    def identity(cls, q):
        return cls(np.arange(q), np.ones(q))


def center(X):
    """Subtract column means.

    Returns
    -------
    Xc : ndarray, shape (n, p)
    mean : ndarray, shape (p,)
    """
    X = check_sample_matrix(X)
    mean = X.mean(axis=0)
    return X - mean, mean


def covariance(X):
    """Sample covariance with divisor n, matching the whitening convention."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]


def _sym_sqrt_pair(C):
    evals, evecs = np.linalg.eigh(C)
    largest = evals[-1]
    if largest <= 0 or evals[0] < EIGEN_FLOOR * largest:
        raise SingularCovarianceError(evals[0], largest)
    root = np.sqrt(evals)
    H = (evecs / root) @ evecs.T
    Hinv = (evecs * root) @ evecs.T
    return H, Hinv


def whiten(Xc, mean=None):
    """Whiten centered data with the symmetric inverse square root of its covariance.

    Parameters
    ----------
    Xc : array-like, shape (n, p)
        Centered observations. Re-centering is not performed here, so pass the
        output of :func:`center`.
    mean : array-like, shape (p,), optional
        Mean that was removed, stored on the result for inversion.

    Returns
    -------
    WhiteningResult
    """
    Xc = check_sample_matrix(Xc)
    p = Xc.shape[1]
    H, Hinv = _sym_sqrt_pair(Xc.T @ Xc / Xc.shape[0])
    Z = Xc @ H.T
    mean = np.zeros(p) if mean is None else np.asarray(mean, dtype=float)
    return WhiteningResult(Z=Z, H=H, Hinv=Hinv, mean=mean)


def center_whiten(Y):
    Xc, mean = center(Y)
    return whiten(Xc, mean)


def sym_orthogonalize(W):
    """Symmetric orthogonalization ``(W W^T)^{-1/2} W`` of the rows of ``W``.

    Computed from the thin SVD ``W = U S V^T`` as ``U V^T``, which is the
    orthonormal-row matrix closest to ``W`` in Frobenius norm and spans the
    same row space.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[0] > W.shape[1]:
        raise InputError("cannot orthonormalize %d rows in dimension %d" % W.shape)
    U, s, Vt = np.linalg.svd(W, full_matrices=False)
    if not np.all(np.isfinite(s)) or s[-1] <= s[0] * 1e-12 or s[0] == 0:
        raise np.linalg.LinAlgError("matrix is rank deficient (singular values %s)" % s)
    return U @ Vt


def random_orthonormal(p, q, random_state=None):
    """Draw ``q`` orthonormal rows in dimension ``p`` from a Gaussian matrix."""
    if q > p or q < 1:
        raise InputError("need 1 <= q <= p, got q=%r, p=%r" % (q, p))
    rng = check_random_state(random_state)
    return sym_orthogonalize(rng.standard_normal((q, p)))


def random_orthogonal(p, random_state=None):
    """Haar-distributed orthogonal matrix (QR with sign correction)."""
    rng = check_random_state(random_state)
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def random_mixing(p, random_state=None):
    """Random mixing matrix whose condition number is uniform on [1, 2].

    Singular values are linearly spaced between 1 and the drawn condition
    number; left and right factors are Haar orthogonal.
    """
    if p < 1:
        raise InputError("p must be positive, got %r" % (p,))
    rng = check_random_state(random_state)
    if p == 1:
        return np.ones((1, 1))
    kappa = rng.uniform(1.0, 2.0)
    U = random_orthogonal(p, rng)
    V = random_orthogonal(p, rng)
    d = np.linspace(kappa, 1.0, p)
    return (U * d) @ V.T


def hungarian(cost):
    """Minimum-cost perfect assignment on a square cost matrix.

    Returns
    -------
    assignment : ndarray of int, shape (q,)
        ``assignment[i]`` is the column matched to row ``i``.
    total : float
    """
    cost = check_square(cost)
    rows, cols = linear_sum_assignment(cost)
    assignment = np.empty(cost.shape[0], dtype=int)
    assignment[rows] = cols
    return assignment, float(cost[rows, cols].sum())


def signed_perm_error(W0, What):
    """Error between two sets of unmixing rows up to sign and order.

    ``err = min_Q ||W0 - Q(What)||_F^2 / sqrt(p q)`` where ``Q`` ranges over
    signed row permutations. The minimum separates over matched pairs once
    the per-pair sign is chosen, so it is an assignment problem.

    Returns
    -------
    err : float
    Q : SignedPermutation
        Optimal alignment, ``Q.apply(What)`` is closest to ``W0``.
    """
    W0 = np.atleast_2d(np.asarray(W0, dtype=float))
    What = np.atleast_2d(np.asarray(What, dtype=float))
    if W0.shape != What.shape:
        raise InputError(
            "shape mismatch: reference %r vs estimate %r" % (W0.shape, What.shape)
        )
    q, p = W0.shape
    plus = ((W0[:, None, :] - What[None, :, :]) ** 2).sum(axis=2)
    minus = ((W0[:, None, :] + What[None, :, :]) ** 2).sum(axis=2)
    cost = np.minimum(plus, minus)
    assignment, total = hungarian(cost)
    signs = np.where(
        plus[np.arange(q), assignment] <= minus[np.arange(q), assignment], 1.0, -1.0
    )
    return total / np.sqrt(p * q), SignedPermutation(assignment, signs)

