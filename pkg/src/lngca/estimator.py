"""Fixed-point estimation of the unmixing matrix on whitened data.

Two estimators share one fixed-point step. The *max* estimator keeps ``q``
orthonormal rows and maximizes their total discrepancy. The *max-min*
estimator keeps a full orthogonal ``p x p`` matrix, re-sorts its rows by
discrepancy at every iteration, and treats the last ``p - q`` rows as noise
whose discrepancy is minimized.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from ._validation import InputError, check_n_components, check_random_state, check_sample_matrix
from .discrepancy import ConvergenceError, DiscrepancyKind, as_kind, evaluate
from .linalg import random_orthonormal, sym_orthogonalize

logger = logging.getLogger(__name__)

JITTER = 1e-8


@dataclass(frozen=True)
class EstimatorOptions:
    """Settings shared by the max and max-min estimators.

    ``restarts=None`` means one restart per dimension.
    """

    kind: DiscrepancyKind = field(default_factory=DiscrepancyKind)
    max_iter: int = 100
    tol: float = 1e-7
    restarts: int | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", as_kind(self.kind))
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1, got %r" % self.max_iter)
        if not self.tol > 0:
            raise InputError("tol must be positive, got %r" % self.tol)
        if self.restarts is not None and self.restarts < 1:
            raise InputError("restarts must be >= 1, got %r" % self.restarts)

    def n_restarts(self, p):
        return p if self.restarts is None else self.restarts


@dataclass
class Estimate:
    """Result of one estimator run.

    Attributes
    ----------
    W : ndarray, shape (r, p)
        Orthonormal unmixing rows sorted by decreasing discrepancy; ``r = q``
        for the max estimator and ``r = p`` for max-min.
    components : ndarray, shape (n, r)
        ``Z @ W.T`` with every column scaled to unit sample variance.
    disc : ndarray, shape (r,)
        Discrepancy of each component, non-increasing.
    objective : float
    q : int
        Number of leading rows treated as signal.
    """

    W: np.ndarray
    components: np.ndarray
    disc: np.ndarray
    objective: float
    iterations: int
    converged: bool
    q: int
    method: str
    restart_index: int = 0
    restart_objectives: list = field(default_factory=list)

    @property
    def W_signal(self):
        return self.W[: self.q]

    @property
    def W_noise(self):
        return self.W[self.q:]

    @property
    def signal(self):
        return self.components[:, : self.q]


def _standardized_projections(Z, W):
    X = Z @ W.T
    X = X - X.mean(axis=0)
    sd = np.sqrt(np.mean(X * X, axis=0))
    if np.any(sd == 0):
        raise np.linalg.LinAlgError("a projection of the data is constant")
    return X / sd


def _evaluate_rows(Z, W, kind):
    X = _standardized_projections(Z, W)
    disc = np.empty(W.shape[0])
    scores = []
    for j in range(W.shape[0]):
        disc[j], sc = evaluate(kind, X[:, j])
        scores.append(sc)
    return disc, scores, X


def _update(Z, W, signs, scores):
    n = Z.shape[0]
    H1 = np.column_stack([sc.h1 for sc in scores])
    h2 = np.array([sc.h2bar for sc in scores])
    U = H1.T @ Z / n - h2[:, None] * W
    return signs[:, None] * U


def _orthogonalize_with_retry(U, rng):
    try:
        return sym_orthogonalize(U)
    except np.linalg.LinAlgError:
        rng = check_random_state(rng)
        scale = JITTER * max(1.0, np.abs(U).max())
        return sym_orthogonalize(U + scale * rng.standard_normal(U.shape))


def fixed_point_step(W, Z, signs, kind, random_state=None, scores=None):
    """One fixed-point update of every row followed by symmetric orthogonalization.

    Row ``j`` moves to ``signs[j] * (Z.T @ h1_j / n - h2bar_j * w_j)`` where
    ``h1_j, h2bar_j`` are the score of the standardized projection ``Z @ w_j``.

    Parameters
    ----------
    W : ndarray, shape (r, p)
        Current orthonormal rows.
    Z : ndarray, shape (n, p)
        Whitened data.
    signs : array-like of {+1, -1}, shape (r,)
    kind : DiscrepancyKind or str
    random_state : optional
        Source of the jitter used if the update is rank deficient.
    scores : list of Score, optional
        Precomputed scores for the rows of ``W``.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    signs = np.asarray(signs, dtype=float)
    if scores is None:
        _, scores, _ = _evaluate_rows(Z, W, as_kind(kind))
    U = _update(Z, W, signs, scores)
    return _orthogonalize_with_retry(U, random_state)


def _alignment_change(W_new, W_old):
    return 1.0 - np.mean(np.abs(np.einsum("ij,ij->i", W_new, W_old)))


def _sorted_estimate(Z, W, kind, q, method, iterations, converged):
    disc, _, X = _evaluate_rows(Z, W, kind)
    order = np.argsort(-disc, kind="stable")
    W, disc, X = W[order], disc[order], X[:, order]
    if method == "max":
        objective = float(disc.sum())
    else:
        objective = float(disc[:q].sum() - disc[q:].sum())
    return Estimate(
        W=W,
        components=X,
        disc=disc,
        objective=objective,
        iterations=iterations,
        converged=converged,
        q=q,
        method=method,
    )


def _check_inputs(Z, q, W0, rows, allow_zero):
    Z = check_sample_matrix(Z, "Z")
    p = Z.shape[1]
    q = check_n_components(q, p, allow_zero=allow_zero)
    if W0 is not None:
        W0 = np.atleast_2d(np.asarray(W0, dtype=float))
        if W0.shape != (rows(p, q), p):
            raise InputError(
                "initial matrix has shape %r, expected %r" % (W0.shape, (rows(p, q), p))
            )
        W0 = sym_orthogonalize(W0)
    return Z, p, q, W0


def estimate_max(Z, q, opts=None, W0=None, random_state=None):
    """Maximize the total discrepancy of ``q`` orthonormal projections.

    Parameters
    ----------
    Z : ndarray, shape (n, p)
        Whitened data.
    q : int
        Number of non-Gaussian components, ``1 <= q <= p``.
    opts : EstimatorOptions, optional
    W0 : ndarray, shape (q, p), optional
        Initial rows; drawn at random from ``random_state`` when omitted.

    Returns
    -------
    Estimate
    """
    opts = EstimatorOptions() if opts is None else opts
    Z, p, q, W = _check_inputs(Z, q, W0, lambda p, q: q, allow_zero=False)
    rng = check_random_state(opts.seed if random_state is None else random_state)
    if W is None:
        W = random_orthonormal(p, q, rng)
    signs = np.ones(q)
    converged = False
    for it in range(1, opts.max_iter + 1):
        _, scores, _ = _evaluate_rows(Z, W, opts.kind)
        W_new = _orthogonalize_with_retry(_update(Z, W, signs, scores), rng)
        delta = _alignment_change(W_new, W)
        W = W_new
        if delta < opts.tol:
            converged = True
            break
    return _sorted_estimate(Z, W, opts.kind, q, "max", it, converged)


def estimate_maxmin(Z, q, opts=None, W0=None, random_state=None):
    """Maximize signal discrepancy while minimizing noise discrepancy.

    Each iteration evaluates all ``p`` components, sorts the rows by
    decreasing discrepancy (stable, so ties keep the previous order), flips
    the sign of the last ``p - q`` and applies one fixed-point step.

    Parameters
    ----------
    Z : ndarray, shape (n, p)
        Whitened data.
    q : int
        Number of non-Gaussian components, ``0 <= q <= p``.
    opts : EstimatorOptions, optional
    W0 : ndarray, shape (p, p), optional

    Returns
    -------
    Estimate
        ``objective = sum(disc[:q]) - sum(disc[q:])``.
    """
    opts = EstimatorOptions() if opts is None else opts
    Z, p, q, W = _check_inputs(Z, q, W0, lambda p, q: p, allow_zero=True)
    rng = check_random_state(opts.seed if random_state is None else random_state)
    if W is None:
        W = random_orthonormal(p, p, rng)
    signs = np.r_[np.ones(q), -np.ones(p - q)]
    converged = False
    for it in range(1, opts.max_iter + 1):
        disc, scores, _ = _evaluate_rows(Z, W, opts.kind)
        order = np.argsort(-disc, kind="stable")
        W = W[order]
        scores = [scores[i] for i in order]
        W_new = _orthogonalize_with_retry(_update(Z, W, signs, scores), rng)
        delta = _alignment_change(W_new, W)
        W = W_new
        if delta < opts.tol:
            converged = True
            break
    return _sorted_estimate(Z, W, opts.kind, q, "maxmin", it, converged)


ESTIMATORS = {"max": estimate_max, "maxmin": estimate_maxmin}


def multi_restart(Z, q, opts=None, which="maxmin", random_state=None):
    """Best of several runs from random orthonormal starting points.

    Starting matrices are drawn in sequence from one generator seeded by
    ``random_state`` (or ``opts.seed``), so a single restart reproduces a
    plain call of the estimator with the same seed. The run with the
    largest objective wins; ties go to the earliest restart.
    """
    opts = EstimatorOptions() if opts is None else opts
    if which not in ESTIMATORS:
        raise InputError("unknown estimator %r, expected 'max' or 'maxmin'" % (which,))
    Z = check_sample_matrix(Z, "Z")
    p = Z.shape[1]
    rows = q if which == "max" else p
    check_n_components(q, p, allow_zero=which == "maxmin")
    rng = check_random_state(opts.seed if random_state is None else random_state)
    m = opts.n_restarts(p)
    best = None
    objectives = []
    failures = []
    for r in range(m):
        W0 = random_orthonormal(p, rows, rng)
        try:
            est = ESTIMATORS[which](Z, q, opts, W0=W0, random_state=rng)
        except (ConvergenceError, np.linalg.LinAlgError) as exc:
            logger.warning("restart %d failed: %s", r, exc)
            failures.append("restart %d: %s" % (r, exc))
            objectives.append(np.nan)
            continue
        est.restart_index = r
        objectives.append(est.objective)
        if best is None or est.objective > best.objective:
            best = est
    if best is None:
        raise RuntimeError("all %d restarts failed:\n%s" % (m, "\n".join(failures)))
    best.restart_objectives = objectives
    return best
