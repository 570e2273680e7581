"""Resampling test for the number of non-Gaussian components.

Under ``H0(k)`` exactly ``k - 1`` components are non-Gaussian. The data are
fit with the max-min estimator at ``q = k - 1``; the trailing ``p - k + 1``
components are then replaced by fresh Gaussian noise, re-mixed with the
estimated mixing matrix, and re-fit. Comparing the discrepancy of the
``k``-th ordered component (or the sum of the first ``k``) against these
replicates gives the p-value. No rows of the data are resampled.
"""

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from ._validation import InputError, check_sample_matrix
from .discrepancy import ConvergenceError, DiscrepancyKind, as_kind
from .estimator import EstimatorOptions, multi_restart
from .sources import gen_gaussian

logger = logging.getLogger(__name__)

METHODS = ("current", "cumulative")


@dataclass(frozen=True)
class TestConfig:
    """Settings of the sequential test.

    ``estimator_opts.restarts`` defaults to 1 here: the selected dimension is
    much less sensitive to initialization than the components themselves.
    """

    __test__ = False  # not a pytest class

    kind: DiscrepancyKind = field(default_factory=DiscrepancyKind)
    B: int = 200
    alpha: float = 0.05
    estimator_opts: EstimatorOptions | None = None
    mode: str = "current"
    seed: int = 0

    def __post_init__(self):
        kind = as_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.B < 1:
            raise InputError("B must be >= 1, got %r" % (self.B,))
        if not 0 < self.alpha < 1:
            raise InputError("alpha must lie in (0, 1), got %r" % (self.alpha,))
        if self.mode not in METHODS:
            raise InputError("mode must be one of %s, got %r" % (METHODS, self.mode))
        opts = self.estimator_opts
        if opts is None:
            opts = EstimatorOptions(kind=kind, restarts=1)
        elif opts.kind != kind:
            opts = replace(opts, kind=kind)
        object.__setattr__(self, "estimator_opts", opts)


@dataclass
class KTestResult:
    """Outcome of testing ``H0(k)``."""

    k: int
    observed_curr: float
    observed_cumu: float
    resampled_curr: np.ndarray
    resampled_cumu: np.ndarray
    p_curr: float
    p_cumu: float

    def pvalue(self, mode="current"):
        return self.p_curr if mode == "current" else self.p_cumu

    def critical_value(self, level, mode="current"):
        """Upper ``level`` quantile of the resampled statistic."""
        sample = self.resampled_curr if mode == "current" else self.resampled_cumu
        return float(np.quantile(sample, 1.0 - level))

    def to_dict(self):
        return {
            "k": self.k,
            "observed_curr": self.observed_curr,
            "observed_cumu": self.observed_cumu,
            "p_curr": self.p_curr,
            "p_cumu": self.p_cumu,
            "resampled_curr": self.resampled_curr.tolist(),
            "resampled_cumu": self.resampled_cumu.tolist(),
        }


@dataclass
class SelectionResult:
    q_selected: int
    tests_run: list
    alpha_corrected: float
    path: list
    mode: str = "current"
    search: str = "sweep"

    def to_dict(self):
        return {
            "q_selected": self.q_selected,
            "alpha_corrected": self.alpha_corrected,
            "mode": self.mode,
            "search": self.search,
            "path": list(self.path),
            "tests": [t.to_dict() for t in self.tests_run],
        }


def pvalue(observed, resampled):
    """Fraction of resampled statistics at least as large as the observed one."""
    resampled = np.asarray(resampled, dtype=float)
    return np.count_nonzero(resampled >= observed) / resampled.size


def _replicate(Xs, W, n, p, k, opts, rng):
    G = gen_gaussian(n, p - k + 1, rng)
    Xb = np.column_stack([Xs, G])
    Zb = Xb @ W
    est = multi_restart(Zb, k - 1, opts, "maxmin", random_state=rng)
    return est.disc[k - 1], est.disc[:k].sum()


def test_k(Z, k, cfg=None):
    """Test ``H0(k)``: exactly ``k - 1`` non-Gaussian components.

    Parameters
    ----------
    Z : ndarray, shape (n, p)
        Whitened data.
    k : int
        ``1 <= k <= p``.
    cfg : TestConfig

    Returns
    -------
    KTestResult
    """
    cfg = TestConfig() if cfg is None else cfg
    Z = check_sample_matrix(Z, "Z")
    n, p = Z.shape
    if not 1 <= k <= p:
        raise InputError("k must lie in [1, %d], got %r" % (p, k))
    opts = cfg.estimator_opts
    est = multi_restart(
        Z, k - 1, opts, "maxmin", random_state=np.random.default_rng([cfg.seed, k])
    )
    W = est.W
    Xs = est.components[:, : k - 1]
    obs_curr = float(est.disc[k - 1])
    obs_cumu = float(est.disc[:k].sum())

    curr = np.empty(cfg.B)
    cumu = np.empty(cfg.B)
    for b in range(cfg.B):
        # each replicate owns a stream keyed by (seed, k, b)
        rng = np.random.default_rng([cfg.seed, k, b + 1])
        try:
            curr[b], cumu[b] = _replicate(Xs, W, n, p, k, opts, rng)
        except (ConvergenceError, np.linalg.LinAlgError, RuntimeError) as exc:
            logger.warning("replicate %d of k=%d failed (%s); retrying", b, k, exc)
            curr[b], cumu[b] = _replicate(Xs, W, n, p, k, opts, rng)
    return KTestResult(
        k=k,
        observed_curr=obs_curr,
        observed_cumu=obs_cumu,
        resampled_curr=curr,
        resampled_cumu=cumu,
        p_curr=pvalue(obs_curr, curr),
        p_cumu=pvalue(obs_cumu, cumu),
    )


def select_q_sweep(Z, cfg=None, tester=None):
    """Test ``k = 1, 2, ...`` in order and stop at the first non-rejection.

    The selected dimension is one less than the first ``k`` that is not
    rejected, or ``p`` when every test rejects. ``tester(Z, k, cfg)`` can
    replace :func:`test_k`.
    """
    cfg = TestConfig() if cfg is None else cfg
    tester = test_k if tester is None else tester
    Z = check_sample_matrix(Z, "Z")
    p = Z.shape[1]
    tests, path = [], []
    q = p
    for k in range(1, p + 1):
        res = tester(Z, k, cfg)
        tests.append(res)
        path.append(k)
        if res.pvalue(cfg.mode) >= cfg.alpha:
            q = k - 1
            break
    return SelectionResult(q, tests, cfg.alpha, path, cfg.mode, "sweep")


def n_binary_tests(p):
    """Bonferroni divisor ``ceil(log2 p)``, at least 1."""
    return max(1, math.ceil(math.log2(p)))


def select_q_binary(Z, cfg=None, tester=None):
    """Bisect on ``k`` at the Bonferroni-corrected level ``alpha / ceil(log2 p)``.

    Keeps the largest rejected ``k`` (``lo``, initially 0) and the smallest
    non-rejected ``k`` (``hi``, initially ``p + 1``) and tests their midpoint
    until they are adjacent; the selected dimension is ``lo``.
    """
    cfg = TestConfig() if cfg is None else cfg
    tester = test_k if tester is None else tester
    Z = check_sample_matrix(Z, "Z")
    p = Z.shape[1]
    alpha_c = cfg.alpha / n_binary_tests(p)
    lo, hi = 0, p + 1
    tests, path = [], []
    while hi - lo > 1:
        k = (lo + hi) // 2
        res = tester(Z, k, cfg)
        tests.append(res)
        path.append(k)
        if res.pvalue(cfg.mode) < alpha_c:
            lo = k
        else:
            hi = k
    return SelectionResult(lo, tests, alpha_c, path, cfg.mode, "binary")


def select_q(Z, cfg=None, search="sweep", tester=None):
    if search == "sweep":
        return select_q_sweep(Z, cfg, tester)
    if search == "binary":
        return select_q_binary(Z, cfg, tester)
    raise InputError("search must be 'sweep' or 'binary', got %r" % (search,))
