"""Scikit-learn style estimator wrapping whitening, estimation and testing."""

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import InputError
from .discrepancy import KINDS, DiscrepancyKind
from .estimator import EstimatorOptions, multi_restart
from .linalg import center_whiten
from .qtest import TestConfig, select_q


class LNGCA(TransformerMixin, BaseEstimator):
    """Linear non-Gaussian component analysis.

    Separates ``n_components`` non-Gaussian signals from Gaussian noise in
    a linear mixture. The data are centered and whitened, an orthogonal
    unmixing matrix is fitted with the max-min (or max) fixed-point
    estimator, and components are sorted by decreasing discrepancy from
    Gaussianity.

    Parameters
    ----------
    n_components : int or 'auto', default='auto'
        Number of non-Gaussian components. ``'auto'`` selects it with the
        sequential resampling test.
    discrepancy : {'GPois', 'JB', 'Skew', 'Kurt'}, default='GPois'
    method : {'maxmin', 'max'}, default='maxmin'
    n_restarts : int or None, default=None
        Random starting points; ``None`` uses one per dimension.
    max_iter : int, default=100
    tol : float, default=1e-7
    gpois_df : float, default=6.0
    gpois_grid : int, default=500
    n_resamples : int, default=200
        Resamples per hypothesis when ``n_components='auto'``.
    alpha : float, default=0.05
    test_mode : {'current', 'cumulative'}, default='current'
    search : {'sweep', 'binary'}, default='sweep'
    random_state : int, Generator or None, default=None

    Attributes
    ----------
    n_components_ : int
        Number of signal components used.
    mean_ : ndarray of shape (n_features,)
    whitening_ : ndarray of shape (n_features, n_features)
        Symmetric inverse square root of the sample covariance.
    unmixing_ : ndarray of shape (n_rows, n_features)
        Orthonormal rows acting on whitened data; all ``p`` rows for
        ``method='maxmin'``, the ``q`` signal rows for ``'max'``.
    components_ : ndarray of shape (n_rows, n_features)
        ``unmixing_ @ whitening_``, acting on centered observations.
    mixing_ : ndarray of shape (n_features, n_rows)
        Pseudo-inverse of ``components_``.
    discrepancies_ : ndarray of shape (n_rows,)
        Non-increasing discrepancy of each component.
    objective_ : float
    n_iter_ : int
    converged_ : bool
    selection_ : SelectionResult or None
        Test results when ``n_components='auto'``.

    Examples
    --------
    >>> import numpy as np
    >>> from lngca import LNGCA
    >>> rng = np.random.default_rng(0)
    >>> S = np.column_stack([rng.uniform(-1, 1, 2000), rng.standard_normal(2000)])
    >>> X = S @ rng.standard_normal((2, 2))
    >>> model = LNGCA(n_components=1, discrepancy="JB", random_state=0).fit(X)
    >>> model.transform(X).shape
    (2000, 1)
    """

    def __init__(
        self,
        n_components="auto",
        *,
        discrepancy="GPois",
        method="maxmin",
        n_restarts=None,
        max_iter=100,
        tol=1e-7,
        gpois_df=6.0,
        gpois_grid=500,
        n_resamples=200,
        alpha=0.05,
        test_mode="current",
        search="sweep",
        random_state=None,
    ):
        self.n_components = n_components
        self.discrepancy = discrepancy
        self.method = method
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.tol = tol
        self.gpois_df = gpois_df
        self.gpois_grid = gpois_grid
        self.n_resamples = n_resamples
        self.alpha = alpha
        self.test_mode = test_mode
        self.search = search
        self.random_state = random_state

    def _options(self):
        if self.discrepancy not in KINDS:
            raise InputError("discrepancy must be one of %s, got %r" % (KINDS, self.discrepancy))
        if self.method not in ("maxmin", "max"):
            raise InputError("method must be 'maxmin' or 'max', got %r" % (self.method,))
        kind = DiscrepancyKind(self.discrepancy, self.gpois_df, self.gpois_grid)
        return EstimatorOptions(
            kind=kind, max_iter=self.max_iter, tol=self.tol, restarts=self.n_restarts
        )

    def _seeds(self):
        rs = self.random_state
        if isinstance(rs, np.random.Generator):
            return rs, int(rs.integers(2**63))
        ss = np.random.SeedSequence(rs)
        fit_ss, test_ss = ss.spawn(2)
        return np.random.default_rng(fit_ss), int(test_ss.generate_state(1)[0])

    def fit(self, X, y=None):
        """Fit the unmixing model.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : ignored

        Returns
        -------
        self
        """
        X = validate_data(self, X, dtype=np.float64, ensure_min_samples=2)
        p = X.shape[1]
        opts = self._options()
        fit_rng, test_seed = self._seeds()
        wr = center_whiten(X)

        self.selection_ = None
        if isinstance(self.n_components, str):
            if self.n_components != "auto":
                raise InputError("n_components must be an int or 'auto', got %r" % (self.n_components,))
            cfg = TestConfig(
                kind=opts.kind,
                B=self.n_resamples,
                alpha=self.alpha,
                mode=self.test_mode,
                seed=test_seed,
                estimator_opts=EstimatorOptions(
                    kind=opts.kind, max_iter=self.max_iter, tol=self.tol, restarts=1
                ),
            )
            self.selection_ = select_q(wr.Z, cfg, search=self.search)
            q = self.selection_.q_selected
        elif isinstance(self.n_components, numbers.Integral):
            q = int(self.n_components)
            if not 0 <= q <= p:
                raise InputError("n_components must lie in [0, %d], got %d" % (p, q))
        else:
            raise InputError("n_components must be an int or 'auto', got %r" % (self.n_components,))

        method = self.method
        if q == 0 and method == "max":
            raise InputError("method='max' needs at least one non-Gaussian component")
        est = multi_restart(wr.Z, q, opts, method, random_state=fit_rng)

        self.n_components_ = q
        self.mean_ = wr.mean
        self.whitening_ = wr.H
        self.unmixing_ = est.W
        self.components_ = est.W @ wr.H
        self.mixing_ = np.linalg.pinv(self.components_)
        self.discrepancies_ = est.disc
        self.objective_ = est.objective
        self.n_iter_ = est.iterations
        self.converged_ = est.converged
        self.estimate_ = est
        return self

    def transform(self, X):
        """Signal components of ``X``, shape (n_samples, n_components_).

        Components are scaled by the training whitening, so on the training
        data they have unit variance.
        """
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.mean_) @ self.components_[: self.n_components_].T

    def transform_all(self, X):
        """All fitted components (signal then noise for ``method='maxmin'``)."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, S):
        """Map components back to the observation space.

        Accepts either the signal components or all components; with signal
        components only, the reconstruction is the projection of the data
        onto the non-Gaussian subspace.
        """
        check_is_fitted(self)
        S = np.asarray(S, dtype=float)
        r = S.shape[1]
        if r not in (self.n_components_, self.components_.shape[0]):
            raise InputError(
                "expected %d or %d columns, got %d"
                % (self.n_components_, self.components_.shape[0], r)
            )
        return S @ self.mixing_[:, :r].T + self.mean_
