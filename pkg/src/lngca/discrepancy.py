"""Empirical measures of distance from Gaussianity for standardized samples.

Four measures are provided: squared skewness (``Skew``), squared excess
kurtosis (``Kurt``), their Jarque-Bera combination (``JB``) and the expected
log-likelihood tilt (``GPois``). GPois models the density of a component as
``phi(x) * exp(g(x))`` and fits the log-tilt ``g`` by penalized Poisson
regression of histogram counts on a cubic spline basis.

Every measure also exposes a :class:`Score`: the per-sample first derivative
and mean second derivative consumed by the fixed-point update.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import eigh

from ._validation import InputError

KINDS = ("Skew", "Kurt", "JB", "GPois")

_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


class ConvergenceError(RuntimeError):
    """Penalized IRLS did not reach the deviance tolerance."""

    def __init__(self, message, last_change=None):
        self.last_change = last_change
        super().__init__(message)


@dataclass(frozen=True)
class DiscrepancyKind:
    """Which discrepancy to use, with the GPois smoothing settings.

    Parameters
    ----------
    tag : {'Skew', 'Kurt', 'JB', 'GPois'}
    gpois_df : float, default=6
        Effective degrees of freedom of the log-tilt smoothing spline.
    gpois_grid : int, default=500
        Number of histogram bins.
    """

    tag: str = "GPois"
    gpois_df: float = 6.0
    gpois_grid: int = 500

    def __post_init__(self):
        if self.tag not in KINDS:
            raise InputError("unknown discrepancy %r, expected one of %s" % (self.tag, KINDS))
        if self.gpois_df < 2:
            raise InputError("gpois_df must be >= 2, got %r" % self.gpois_df)
        if self.gpois_grid < 50:
            raise InputError("gpois_grid must be >= 50, got %r" % self.gpois_grid)

    def __str__(self):
        return self.tag


def as_kind(kind):
    """Accept a :class:`DiscrepancyKind` or its tag (case-insensitive)."""
    if isinstance(kind, DiscrepancyKind):
        return kind
    if isinstance(kind, str):
        for tag in KINDS:
            if tag.lower() == kind.lower():
                return DiscrepancyKind(tag)
    raise InputError("unknown discrepancy %r, expected one of %s" % (kind, KINDS))


@dataclass(frozen=True)
class Score:
    """Fixed-point ingredients for one component.

    ``h1[i]`` is the derivative of the component's contribution to the
    objective at sample ``i``; ``h2bar`` is the sample mean of the second
    derivative.
    """

    h1: np.ndarray
    h2bar: float


@dataclass(frozen=True)
class TiltModel:
    """Fitted log-tilt on a uniform grid, normalized so that
    ``trapz(phi * exp(g), grid) == 1``."""

    grid: np.ndarray
    g: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    lam: float = field(default=np.nan)
    n_iter: int = 0

    def __call__(self, x, deriv=0):
        values = (self.g, self.g1, self.g2)[deriv]
        return np.interp(x, self.grid, values)

    def integral(self):
        dens = np.exp(self.g - 0.5 * self.grid**2 - _LOG_SQRT_2PI)
        return _trapezoid(dens, self.grid)


def _trapezoid(y, x):
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2))


def standardize(x):
    """Center and scale to unit sample variance (divisor n)."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    sd = np.sqrt(np.mean(x * x))
    if sd == 0:
        raise InputError("cannot standardize a constant sample")
    return x / sd


# -- moment measures ---------------------------------------------------------


def _moments(x):
    x2 = x * x
    return x2, np.mean(x2 * x), np.mean(x2 * x2)


def skew_stat(x):
    """Squared third sample moment ``(mean(x**3))**2`` of a standardized sample."""
    _, m3, _ = _moments(np.asarray(x, dtype=float))
    return float(m3**2)


def kurt_stat(x):
    """Squared excess kurtosis ``(mean(x**4) - 3)**2`` of a standardized sample."""
    _, _, m4 = _moments(np.asarray(x, dtype=float))
    return float((m4 - 3.0) ** 2)


def jb_stat(x):
    """Jarque-Bera combination ``Skew + Kurt / 4``."""
    _, m3, m4 = _moments(np.asarray(x, dtype=float))
    return float(m3**2 + (m4 - 3.0) ** 2 / 4.0)


def _moment_eval(x, a, b):
    """Statistic and score of ``a * Skew + b * Kurt`` with moments frozen."""
    x2, m3, m4 = _moments(x)
    c = m4 - 3.0
    stat = a * m3**2 + b * c**2
    h1 = (6.0 * a * m3) * x2 + (8.0 * b * c) * (x2 * x)
    h2bar = 12.0 * a * m3 * np.mean(x) + 24.0 * b * c * np.mean(x2)
    return float(stat), Score(h1=h1, h2bar=float(h2bar))


def _skew_score(x):
    return _moment_eval(x, 1.0, 0.0)[1]


def _kurt_score(x):
    return _moment_eval(x, 0.0, 1.0)[1]


def _jb_score(x):
    return _moment_eval(x, 1.0, 0.25)[1]


# -- GPois ---------------------------------------------------------------------

N_BASIS = 40
IRLS_MAX_ITER = 20
IRLS_TOL = 1e-6
RANGE_PAD = 0.1


@dataclass(frozen=True)
class _Basis:
    """Cubic B-spline basis with uniform knots on [0, 1], evaluated on a
    uniform grid of bin centers. Rescaling to [lo, hi] is affine, so one
    basis serves every fit with the same grid size."""

    B: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    omega: np.ndarray
    trap: np.ndarray


@lru_cache(maxsize=8)
def _basis(n_grid, n_basis=N_BASIS):
    k = 3
    inner = np.linspace(0.0, 1.0, n_basis - k + 1)
    t = np.r_[[0.0] * k, inner, [1.0] * k]
    u = (np.arange(n_grid) + 0.5) / n_grid
    spl = BSpline(t, np.eye(n_basis), k, extrapolate=False)
    # second derivatives are piecewise linear: 2-point Gauss is exact per span
    gx, gw = np.polynomial.legendre.leggauss(2)
    a, b = inner[:-1], inner[1:]
    mid, half = (a + b) / 2, (b - a) / 2
    nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    weights = (half[:, None] * gw[None, :]).ravel()
    D2 = spl.derivative(2)(nodes)
    trap = np.ones(n_grid)
    trap[[0, -1]] = 0.5
    return _Basis(
        B=spl(u),
        B1=spl.derivative(1)(u),
        B2=spl.derivative(2)(u),
        omega=D2.T @ (weights[:, None] * D2),
        trap=trap,
    )


def _df_lambda(A, omega, target_df):
    """Smoothing parameter giving ``trace((A + lam*omega)^{-1} A) == target_df``.

    With ``theta`` the generalized eigenvalues of ``(A, A + c*omega)`` the
    trace is ``sum(theta / (theta + (lam/c) * (1 - theta)))``, monotone in
    ``log(lam)``; solved by safeguarded Newton. The pencil ``(A, A + c*omega)``
    stays well conditioned even though the Gaussian weights make ``A`` nearly
    singular in the tails; factoring ``A`` itself made ``lam`` jitter with
    rounding as the data moved.
    """
    m = A.shape[0]
    if target_df >= m:
        return 0.0
    c = np.trace(A) / np.trace(omega)
    theta = eigh(A, A + c * omega, eigvals_only=True, check_finite=False)
    theta = np.clip(theta, 0.0, 1.0)
    lo, hi = -40.0, 40.0
    l = 0.0
    for _ in range(100):
        t = np.exp(l) / c
        r = theta / (theta + t * (1.0 - theta))
        f = r.sum() - target_df
        if abs(f) < 1e-12:
            break
        if f > 0:
            lo = l
        else:
            hi = l
        slope = -(r * (1.0 - r)).sum()
        nxt = l - f / slope if slope < 0 else (lo + hi) / 2
        l = nxt if lo < nxt < hi else (lo + hi) / 2
    return float(np.exp(l))


def bin_counts(x, n_grid):
    """Linear binning of ``x`` onto ``n_grid`` equal-width bins spanning
    ``[min(x) - 0.1, max(x) + 0.1]``.

    Each sample splits its unit mass between the two nearest bin centers in
    proportion to proximity, so the counts move continuously with the data
    and ``counts @ v / n`` equals the mean of the piecewise-linear
    interpolant of ``v`` at the samples.

    Returns
    -------
    centers : ndarray, shape (n_grid,)
    counts : ndarray, shape (n_grid,)
    width : float
    """
    x = np.asarray(x, dtype=float)
    lo = x.min() - RANGE_PAD
    hi = x.max() + RANGE_PAD
    width = (hi - lo) / n_grid
    centers = lo + (np.arange(n_grid) + 0.5) * width
    j, f = _grid_weights(x, centers[0], width, n_grid)
    counts = np.bincount(j, 1.0 - f, minlength=n_grid) + np.bincount(
        j + 1, f, minlength=n_grid
    )
    return centers, counts, width


def _grid_weights(x, start, width, n_grid):
    """Left neighbor index and right-hand weight of ``x`` on a uniform grid."""
    u = (x - start) / width
    j = np.clip(np.floor(u).astype(np.intp), 0, n_grid - 2)
    return j, u - j


@dataclass
class _GPoisFit:
    x: np.ndarray
    centers: np.ndarray
    counts: np.ndarray
    width: float
    offset: np.ndarray
    beta: np.ndarray
    mu: np.ndarray
    lam: float
    log_norm: float
    n_iter: int


def _fit_core(x, kind):
    L = kind.gpois_grid
    basis = _basis(L)
    B, omega = basis.B, basis.omega
    centers, y, width = bin_counts(x, L)
    N = y.sum()
    offset = np.log(N * width) - 0.5 * centers**2 - _LOG_SQRT_2PI

    # roughness is calibrated once, under the Gaussian (zero-tilt) weights,
    # so the Newton iterations below solve a fixed convex problem
    mu = np.exp(offset)
    lam = _df_lambda((B.T * mu) @ B, omega, kind.gpois_df)

    pos = y > 0
    ylogy = float(np.sum(y[pos] * np.log(y[pos])))

    def deviance(eta, mu):
        # 2 * sum(y log(y/mu) - (y - mu)) with log(mu) = eta
        return 2.0 * (ylogy - y @ eta - N + mu.sum())

    beta = np.zeros(B.shape[1])
    dev = deviance(offset, mu)
    pen = dev
    change = np.inf
    for it in range(1, IRLS_MAX_ITER + 1):
        BW = B.T * mu
        A = BW @ B
        rhs = BW @ (B @ beta) + B.T @ (y - mu)
        delta = np.linalg.solve(A + lam * omega, rhs) - beta
        step = 1.0
        while True:
            cand = beta + step * delta
            eta_c = np.minimum(offset + B @ cand, 700.0)
            mu_c = np.exp(eta_c)
            dev_c = deviance(eta_c, mu_c)
            pen_c = dev_c + lam * cand @ omega @ cand
            if pen_c <= pen + 1e-12 * abs(pen) or step < 1e-3:
                break
            step /= 2
        beta, mu, pen = cand, mu_c, pen_c
        change = abs(dev_c - dev) / (abs(dev_c) + 0.1)
        dev = dev_c
        if change < IRLS_TOL:
            break
    else:
        raise ConvergenceError(
            "GPois IRLS did not converge in %d iterations (last relative deviance "
            "change %.3e)" % (IRLS_MAX_ITER, change),
            last_change=change,
        )
    # polish: one more Newton step costs little and makes the statistic
    # accurate enough for finite-difference comparisons
    BW = B.T * mu
    beta = np.linalg.solve(BW @ B + lam * omega, BW @ (B @ beta) + B.T @ (y - mu))
    mu = np.exp(np.minimum(offset + B @ beta, 700.0))

    e = np.exp(B @ beta - 0.5 * centers**2 - _LOG_SQRT_2PI)
    log_norm = float(np.log(width * (basis.trap @ e)))
    return _GPoisFit(x, centers, y, width, offset, beta, mu, lam, log_norm, it)


def gpois_fit(x, kind=None):
    """Fit the log-tilt of a standardized sample.

    Linearly binned counts are regressed on the grid with a Poisson
    likelihood, offset ``log(n * width * phi(center))``, and a cubic spline
    for ``g`` with an integrated squared second-derivative penalty. The
    penalty weight is set so the smoother has ``kind.gpois_df`` effective
    degrees of freedom under Gaussian weights. The fit is renormalized so
    that ``phi * exp(g)`` integrates to one on the grid.

    Parameters
    ----------
    x : ndarray, shape (n,)
        Standardized sample.
    kind : DiscrepancyKind, optional

    Returns
    -------
    TiltModel

    Raises
    ------
    ConvergenceError
        If the relative deviance change is still above 1e-6 after 20 steps.
    """
    kind = DiscrepancyKind("GPois") if kind is None else kind
    fit = _fit_core(np.asarray(x, dtype=float), kind)
    return _tilt(fit, kind)


def _tilt(fit, kind):
    basis = _basis(kind.gpois_grid)
    span = kind.gpois_grid * fit.width
    return TiltModel(
        grid=fit.centers,
        g=basis.B @ fit.beta - fit.log_norm,
        g1=basis.B1 @ fit.beta / span,
        g2=basis.B2 @ fit.beta / span**2,
        lam=fit.lam,
        n_iter=fit.n_iter,
    )


def gpois_stat(x, kind=None):
    """Sample mean of the fitted log-tilt evaluated at the data."""
    x = np.asarray(x, dtype=float)
    return float(np.mean(gpois_fit(x, kind)(x)))


def _gpois_eval(x, kind):
    fit = _fit_core(x, kind)
    tilt = _tilt(fit, kind)
    # the samples sit inside the grid, so interpolation reuses the binning weights
    j, f = _grid_weights(x, fit.centers[0], fit.width, kind.gpois_grid)
    N = fit.counts.sum()

    def at_data(v):
        return v[j] * (1.0 - f) + v[j + 1] * f

    value = float(fit.counts @ tilt.g / N)
    h2bar = float(fit.counts @ tilt.g2 / N)
    return value, Score(h1=at_data(tilt.g1), h2bar=h2bar)


def _gpois_total_derivative(x, dx, kind):
    """Exact derivative of :func:`gpois_stat` at ``x`` along ``dx``.

    Differentiates through the grid placement, the binned counts, the
    roughness calibration and the penalized likelihood optimum (implicit
    function theorem on the stationarity condition).
    """
    L = kind.gpois_grid
    basis = _basis(L)
    B, omega = basis.B, basis.omega
    fit = _fit_core(x, kind)
    c, y, width, beta, mu, lam = fit.centers, fit.counts, fit.width, fit.beta, fit.mu, fit.lam
    N = y.sum()
    k = np.arange(L) + 0.5

    dlo = dx[np.argmin(x)]
    dhi = dx[np.argmax(x)]
    dwidth = (dhi - dlo) / L
    dc = dlo + k * dwidth

    u = (x - c[0]) / width
    j = np.clip(np.floor(u).astype(np.intp), 0, L - 2)
    du = ((dx - dc[0]) - u * dwidth) / width
    dy = np.bincount(j + 1, du, minlength=L) - np.bincount(j, du, minlength=L)

    doff = dwidth / width - c * dc

    # calibration of lam at the Gaussian weights mu0 = exp(offset)
    mu0 = np.exp(fit.offset)
    A0 = (B.T * mu0) @ B
    S0 = np.linalg.inv(A0 + lam * omega)
    SOS = S0 @ omega @ S0
    dA0 = (B.T * (mu0 * doff)) @ B
    dlam = lam * np.sum(SOS * dA0) / np.sum(SOS * A0)

    # stationarity B'(y - mu) = lam * omega @ beta
    A = (B.T * mu) @ B
    rhs = B.T @ dy - B.T @ (mu * doff) - dlam * (omega @ beta)
    dbeta = np.linalg.solve(A + lam * omega, rhs)

    g = B @ beta - fit.log_norm
    e = basis.trap * np.exp(B @ beta - 0.5 * c**2 - _LOG_SQRT_2PI)
    Zn = width * e.sum()
    dZn = dwidth * e.sum() + width * (e @ (-c * dc + B @ dbeta))
    return float((dy @ g + y @ (B @ dbeta)) / N - dZn / Zn)


# -- dispatch -------------------------------------------------------------------

_MOMENT = {
    "Skew": (skew_stat, _skew_score),
    "Kurt": (kurt_stat, _kurt_score),
    "JB": (jb_stat, _jb_score),
}
_WEIGHTS = {"Skew": (1.0, 0.0), "Kurt": (0.0, 1.0), "JB": (1.0, 0.25)}


def statistic(kind, x):
    """Discrepancy of a standardized sample for any kind."""
    kind = as_kind(kind)
    if kind.tag == "GPois":
        return gpois_stat(x, kind)
    return _MOMENT[kind.tag][0](np.asarray(x, dtype=float))


def score(kind, x):
    """Fixed-point ingredients for a standardized sample."""
    return evaluate(kind, x)[1]


def evaluate(kind, x):
    """Return ``(statistic, Score)`` from a single fit.

    The moment scores differentiate the statistic with the current third and
    fourth moments held fixed, e.g. for Skew ``h(x) = 2 m3 x**3`` so that
    ``h1 = 6 m3 x**2``.
    """
    kind = as_kind(kind)
    x = np.asarray(x, dtype=float)
    if kind.tag == "GPois":
        return _gpois_eval(x, kind)
    return _moment_eval(x, *_WEIGHTS[kind.tag])


def column_statistics(kind, X):
    """Discrepancy of every column of a component matrix, each standardized first."""
    X = np.asarray(X, dtype=float)
    return np.array([statistic(kind, standardize(X[:, j])) for j in range(X.shape[1])])


def directional_derivative(kind, Z, w, d):
    """Analytic derivative of ``statistic(standardize(Z @ w))`` along ``d``.

    The chain rule runs through the standardization of the projection, so
    ``d`` need not be orthogonal to ``w`` and ``Z`` need not be exactly white.
    For the moment kinds this is ``mean(h1 * dx)``. For GPois the fitted
    tilt itself moves with the data, which ``h1 = g'`` ignores, so the
    derivative is taken through the whole fit instead.
    """
    Z = np.asarray(Z, dtype=float)
    u = Z @ w
    v = Z @ d
    u = u - u.mean()
    v = v - v.mean()
    sd = np.sqrt(np.mean(u * u))
    x = u / sd
    dx = (v - x * np.mean(x * v)) / sd
    kind = as_kind(kind)
    if kind.tag == "GPois":
        return _gpois_total_derivative(x, dx, kind)
    _, sc = evaluate(kind, x)
    return float(np.mean(sc.h1 * dx))
