"""Simulation studies: planted mixtures, estimator comparisons, test size and
power, and unmixing of images.

Every trial draws from its own generator keyed by ``(seed, stream, ...)``, so
records do not depend on the order in which trials run.
"""

from dataclasses import asdict, dataclass, field
import logging
import time

import numpy as np

from ._validation import InputError, check_random_state
from .discrepancy import as_kind
from .estimator import EstimatorOptions, multi_restart
from .linalg import center_whiten, random_mixing, signed_perm_error
from .qtest import TestConfig, select_q_sweep, test_k
from .sources import SOURCE_IDS, gen_gaussian, gen_sources, get_source

logger = logging.getLogger(__name__)

# stream tags for child generators
_DATA, _FIT, _IMAGE = 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Shape and budget of a simulation experiment.

    ``distributions`` restricts Experiment 1 to a subset of source ids.
    """

    q: int = 2
    p: int = 4
    n: int = 1000
    trials: int = 100
    kinds: tuple = ("JB", "GPois")
    estimators: tuple = ("max", "maxmin")
    m: int | None = None
    seed: int = 0
    distributions: tuple = SOURCE_IDS
    max_iter: int = 100
    tol: float = 1e-7

    def __post_init__(self):
        if not 1 <= self.q <= self.p:
            raise InputError("need 1 <= q <= p, got q=%r, p=%r" % (self.q, self.p))
        if self.trials < 1:
            raise InputError("trials must be >= 1, got %r" % (self.trials,))
        if self.n < 2:
            raise InputError("n must be >= 2, got %r" % (self.n,))
        for e in self.estimators:
            if e not in ("max", "maxmin"):
                raise InputError("unknown estimator %r" % (e,))
        object.__setattr__(self, "kinds", tuple(as_kind(k).tag for k in self.kinds))
        for d in self.distributions:
            get_source(d)

    def options(self, kind):
        return EstimatorOptions(
            kind=kind, max_iter=self.max_iter, tol=self.tol, restarts=self.m
        )

    def to_dict(self):
        return asdict(self)


@dataclass
class TrialRecord:
    trial: int
    kind: str
    estimator: str
    error: float
    runtime: float
    converged: bool
    sources: str = ""
    q: int = 0
    p: int = 0
    n: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class Instance:
    """A planted mixture and its ground truth.

    ``W0 = inv(A) @ Hinv`` maps whitened data back to the sources exactly,
    ``X = Z @ W0.T``; its first ``q`` rows are the signal unmixing rows.
    """

    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    whitening: object
    W0: np.ndarray
    q: int

    @property
    def Z(self):
        return self.whitening.Z

    @property
    def W0_signal(self):
        return self.W0[: self.q]


def make_instance(specs, p, n, random_state=None, mixing=None):
    """Draw sources, pad with Gaussian noise, mix, center and whiten.

    Parameters
    ----------
    specs : sequence of source ids or SourceSpec
        One per signal column.
    p : int
        Total dimension; ``p - len(specs)`` Gaussian columns are appended.
    n : int
    mixing : ndarray, shape (p, p), optional
        Fixed mixing matrix; drawn with :func:`random_mixing` when omitted.
    """
    rng = check_random_state(random_state)
    q = len(specs)
    if q > p:
        raise InputError("%d signal columns exceed dimension %d" % (q, p))
    X = np.column_stack([gen_sources(specs, n, rng), gen_gaussian(n, p - q, rng)])
    return mix_instance(X, q, rng, mixing)


def mix_instance(X, q, random_state=None, mixing=None):
    rng = check_random_state(random_state)
    p = X.shape[1]
    A = random_mixing(p, rng) if mixing is None else np.asarray(mixing, dtype=float)
    Y = X @ A.T
    wr = center_whiten(Y)
    W0 = np.linalg.solve(A, wr.Hinv)
    return Instance(X=X, A=A, Y=Y, whitening=wr, W0=W0, q=q)


def _run_cell(inst, cfg, trial, label, fit_seed):
    records = []
    for kind in cfg.kinds:
        opts = cfg.options(kind)
        for which in cfg.estimators:
            t0 = time.perf_counter()
            est = multi_restart(
                inst.Z, inst.q, opts, which, random_state=np.random.default_rng(fit_seed)
            )
            runtime = time.perf_counter() - t0
            err, _ = signed_perm_error(inst.W0_signal, est.W_signal)
            records.append(
                TrialRecord(
                    trial=trial,
                    kind=kind,
                    estimator=which,
                    error=float(err),
                    runtime=runtime,
                    converged=bool(est.converged),
                    sources=label,
                    q=inst.q,
                    p=inst.X.shape[1],
                    n=inst.X.shape[0],
                )
            )
    return records


def run_experiment1(cfg=None):
    """Both signal columns from the same law, for every law in ``cfg.distributions``.

    All kinds and estimators of one trial see the same data and the same
    starting matrices.
    """
    cfg = ExperimentConfig() if cfg is None else cfg
    records = []
    for d in cfg.distributions:
        di = SOURCE_IDS.index(get_source(d).id)
        for t in range(cfg.trials):
            rng = np.random.default_rng([cfg.seed, _DATA, di, t])
            inst = make_instance([d] * cfg.q, cfg.p, cfg.n, rng)
            records += _run_cell(inst, cfg, t, d * cfg.q, [cfg.seed, _FIT, di, t])
        logger.info("experiment 1: distribution %s done", d)
    return records


def run_experiment2(cfg=None):
    """Signal columns from ``q`` distinct laws drawn at random per trial."""
    cfg = ExperimentConfig() if cfg is None else cfg
    pool = list(cfg.distributions)
    if cfg.q > len(pool):
        raise InputError("q=%d exceeds the %d available laws" % (cfg.q, len(pool)))
    records = []
    for t in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, _DATA, t])
        specs = [pool[i] for i in rng.choice(len(pool), cfg.q, replace=False)]
        inst = make_instance(specs, cfg.p, cfg.n, rng)
        records += _run_cell(inst, cfg, t, "".join(specs), [cfg.seed, _FIT, t])
    return records


@dataclass
class PowerTable:
    """Rejection rates of the sequential test.

    ``rates[(kind, mode)][k]`` is the fraction of trials rejecting ``H0(k)``;
    for the planted ``q``, ``k <= q`` measures power and ``k > q`` size.
    """

    q: int
    ks: tuple
    trials: int
    alpha: float
    rates: dict
    pvalues: dict = field(default_factory=dict)

    def rate(self, kind, mode, k):
        return self.rates[(as_kind(kind).tag, mode)][k]

    def rows(self):
        out = []
        for (kind, mode), by_k in self.rates.items():
            for k, r in by_k.items():
                out.append(
                    {
                        "kind": kind,
                        "mode": mode,
                        "k": k,
                        "rate": r,
                        "type": "power" if k <= self.q else "size",
                    }
                )
        return out

    def to_dict(self):
        return {
            "q": self.q,
            "ks": list(self.ks),
            "trials": self.trials,
            "alpha": self.alpha,
            "rows": self.rows(),
        }


def run_experiment3(cfg=None, test_cfg=None, ks=None):
    """Empirical size and power of the sequential test.

    Each trial draws ``cfg.q`` distinct laws, builds a planted instance and
    runs :func:`test_k` for every ``k`` in ``ks`` (default ``1..p``) and
    every kind in ``cfg.kinds``. Both the current and the cumulative
    p-values come from the same resamples.
    """
    cfg = ExperimentConfig(n=2000) if cfg is None else cfg
    test_cfg = TestConfig() if test_cfg is None else test_cfg
    ks = tuple(range(1, cfg.p + 1)) if ks is None else tuple(ks)
    pool = list(cfg.distributions)
    pvals = {(kind, mode): {k: [] for k in ks} for kind in cfg.kinds for mode in ("current", "cumulative")}
    for t in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, _DATA, t])
        specs = [pool[i] for i in rng.choice(len(pool), cfg.q, replace=False)]
        inst = make_instance(specs, cfg.p, cfg.n, rng)
        for kind in cfg.kinds:
            tc = TestConfig(
                kind=kind,
                B=test_cfg.B,
                alpha=test_cfg.alpha,
                estimator_opts=test_cfg.estimator_opts,
                mode=test_cfg.mode,
                seed=int(np.random.SeedSequence([cfg.seed, _FIT, t]).generate_state(1)[0]),
            )
            for k in ks:
                res = test_k(inst.Z, k, tc)
                pvals[(kind, "current")][k].append(res.p_curr)
                pvals[(kind, "cumulative")][k].append(res.p_cumu)
        logger.info("experiment 3: trial %d done", t)
    rates = {
        key: {k: float(np.mean(np.asarray(v) < test_cfg.alpha)) for k, v in by_k.items()}
        for key, by_k in pvals.items()
    }
    return PowerTable(cfg.q, ks, cfg.trials, test_cfg.alpha, rates, pvals)


def summarize_records(records):
    """Median and quartiles of the error per (sources-free) kind x estimator cell,
    and per distribution when records carry a single repeated law."""
    cells = {}
    for r in records:
        cells.setdefault((r.kind, r.estimator), []).append(r.error)
    out = []
    for (kind, est), errs in sorted(cells.items()):
        e = np.asarray(errs)
        out.append(
            {
                "kind": kind,
                "estimator": est,
                "count": int(e.size),
                "median": float(np.median(e)),
                "q25": float(np.quantile(e, 0.25)),
                "q75": float(np.quantile(e, 0.75)),
            }
        )
    return out


def median_by_source(records):
    """``{(sources, kind, estimator): median error}``."""
    cells = {}
    for r in records:
        cells.setdefault((r.sources, r.kind, r.estimator), []).append(r.error)
    return {key: float(np.median(v)) for key, v in cells.items()}


# -- images -------------------------------------------------------------------


def standardize_image(img):
    v = np.asarray(img, dtype=float)
    v = v - v.mean()
    sd = np.sqrt(np.mean(v * v))
    if sd == 0:
        raise InputError("image is constant and cannot be standardized")
    return v / sd


@dataclass
class UnmixResult:
    """Outcome of :func:`image_unmix`.

    ``recovered`` holds all ``p`` estimated components reshaped to the image
    shape; the first ``n_images`` are aligned (order and sign) with the
    input images. ``error_norms[i]`` is ``||recovered_i - truth_i||`` over
    pixels and ``image_norms[i]`` the norm of the standardized truth.
    """

    recovered: np.ndarray
    truth: np.ndarray
    error_norms: np.ndarray
    image_norms: np.ndarray
    selection: object
    alignment: object
    A: np.ndarray
    disc: np.ndarray
    q: int

    @property
    def relative_errors(self):
        return self.error_norms / self.image_norms

    def exact(self, tol=1e-6):
        return bool(np.all(self.error_norms < tol))


@dataclass(frozen=True)
class UnmixConfig:
    kind: str = "GPois"
    B: int = 100
    alpha: float = 0.05
    mode: str = "current"
    n_noise: int = 3
    m: int = 3
    identity_mixing: bool = False
    select: bool = True
    seed: int = 0


def image_unmix(images, random_state=None, cfg=None):
    """Unmix standardized images mixed with Gaussian noise images.

    Parameters
    ----------
    images : sequence of 2-d arrays
        Grayscale images of identical shape.
    random_state : seed or Generator
        Drives noise images, mixing and estimator starting points.
    cfg : UnmixConfig

    Returns
    -------
    UnmixResult
    """
    cfg = UnmixConfig() if cfg is None else cfg
    images = [np.asarray(im, dtype=float) for im in images]
    if not images:
        raise InputError("need at least one image")
    shape = images[0].shape
    if len(shape) != 2:
        raise InputError("images must be 2-d, got shape %r" % (shape,))
    for i, im in enumerate(images):
        if im.shape != shape:
            raise InputError(
                "image %d has shape %r, expected %r" % (i, im.shape, shape)
            )
    rng = check_random_state(random_state)
    n_img = len(images)
    # column-major (Fortran) pixel order
    S = np.column_stack([standardize_image(im).ravel(order="F") for im in images])
    n = S.shape[0]
    X = np.column_stack([S, gen_gaussian(n, cfg.n_noise, rng)]) if cfg.n_noise else S
    p = X.shape[1]
    mixing = np.eye(p) if cfg.identity_mixing else None
    inst = mix_instance(X, n_img, rng, mixing)
    kind = as_kind(cfg.kind)

    selection = None
    if cfg.select:
        tcfg = TestConfig(
            kind=kind,
            B=cfg.B,
            alpha=cfg.alpha,
            mode=cfg.mode,
            seed=int(rng.integers(2**63)),
        )
        selection = select_q_sweep(inst.Z, tcfg)

    opts = EstimatorOptions(kind=kind, restarts=cfg.m)
    est = multi_restart(inst.Z, n_img, opts, "maxmin", random_state=rng)
    _, Q = signed_perm_error(inst.W0_signal, est.W_signal)
    comps = est.components
    aligned = Q.apply_columns(comps[:, :n_img])
    rest = comps[:, n_img:]
    allc = np.column_stack([aligned, rest])
    errs = np.sqrt(((aligned - S) ** 2).sum(axis=0))
    norms = np.sqrt((S**2).sum(axis=0))
    recovered = np.stack([allc[:, j].reshape(shape, order="F") for j in range(p)])
    truth = np.stack([S[:, j].reshape(shape, order="F") for j in range(n_img)])
    return UnmixResult(
        recovered=recovered,
        truth=truth,
        error_norms=errs,
        image_norms=norms,
        selection=selection,
        alignment=Q,
        A=inst.A,
        disc=est.disc,
        q=n_img,
    )
