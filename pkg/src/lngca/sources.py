"""Library of 18 standardized non-Gaussian source distributions, ids ``a``-``r``.

The shapes span heavy tails (Student t, double exponential), bounded and
skewed laws (uniform, exponential), and two- and four-component Gaussian
mixtures from well-separated multimodal through transitional to unimodal,
both symmetric and asymmetric. Every law is shifted and scaled with its
exact population mean and standard deviation so it has mean 0 and variance 1.

Parameters are fixed here and versioned by ``LIBRARY_VERSION``; changing any
of them changes simulation results for a given seed.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import InputError, check_random_state

LIBRARY_VERSION = "1"


@dataclass(frozen=True)
class SourceSpec:
    """A named source law.

    Attributes
    ----------
    id : str
        Letter ``a``-``r``.
    family : str
        One of ``t``, ``laplace``, ``uniform``, ``exponential``, ``normmix``,
        ``laplacemix``.
    params : tuple
        Family parameters: ``(df,)`` for ``t``; ``(weights, locs, scales)``
        for the mixtures; empty otherwise.
    label : str
    """

    id: str
    family: str
    params: tuple
    label: str

    def raw_moments(self):
        """Population mean and variance before standardization."""
        f, prm = self.family, self.params
        if f == "t":
            (df,) = prm
            return 0.0, df / (df - 2.0)
        if f == "laplace":
            return 0.0, 2.0
        if f == "uniform":
            return 0.5, 1.0 / 12.0
        if f == "exponential":
            return 1.0, 1.0
        w, loc, scale = (np.asarray(v, dtype=float) for v in prm)
        comp_var = scale**2 if f == "normmix" else 2.0 * scale**2
        mean = w @ loc
        var = w @ (comp_var + loc**2) - mean**2
        return float(mean), float(var)

    def sample_raw(self, n, rng):
        f, prm = self.family, self.params
        if f == "t":
            return rng.standard_t(prm[0], n)
        if f == "laplace":
            return rng.laplace(0.0, 1.0, n)
        if f == "uniform":
            return rng.uniform(0.0, 1.0, n)
        if f == "exponential":
            return rng.exponential(1.0, n)
        w, loc, scale = (np.asarray(v, dtype=float) for v in prm)
        comp = rng.choice(len(w), size=n, p=w / w.sum())
        if f == "normmix":
            return rng.normal(loc[comp], scale[comp])
        return rng.laplace(loc[comp], scale[comp])

    def sample(self, n, random_state=None):
        """Draw ``n`` values standardized with the population moments."""
        rng = check_random_state(random_state)
        mean, var = self.raw_moments()
        return (self.sample_raw(n, rng) - mean) / np.sqrt(var)

    def population_skew_kurt(self):
        """Skewness and excess kurtosis of the standardized law (nan if infinite)."""
        f, prm = self.family, self.params
        if f == "t":
            df = prm[0]
            return 0.0, (6.0 / (df - 4.0) if df > 4 else np.nan)
        if f == "laplace":
            return 0.0, 3.0
        if f == "uniform":
            return 0.0, -1.2
        if f == "exponential":
            return 2.0, 6.0
        w, loc, scale = (np.asarray(v, dtype=float) for v in prm)
        mean, var = self.raw_moments()
        d = loc - mean
        if f == "normmix":
            s2 = scale**2
            m3 = w @ (d**3 + 3 * d * s2)
            m4 = w @ (d**4 + 6 * d**2 * s2 + 3 * s2**2)
        else:
            b2 = scale**2
            m3 = w @ (d**3 + 6 * d * b2)
            m4 = w @ (d**4 + 12 * d**2 * b2 + 24 * b2**2)
        return float(m3 / var**1.5), float(m4 / var**2 - 3.0)


def _mix(family, w, loc, scale):
    return (family, (tuple(w), tuple(loc), tuple(scale)))


_SYM2 = (0.5, 0.5), (-0.5, 0.5)
_ASYM2 = (0.25, 0.75), (-1.0, 0.5)
_SYM4 = (0.25, 0.25, 0.25, 0.25), (-1.5, -0.5, 0.5, 1.5)
_ASYM4 = (0.1, 0.2, 0.3, 0.4), (-1.5, -0.5, 0.5, 1.5)

_TABLE = [
    ("a", "t", (3.0,), "Student t, 3 df"),
    ("b", "laplace", (), "double exponential"),
    ("c", "uniform", (), "uniform"),
    ("d", "t", (5.0,), "Student t, 5 df"),
    ("e", "exponential", (), "exponential"),
    ("f", *_mix("laplacemix", (0.5, 0.5), (-1.0, 1.0), (0.5, 0.5)), "2 double exponentials"),
    ("g", *_mix("normmix", *_SYM2, (0.15, 0.15)), "2 Gaussians, symmetric, multimodal"),
    ("h", *_mix("normmix", *_SYM2, (0.4, 0.4)), "2 Gaussians, symmetric, transitional"),
    ("i", *_mix("normmix", *_SYM2, (0.5, 0.5)), "2 Gaussians, symmetric, unimodal"),
    ("j", *_mix("normmix", *_ASYM2, (0.25, 0.25)), "2 Gaussians, asymmetric, multimodal"),
    ("k", *_mix("normmix", *_ASYM2, (0.5, 0.5)), "2 Gaussians, asymmetric, transitional"),
    ("l", *_mix("normmix", *_ASYM2, (0.75, 0.75)), "2 Gaussians, asymmetric, unimodal"),
    ("m", *_mix("normmix", *_SYM4, (0.15,) * 4), "4 Gaussians, symmetric, multimodal"),
    ("n", *_mix("normmix", *_SYM4, (0.35,) * 4), "4 Gaussians, symmetric, transitional"),
    ("o", *_mix("normmix", *_SYM4, (0.5,) * 4), "4 Gaussians, symmetric, unimodal"),
    ("p", *_mix("normmix", *_ASYM4, (0.15,) * 4), "4 Gaussians, asymmetric, multimodal"),
    ("q", *_mix("normmix", *_ASYM4, (0.35,) * 4), "4 Gaussians, asymmetric, transitional"),
    ("r", *_mix("normmix", *_ASYM4, (0.5,) * 4), "4 Gaussians, asymmetric, unimodal"),
]

SOURCES = {row[0]: SourceSpec(*row) for row in _TABLE}
SOURCE_IDS = tuple(SOURCES)


def get_source(spec):
    if isinstance(spec, SourceSpec):
        return spec
    try:
        return SOURCES[spec]
    except KeyError:
        raise InputError(
            "unknown source id %r, expected one of %s" % (spec, "".join(SOURCE_IDS))
        ) from None


def gen_sources(specs, n, random_state=None):
    """Draw an ``n x len(specs)`` matrix, one column per spec, each column
    standardized to sample mean 0 and sample variance 1 (divisor n)."""
    if n < 2:
        raise InputError("need n >= 2, got %r" % (n,))
    specs = [get_source(s) for s in specs]
    rng = check_random_state(random_state)
    S = np.column_stack([s.sample_raw(n, rng) for s in specs])
    S = S - S.mean(axis=0)
    return S / np.sqrt(np.mean(S * S, axis=0))


def gen_gaussian(n, k, random_state=None):
    """``n x k`` standard Gaussian columns standardized exactly per column."""
    rng = check_random_state(random_state)
    G = rng.standard_normal((n, k))
    G = G - G.mean(axis=0)
    return G / np.sqrt(np.mean(G * G, axis=0))
