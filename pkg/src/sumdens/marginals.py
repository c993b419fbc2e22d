"""Univariate marginal distribution families.

Each family exposes pdf, log-pdf, cdf (plus log-cdf and log-survival for
tail-safe work), quantile and the score d/dx log pdf, all in numerically
stable closed form and vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MarginalEval:
    """Consistent (pdf, log_pdf, cdf, score) tuple at one point."""

    pdf: float
    log_pdf: float
    cdf: float
    score: float


class Marginal:
    """Base class for the supported univariate families.

    Subclasses implement the closed forms; parameters are validated at
    construction so evaluation never has to re-check them.  ``support`` is
    ``(lo, hi)`` with the convention that the density is zero outside it.
    Outside the support ``log_pdf`` is ``-inf`` and ``pdf`` is 0; ``score``
    is defined only on the open interior and is NaN elsewhere.
    """

    support: tuple[float, float] = (-np.inf, np.inf)

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def log_pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def log_cdf(self, x):
        """log F(x), stable deep in the lower tail."""
        with np.errstate(divide="ignore"):
            return np.log(self.cdf(x))

    def log_sf(self, x):
        """log(1 - F(x)), stable deep in the upper tail."""
        with np.errstate(divide="ignore"):
            return np.log1p(-self.cdf(x))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u <= 0.0) or np.any(u >= 1.0):
            raise ValueError("quantile requires u in the open interval (0, 1)")
        return self._quantile(u)

    def _quantile(self, u):
        raise NotImplementedError

    def score(self, x):
        """d/dx log pdf(x); NaN off the support interior."""
        raise NotImplementedError

    def eval(self, x: float) -> MarginalEval:
        """Point evaluation returning a consistent (pdf, log_pdf, cdf, score)."""
        if not np.isfinite(x):
            raise ValueError("eval requires finite x")
        lp = float(self.log_pdf(x))
        return MarginalEval(
            pdf=float(self.pdf(x)),
            log_pdf=lp,
            cdf=float(self.cdf(x)),
            score=float(self.score(x)),
        )

    def in_support(self, x):
        lo, hi = self.support
        return (np.asarray(x) >= lo) & (np.asarray(x) <= hi)


class Exponential(Marginal):
    """Exponential with rate ``lam``: pdf lam * exp(-lam x) on [0, inf)."""

    support = (0.0, np.inf)

    def __init__(self, lam: float):
        if not lam > 0:
            raise ValueError(f"Exponential rate must be positive, got {lam}")
        self.lam = float(lam)

    def __repr__(self):
        return f"Exponential({self.lam:g})"

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0, math.log(self.lam) - self.lam * x, -np.inf)
        return out[()] if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -np.expm1(-self.lam * np.maximum(x, 0.0)), 0.0)
        return out[()] if out.ndim == 0 else out

    def log_cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(x > 0, np.log(-np.expm1(-self.lam * np.maximum(x, 1e-300))), -np.inf)
        return out[()] if out.ndim == 0 else out

    def log_sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -self.lam * x, 0.0)
        return out[()] if out.ndim == 0 else out

    def _quantile(self, u):
        return -np.log1p(-u) / self.lam

    def score(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -self.lam, np.nan)
        return out[()] if out.ndim == 0 else out


class Weibull(Marginal):
    """Weibull with shape ``k`` and scale ``lam``.

    For shape k < 1 the density diverges as x -> 0+; eval at x = 0 reports
    pdf = +inf there (samplers never emit exact 0).
    """

    support = (0.0, np.inf)

    def __init__(self, k: float, lam: float):
        if not k > 0:
            raise ValueError(f"Weibull shape must be positive, got {k}")
        if not lam > 0:
            raise ValueError(f"Weibull scale must be positive, got {lam}")
        self.k = float(k)
        self.lam = float(lam)

    def __repr__(self):
        return f"Weibull({self.k:g}, {self.lam:g})"

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        k, lam = self.k, self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            z = x / lam
            body = math.log(k / lam) + (k - 1.0) * np.log(z) - z**k
        out = np.where(x > 0, body, np.where(x == 0, _weibull_zero_logpdf(k, lam), -np.inf))
        return out[()] if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -np.expm1(-((np.maximum(x, 0.0) / self.lam) ** self.k)), 0.0)
        return out[()] if out.ndim == 0 else out

    def log_cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (np.maximum(x, 1e-300) / self.lam) ** self.k
            out = np.where(x > 0, np.log(-np.expm1(-t)), -np.inf)
        return out[()] if out.ndim == 0 else out

    def log_sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0, -((np.maximum(x, 0.0) / self.lam) ** self.k), 0.0)
        return out[()] if out.ndim == 0 else out

    def _quantile(self, u):
        return self.lam * (-np.log1p(-u)) ** (1.0 / self.k)

    def score(self, x):
        x = np.asarray(x, dtype=float)
        k, lam = self.k, self.lam
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (k - 1.0) / x - (k / lam) * (x / lam) ** (k - 1.0)
        out = np.where(x > 0, val, np.nan)
        return out[()] if out.ndim == 0 else out


def _weibull_zero_logpdf(k, lam):
    # boundary value: finite only for k = 1 (rate 1/lam); +inf for k < 1
    if k < 1.0:
        return np.inf
    if k == 1.0:
        return math.log(k / lam)
    return -np.inf


class Normal(Marginal):
    """Normal(mu, sigma)."""

    support = (-np.inf, np.inf)

    def __init__(self, mu: float, sigma: float):
        if not sigma > 0:
            raise ValueError(f"Normal sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"Normal({self.mu:g}, {self.sigma:g})"

    def log_pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma) - 0.5 * _LOG_2PI

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def log_cdf(self, x):
        return log_ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def log_sf(self, x):
        return log_ndtr(-(np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def _quantile(self, u):
        return self.mu + self.sigma * ndtri(u)

    def score(self, x):
        return -(np.asarray(x, dtype=float) - self.mu) / self.sigma**2


class Lognormal(Marginal):
    """Lognormal: log X ~ Normal(mu, sigma), supported on (0, inf)."""

    support = (0.0, np.inf)

    def __init__(self, mu: float, sigma: float):
        if not sigma > 0:
            raise ValueError(f"Lognormal sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"Lognormal({self.mu:g}, {self.sigma:g})"

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.log(np.maximum(x, 1e-300))
            z = (lx - self.mu) / self.sigma
            body = -0.5 * z * z - lx - math.log(self.sigma) - 0.5 * _LOG_2PI
        out = np.where(x > 0, body, -np.inf)
        return out[()] if out.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.mu) / self.sigma
        out = np.where(x > 0, ndtr(z), 0.0)
        return out[()] if out.ndim == 0 else out

    def log_cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.mu) / self.sigma
        out = np.where(x > 0, log_ndtr(z), -np.inf)
        return out[()] if out.ndim == 0 else out

    def log_sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.maximum(x, 1e-300)) - self.mu) / self.sigma
        out = np.where(x > 0, log_ndtr(-z), 0.0)
        return out[()] if out.ndim == 0 else out

    def _quantile(self, u):
        return np.exp(self.mu + self.sigma * ndtri(u))

    def score(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -(1.0 + (np.log(np.maximum(x, 1e-300)) - self.mu) / self.sigma**2) / x
        out = np.where(x > 0, val, np.nan)
        return out[()] if out.ndim == 0 else out


class Uniform(Marginal):
    """Uniform(0, 1); used as the identity marginal in copula-level checks."""

    support = (0.0, 1.0)

    def __repr__(self):
        return "Uniform()"

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= 0) & (x <= 1), 0.0, -np.inf)
        return out[()] if out.ndim == 0 else out

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def _quantile(self, u):
        return np.asarray(u, dtype=float)

    def score(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x > 0) & (x < 1), 0.0, np.nan)
        return out[()] if out.ndim == 0 else out


_FAMILIES = {
    "exponential": (Exponential, 1),
    "weibull": (Weibull, 2),
    "lognormal": (Lognormal, 2),
    "normal": (Normal, 2),
    "uniform": (Uniform, 0),
}


def parse_marginal(text: str) -> Marginal:
    """Parse ``family:p1,p2`` strings, e.g. ``weibull:0.3,1``."""
    name, _, argstr = text.partition(":")
    key = name.strip().lower()
    if key not in _FAMILIES:
        raise ValueError(f"unknown marginal family {name!r}; choose from {sorted(_FAMILIES)}")
    cls, nargs = _FAMILIES[key]
    args = [float(a) for a in argstr.split(",") if a.strip()] if argstr else []
    if len(args) != nargs:
        raise ValueError(f"{key} takes {nargs} parameter(s), got {len(args)} in {text!r}")
    return cls(*args)
