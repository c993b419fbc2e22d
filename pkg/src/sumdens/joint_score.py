"""Joint density, score, and one-dimensional conditionals of the vector X.

A :class:`JointModel` pairs a dependence structure (Archimedean family,
Gaussian copula, or independence) with n marginals.  All heavy products of
generator derivatives are assembled in log space with explicit signs; sums
of psi values use numpy's pairwise summation, and marginal cdf values are
clamped to 1 - 2^-53 before entering psi so the generator stays finite.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import streams
from .copulas import (
    ArchimedeanFamily,
    CapabilityError,
    GaussianCopula,
    Independence,
    sample_archimedean,
    sample_gaussian,
)

_F_LO = 2.0**-53
_F_HI = 1.0 - 2.0**-53
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class ReplicateSet:
    """Simulated joint draws; ``z`` holds frailties when the sampler kept them."""

    x: np.ndarray
    z: np.ndarray | None = None

    @property
    def r(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[1]


class JointModel:
    """Dependence structure plus marginals, with density/score/conditionals."""

    def __init__(self, copula, marginals):
        marginals = list(marginals)
        if len(marginals) < 1:
            raise ValueError("need at least one marginal")
        if isinstance(copula, GaussianCopula) and copula.n != len(marginals):
            raise ValueError(f"copula dimension {copula.n} != number of marginals {len(marginals)}")
        self.copula = copula
        self.marginals = marginals
        self.n = len(marginals)

    def __repr__(self):
        return f"JointModel({self.copula!r}, n={self.n})"

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.copula, GaussianCopula)

    @property
    def is_archimedean(self) -> bool:
        return isinstance(self.copula, ArchimedeanFamily)

    @property
    def has_frailty(self) -> bool:
        return self.is_archimedean and self.copula.has_frailty

    # -- building blocks -------------------------------------------------

    def _as_matrix(self, x):
        x = np.asarray(x, dtype=float)
        scalar_input = x.ndim == 1
        if scalar_input:
            x = x.reshape(1, -1)
        if x.shape[1] != self.n:
            raise ValueError(f"x must have {self.n} columns, got {x.shape[1]}")
        return x, scalar_input

    def _cdf_matrix(self, x):
        f = np.empty_like(x)
        for i, m in enumerate(self.marginals):
            f[:, i] = m.cdf(x[:, i])
        return np.clip(f, _F_LO, _F_HI)

    def _log_pdf_matrix(self, x):
        lp = np.empty_like(x)
        for i, m in enumerate(self.marginals):
            lp[:, i] = m.log_pdf(x[:, i])
        return lp

    # -- operations ------------------------------------------------------

    def log_density(self, x):
        """log f(x); -inf outside the support.  x: (n,) or (R, n)."""
        x, single = self._as_matrix(x)
        lp = self._log_pdf_matrix(x)
        lp_sum = lp.sum(axis=1)
        ok = np.isfinite(lp_sum)
        out = np.full(x.shape[0], -np.inf)
        if np.any(ok):
            xs = x[ok]
            if self.is_gaussian:
                out[ok] = self._gaussian_log_density(xs, lp_sum[ok])
            else:
                f = self._cdf_matrix(xs)
                big_t = self.copula.psi(f).sum(axis=1)
                la_n, _ = self.copula.phi_deriv(big_t, self.n)
                out[ok] = la_n + self.copula.log_neg_dpsi(f).sum(axis=1) + lp_sum[ok]
        return out[0] if single else out

    def _gaussian_log_density(self, x, lp_sum):
        z = ndtri(self._cdf_matrix(x))
        siz = self.copula.solve(z.T).T
        quad = np.einsum("ij,ij->i", z, siz - z)
        return -0.5 * self.copula.log_det - 0.5 * quad + lp_sum

    def score(self, x):
        """Gradient of log f at interior points of the support."""
        x, single = self._as_matrix(x)
        lp = self._log_pdf_matrix(x)
        if not np.all(np.isfinite(lp)):
            raise ValueError("score requested outside the support interior")
        f = self._cdf_matrix(x)
        marg = np.empty_like(x)
        for i, m in enumerate(self.marginals):
            marg[:, i] = m.score(x[:, i])
        if self.is_gaussian:
            z = ndtri(f)
            siz = self.copula.solve(z.T).T
            log_phi1 = -0.5 * z * z - _LOG_SQRT_2PI
            out = (z - siz) * np.exp(lp - log_phi1) + marg
        else:
            cop = self.copula
            big_t = cop.psi(f).sum(axis=1)
            la_n, _ = cop.phi_deriv(big_t, self.n)
            la_n1, _ = cop.phi_deriv(big_t, self.n + 1)
            log_ratio = np.asarray(la_n1 - la_n).reshape(-1, 1)
            term1 = np.exp(log_ratio + cop.log_neg_dpsi(f) + lp)
            term2 = cop.d2psi_over_dpsi(f) * np.exp(lp)
            out = term1 + term2 + marg
        return out[0] if single else out

    def conditional_density(self, i: int, x):
        """f(x_i | x_{-i}) via the generator-derivative ratio formula.

        Available for Archimedean (including independence) dependence; the
        Gaussian copula uses the dedicated sequential-normal path instead.
        """
        if self.is_gaussian:
            raise CapabilityError(
                "one-dimensional conditionals for the Gaussian copula live in gauss_seq"
            )
        x, single = self._as_matrix(x)
        f = self._cdf_matrix(x)
        p = self.copula.psi(f)
        t_rest = p.sum(axis=1) - p[:, i]
        out = np.exp(self._log_cond(i, x[:, i], t_rest))
        return float(out[0]) if single else out

    def _log_cond(self, i, xi, t_rest):
        """log f(x_i | rest) given the psi-sum of the conditioning block."""
        m = self.marginals[i]
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        t_rest = np.broadcast_to(np.asarray(t_rest, dtype=float), xi.shape)
        lp = m.log_pdf(xi)
        out = np.full(xi.shape, -np.inf)
        ok = np.isfinite(lp)
        if np.any(ok):
            fi = np.clip(m.cdf(xi[ok]), _F_LO, _F_HI)
            la_num, _ = self.copula.phi_deriv(t_rest[ok] + self.copula.psi(fi), self.n)
            la_den, _ = self.copula.phi_deriv(t_rest[ok], self.n - 1)
            out[ok] = lp[ok] + self.copula.log_neg_dpsi(fi) + la_num - la_den
        return out

    def ext_conditional_density(self, i: int, x_i, z):
        """f(x_i | x_{-i}, Z=z) = -z psi'(F_i(x_i)) f_i(x_i) exp(-z psi(F_i(x_i))).

        Depends on the other components only through the frailty Z.
        """
        if not self.has_frailty:
            raise CapabilityError(f"{self.copula!r} has no frailty representation")
        return np.exp(self._log_ext_cond(i, x_i, z))

    def _log_ext_cond(self, i, x_i, z):
        m = self.marginals[i]
        xb, zb = np.broadcast_arrays(np.asarray(x_i, dtype=float), np.asarray(z, dtype=float))
        scalar = xb.ndim == 0
        xb = np.atleast_1d(xb).astype(float)
        zb = np.atleast_1d(zb).astype(float)
        lp = m.log_pdf(xb)
        out = np.full(xb.shape, -np.inf)
        ok = np.isfinite(lp)
        if np.any(ok):
            fi = np.clip(m.cdf(xb[ok]), _F_LO, _F_HI)
            out[ok] = (
                np.log(zb[ok])
                + self.copula.log_neg_dpsi(fi)
                + lp[ok]
                - zb[ok] * self.copula.psi(fi)
            )
        return float(out[0]) if scalar else out

    # -- simulation --------------------------------------------------------

    def sample_block(self, rng: np.random.Generator, size: int) -> ReplicateSet:
        """One block of joint draws from a caller-supplied generator."""
        if self.is_gaussian:
            return ReplicateSet(sample_gaussian(self.copula, self.marginals, rng, size))
        x, z = sample_archimedean(self.copula, self.marginals, rng, size)
        if not self.copula.extended_ok:
            z = None  # frailty used for sampling only (no extended estimators)
        return ReplicateSet(x, z)


class UnnormalizedDensity:
    """Joint model whose log-density carries an unknown additive constant.

    The score passes through untouched, which is exactly why the sensitivity
    estimators tolerate unnormalized targets.
    """

    def __init__(self, jm: JointModel, log_const: float):
        self.jm = jm
        self.log_const = float(log_const)

    def log_density(self, x):
        return self.jm.log_density(x) + self.log_const

    def score(self, x):
        return self.jm.score(x)


def _sim_block(jm, master_seed, stream, index, size):
    rng = streams.substream(master_seed, stream, index)
    return jm.sample_block(rng, size)


def simulate(jm: JointModel, r: int, master_seed: int, workers: int = 1) -> ReplicateSet:
    """R joint draws with block-deterministic substreams.

    Output is bit-identical for any ``workers`` value: block b always uses
    the generator keyed by (SIM, b) under the master seed.
    """
    fn = functools.partial(_sim_block, jm, master_seed, streams.SIM)
    blocks = streams.map_blocks(fn, r, workers=workers)
    x = np.concatenate([b.x for b in blocks], axis=0)
    if all(b.z is not None for b in blocks):
        z = np.concatenate([b.z for b in blocks])
    else:
        z = None
    return ReplicateSet(x, z)
