"""Copula machinery.

Archimedean generator families (Clayton, Gumbel-Hougaard, Frank) with
high-order derivatives of the generator inverse, frailty samplers for the
product representation X_i = F_i^{-1}(phi(E_i / Z)), and Gaussian-copula
linear algebra (Cholesky factor, one-dimensional conditional parameters).

Conventions: psi maps (0, 1] onto [0, inf) with psi(1) = 0 and is strictly
decreasing; phi is its functional inverse with phi(0) = 1.  Derivatives of
phi alternate in sign, so ``phi_deriv`` returns log|phi^(k)| together with
the sign (-1)^k and all downstream products are assembled in log space.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .streams import open_uniform

K_MAX = 40


class CapabilityError(ValueError):
    """Requested operation is not available for this family."""


def _log_coef_extend(row: np.ndarray, k: int, alpha: float | None) -> np.ndarray:
    """One step of the derivative-polynomial coefficient recurrences.

    Gumbel (``alpha`` set):   a[k+1, j] = alpha * a[k, j-1] + (k - alpha*j) * a[k, j]
    Frank  (``alpha`` None):  q[k+1, j] = (j - 1) * q[k, j-1] + j * q[k, j]

    Rows are indexed by the power j = 1..k; every entry is nonnegative, so
    plain float64 accumulation is exact enough to take logs afterwards.
    """
    nxt = np.zeros(k + 2)
    j = np.arange(1, k + 1)
    if alpha is not None:
        nxt[1 : k + 1] += (k - alpha * j) * row[1 : k + 1]
        nxt[2 : k + 2] += alpha * row[1 : k + 1]
    else:
        nxt[1 : k + 1] += j * row[1 : k + 1]
        nxt[2 : k + 2] += j * row[1 : k + 1]
    return nxt


@lru_cache(maxsize=None)
def _frank_log_coefs(k: int) -> np.ndarray:
    """log q_{k,j} for Q_{k+1}(v) = v(1+v) Q_k'(v), Q_1(v) = v."""
    row = np.array([0.0, 1.0])
    for kk in range(1, k):
        row = _log_coef_extend(row, kk, None)
    with np.errstate(divide="ignore"):
        return np.log(row[1:])


class ArchimedeanFamily:
    """Base for Archimedean generator families with a scalar parameter."""

    name = "archimedean"
    has_frailty = True
    # Frank's frailty is used for sample generation only; extended (Z-conditioned)
    # estimators are offered just where the product representation is standard.
    extended_ok = True

    theta: float

    def __repr__(self):
        return f"{type(self).__name__}({self.theta:g})"

    # -- generator and low-order derivatives (closed form, value space) --

    def psi(self, u):
        raise NotImplementedError

    def dpsi(self, u):
        raise NotImplementedError

    def d2psi(self, u):
        raise NotImplementedError

    def log_neg_dpsi(self, u):
        """log(-psi'(u)), assembled without forming psi' itself."""
        raise NotImplementedError

    def d2psi_over_dpsi(self, u):
        """psi''(u)/psi'(u) in overflow-safe form (used by the joint score)."""
        raise NotImplementedError

    def phi(self, t):
        raise NotImplementedError

    # -- high-order derivatives of phi, log space with sign bookkeeping --

    def log_abs_phi_deriv(self, t, k: int):
        raise NotImplementedError

    def phi_deriv(self, t, k: int):
        """Return (log|phi^(k)(t)|, sign) with sign = (-1)^k (+1 for k = 0).

        ``t`` may be a scalar or array, t >= 0; ``k`` must not exceed K_MAX.
        """
        if k < 0:
            raise ValueError("derivative order k must be >= 0")
        if k > K_MAX:
            raise CapabilityError(f"phi derivatives implemented up to order {K_MAX}, got {k}")
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("phi_deriv requires t >= 0")
        sign = 1 if k % 2 == 0 else -1
        la = self.log_abs_phi_deriv(t, k)
        return la[()] if np.ndim(la) == 0 else la, sign

    def sample_frailty(self, rng: np.random.Generator, size=None):
        """Draw Z with Laplace transform E[exp(-t Z)] = phi(t)."""
        raise NotImplementedError


class Clayton(ArchimedeanFamily):
    """Clayton generator psi(u) = u^(-theta) - 1, theta > 0."""

    name = "clayton"

    def __init__(self, theta: float):
        if not theta > 0:
            raise ValueError(f"Clayton requires theta > 0, got {theta}")
        self.theta = float(theta)

    def psi(self, u):
        return np.asarray(u, dtype=float) ** (-self.theta) - 1.0

    def dpsi(self, u):
        return -self.theta * np.asarray(u, dtype=float) ** (-self.theta - 1.0)

    def d2psi(self, u):
        th = self.theta
        return th * (th + 1.0) * np.asarray(u, dtype=float) ** (-th - 2.0)

    def log_neg_dpsi(self, u):
        return math.log(self.theta) - (self.theta + 1.0) * np.log(u)

    def d2psi_over_dpsi(self, u):
        return -(self.theta + 1.0) / np.asarray(u, dtype=float)

    def phi(self, t):
        return np.exp(-np.log1p(np.asarray(t, dtype=float)) / self.theta)

    def log_abs_phi_deriv(self, t, k):
        # phi^(k)(t) = (-1)^k (1+t)^-(1/theta+k) * prod_{j<k} (1/theta + j)
        a = 1.0 / self.theta
        logprod = math.fsum(math.log(a + j) for j in range(k))
        return logprod - (a + k) * np.log1p(np.asarray(t, dtype=float))

    def sample_frailty(self, rng, size=None):
        return rng.standard_gamma(1.0 / self.theta, size=size)


class GumbelHougaard(ArchimedeanFamily):
    """Gumbel-Hougaard generator psi(u) = (-ln u)^theta, theta >= 1."""

    name = "gumbel"

    def __init__(self, theta: float):
        if not theta >= 1:
            raise ValueError(f"Gumbel-Hougaard requires theta >= 1, got {theta}")
        self.theta = float(theta)
        self._log_coefs: dict[int, np.ndarray] = {}

    def psi(self, u):
        return (-np.log(np.asarray(u, dtype=float))) ** self.theta

    def dpsi(self, u):
        u = np.asarray(u, dtype=float)
        return -self.theta * (-np.log(u)) ** (self.theta - 1.0) / u

    def d2psi(self, u):
        u = np.asarray(u, dtype=float)
        th = self.theta
        ell = -np.log(u)
        return th * ell ** (th - 2.0) * (th - 1.0 + ell) / u**2

    def log_neg_dpsi(self, u):
        u = np.asarray(u, dtype=float)
        if self.theta == 1.0:
            return -np.log(u)
        ell = -np.log(u)
        return math.log(self.theta) + (self.theta - 1.0) * np.log(ell) - np.log(u)

    def d2psi_over_dpsi(self, u):
        u = np.asarray(u, dtype=float)
        ell = -np.log(u)
        return -(self.theta - 1.0 + ell) / (u * ell)

    def phi(self, t):
        return np.exp(-np.asarray(t, dtype=float) ** (1.0 / self.theta))

    def _coefs(self, k: int) -> np.ndarray:
        """log a_{k,j} for phi^(k)(t) = (-1)^k phi(t) t^{-k} sum_j a_{k,j} t^{j/theta}."""
        if k not in self._log_coefs:
            alpha = 1.0 / self.theta
            row = np.array([0.0, alpha])
            for kk in range(1, k):
                row = _log_coef_extend(row, kk, alpha)
            with np.errstate(divide="ignore"):
                self._log_coefs[k] = np.log(row[1:])
        return self._log_coefs[k]

    def log_abs_phi_deriv(self, t, k):
        t = np.asarray(t, dtype=float)
        alpha = 1.0 / self.theta
        if k == 0:
            return -(t**alpha)
        logc = self._coefs(k)
        j = np.arange(1, k + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            logt = np.log(t)
            terms = logc.reshape((-1,) + (1,) * t.ndim) + np.multiply.outer(j * alpha, logt)
            la = -(t**alpha) - k * logt + logsumexp(terms, axis=0)
        if np.any(t == 0.0):
            # |phi^(k)| diverges at 0 for theta > 1; equals 1 at theta = 1
            la = np.where(t == 0.0, np.inf if self.theta > 1 else 0.0, la)
        return la

    def sample_frailty(self, rng, size=None):
        if self.theta == 1.0:
            return np.ones(size if size is not None else ())
        alpha = 1.0 / self.theta
        u = open_uniform(rng, size) * math.pi
        w = -np.log(open_uniform(rng, size))
        log_a = (
            alpha * np.log(np.sin(alpha * u))
            + (1.0 - alpha) * np.log(np.sin((1.0 - alpha) * u))
            - np.log(np.sin(u))
        ) / (1.0 - alpha)
        return np.exp((1.0 - alpha) / alpha * (log_a - np.log(w)))


class Frank(ArchimedeanFamily):
    """Frank generator psi(u) = -ln[(1-e^(-theta u))/(1-e^(-theta))], theta > 0."""

    name = "frank"
    extended_ok = False

    def __init__(self, theta: float):
        if not theta > 0:
            raise ValueError(f"Frank requires theta > 0 here, got {theta}")
        self.theta = float(theta)

    def psi(self, u):
        th = self.theta
        u = np.asarray(u, dtype=float)
        return np.log(-np.expm1(-th)) - np.log(-np.expm1(-th * u))

    def dpsi(self, u):
        th = self.theta
        u = np.asarray(u, dtype=float)
        return th * np.exp(-th * u) / np.expm1(-th * u)

    def d2psi(self, u):
        th = self.theta
        u = np.asarray(u, dtype=float)
        return th**2 * np.exp(-th * u) / np.expm1(-th * u) ** 2

    def log_neg_dpsi(self, u):
        th = self.theta
        u = np.asarray(u, dtype=float)
        return math.log(th) - th * u - np.log(-np.expm1(-th * u))

    def d2psi_over_dpsi(self, u):
        th = self.theta
        u = np.asarray(u, dtype=float)
        return th / np.expm1(-th * u)

    def phi(self, t):
        th = self.theta
        t = np.asarray(t, dtype=float)
        return np.log1p(np.exp(-t) * np.expm1(-th)) / (-th)

    def _log_v(self, t):
        # v = w/(1-w) with w = (1-e^-theta) e^-t; 1-w >= e^-theta stays positive
        t = np.asarray(t, dtype=float)
        log_w = math.log(-math.expm1(-self.theta)) - t
        return log_w - np.log(-np.expm1(log_w))

    def log_abs_phi_deriv(self, t, k):
        if k == 0:
            log_w = math.log(-math.expm1(-self.theta)) - np.asarray(t, dtype=float)
            with np.errstate(divide="ignore"):
                exact = np.log(np.log1p(-np.exp(log_w)) / (-self.theta))
            # -log1p(-w)/theta ~ w/theta once w underflows the log1p form
            return np.where(log_w < -30.0, log_w - math.log(self.theta), exact)
        logv = self._log_v(t)
        logq = _frank_log_coefs(k)
        j = np.arange(1, k + 1)
        terms = logq.reshape((-1,) + (1,) * np.ndim(logv)) + np.multiply.outer(j, logv)
        return logsumexp(terms, axis=0) - math.log(self.theta)

    def sample_frailty(self, rng, size=None):
        """Logarithmic-series frailty, two-uniform method.

        For theta < 1e-6 the branch probability of Z > 1 is below 1e-6 and
        Z = 1 is returned deterministically (documented approximation).
        """
        if self.theta < 1e-6:
            return np.ones(size if size is not None else ())
        u = open_uniform(rng, size)
        v = open_uniform(rng, size)
        log_w = np.log(-np.expm1(-self.theta * v))
        log_w = np.minimum(log_w, math.log1p(-2.0**-53))
        return np.floor(1.0 + np.log(u) / log_w)


class Independence(ArchimedeanFamily):
    """Independence as a first-class (degenerate) Archimedean family.

    psi(u) = -ln u, phi(t) = e^-t, frailty Z == 1.  Keeping it in the same
    interface gives every estimator an oracle-friendly reduction path.
    """

    name = "independence"

    def __init__(self):
        self.theta = 0.0

    def __repr__(self):
        return "Independence()"

    def psi(self, u):
        return -np.log(np.asarray(u, dtype=float))

    def dpsi(self, u):
        return -1.0 / np.asarray(u, dtype=float)

    def d2psi(self, u):
        return 1.0 / np.asarray(u, dtype=float) ** 2

    def log_neg_dpsi(self, u):
        return -np.log(np.asarray(u, dtype=float))

    def d2psi_over_dpsi(self, u):
        return -1.0 / np.asarray(u, dtype=float)

    def phi(self, t):
        return np.exp(-np.asarray(t, dtype=float))

    def log_abs_phi_deriv(self, t, k):
        return -np.asarray(t, dtype=float)

    def sample_frailty(self, rng, size=None):
        return np.ones(size if size is not None else ())


def generator_eval(fam: ArchimedeanFamily, u):
    """Closed-form (psi, psi', psi'') at u in (0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u > 1.0):
        raise ValueError("generator_eval requires u in (0, 1]")
    return fam.psi(u), fam.dpsi(u), fam.d2psi(u)


# ---------------------------------------------------------------------------
# Gaussian copula
# ---------------------------------------------------------------------------


class GaussianCopula:
    """Correlation matrix plus its Cholesky factor and conditional helpers.

    ``equicorr_rho`` is set when the matrix is known to be of the form
    rho * 11' + (1 - rho) I, enabling the closed-form conditional recursion.
    """

    def __init__(self, sigma, equicorr_rho: float | None = None):
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("sigma must be a square matrix")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        if not np.allclose(np.diag(sigma), 1.0, atol=1e-12):
            raise ValueError("sigma must have unit diagonal")
        self.sigma = sigma
        self.n = sigma.shape[0]
        self.chol = np.linalg.cholesky(sigma)  # raises LinAlgError if not PD
        self.equicorr_rho = equicorr_rho

    def __repr__(self):
        if self.equicorr_rho is not None:
            return f"GaussianCopula.equicorrelated(rho={self.equicorr_rho:g}, n={self.n})"
        return f"GaussianCopula(n={self.n})"

    @classmethod
    def equicorrelated(cls, rho: float, n: int) -> "GaussianCopula":
        if n < 1:
            raise ValueError("n must be >= 1")
        if n > 1 and not (-1.0 / (n - 1) < rho < 1.0):
            raise ValueError(f"equicorrelation needs rho in (-1/(n-1), 1) = ({-1.0/(n-1):g}, 1), got {rho}")
        sigma = np.full((n, n), float(rho))
        np.fill_diagonal(sigma, 1.0)
        return cls(sigma, equicorr_rho=float(rho))

    def solve(self, z):
        """Sigma^{-1} z via the Cholesky factor (z may be a matrix of columns)."""
        from scipy.linalg import cho_solve

        return cho_solve((self.chol, True), z)

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def conditional(self, k: int, z_prefix, method: str = "auto"):
        """Parameters (mean, sd) of Z_k | Z_1..Z_{k-1} under N(0, sigma).

        ``k`` is 1-based; ``z_prefix`` holds the k-1 conditioning values.
        ``method`` picks the equicorrelation closed form or the generic
        Cholesky path ("auto" prefers the closed form when available).
        """
        if not 1 <= k <= self.n:
            raise ValueError(f"k must be in 1..{self.n}, got {k}")
        z_prefix = np.asarray(z_prefix, dtype=float).ravel()
        if z_prefix.shape[0] != k - 1:
            raise ValueError(f"z_prefix must have length {k - 1}")
        if method == "auto":
            method = "equicorr" if self.equicorr_rho is not None else "generic"
        if method == "equicorr":
            if self.equicorr_rho is None:
                raise ValueError("copula was not constructed as equicorrelated")
            rho = self.equicorr_rho
            denom = 1.0 + (k - 2) * rho
            mean = rho / denom * float(z_prefix.sum())
            var = (1.0 - rho) * (1.0 + (k - 1) * rho) / denom
            return mean, math.sqrt(var)
        if method != "generic":
            raise ValueError(f"unknown method {method!r}")
        if k == 1:
            return 0.0, 1.0
        from scipy.linalg import solve_triangular

        L = self.chol[: k - 1, : k - 1]
        eta = solve_triangular(L, z_prefix, lower=True)
        mean = float(self.chol[k - 1, : k - 1] @ eta)
        return mean, float(self.chol[k - 1, k - 1])


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

_U_LO = 2.0**-53
_U_HI = 1.0 - 2.0**-53


def _clip_open(u):
    return np.clip(u, _U_LO, _U_HI)


def sample_archimedean(fam: ArchimedeanFamily, marginals, rng: np.random.Generator, size: int):
    """Frailty-representation sampler: X_i = F_i^{-1}(phi(E_i / Z)).

    Returns (x, z) where x has shape (size, n) and z the frailty draws,
    kept so the extended conditional estimators can reuse them.
    """
    n = len(marginals)
    z = fam.sample_frailty(rng, size=size)
    e = -np.log(open_uniform(rng, (size, n)))
    u = _clip_open(fam.phi(e / np.asarray(z).reshape(-1, 1)))
    x = np.empty((size, n))
    for i, m in enumerate(marginals):
        x[:, i] = m.quantile(u[:, i])
    return x, np.asarray(z, dtype=float)


def sample_frank_direct(theta: float, marginals, rng: np.random.Generator, size: int):
    """Exchangeable Frank-copula sample via the logarithmic frailty (theta > 0)."""
    if theta == 0:
        raise ValueError("theta = 0 is independence; sample with Independence() directly")
    x, _ = sample_archimedean(Frank(theta), marginals, rng, size)
    return x


def sample_gaussian(gc: GaussianCopula, marginals, rng: np.random.Generator, size: int):
    """Plain Gaussian-copula sampler X_i = F_i^{-1}(Phi(z_i)), z = L eta."""
    from scipy.special import ndtr

    eta = rng.standard_normal((size, gc.n))
    zmat = eta @ gc.chol.T
    u = _clip_open(ndtr(zmat))
    x = np.empty_like(u)
    for i, m in enumerate(marginals):
        x[:, i] = m.quantile(u[:, i])
    return x


def sample_independence(marginals, rng: np.random.Generator, size: int):
    u = open_uniform(rng, (size, len(marginals)))
    x = np.empty_like(u)
    for i, m in enumerate(marginals):
        x[:, i] = m.quantile(u[:, i])
    return x
