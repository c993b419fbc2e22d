"""Independent oracles shared by the test modules.

Everything here is deliberately simple and separate from the estimator
implementations: finite differences, quadrature, FFT convolution of cell
masses, and closed-form reference densities.
"""

import math

import numpy as np
from scipy import integrate


def erlang_pdf(s, n, lam=1.0):
    return lam**n * s ** (n - 1) * math.exp(-lam * s) / math.factorial(n - 1)


def erlang_cdf(s, n, lam=1.0):
    # 1 - sum_{k<n} (lam s)^k e^{-lam s} / k!
    terms = [(lam * s) ** k / math.factorial(k) for k in range(n)]
    return 1.0 - math.exp(-lam * s) * sum(terms)


def central_fd(fn, x, h):
    """(fn(x+h) - fn(x-h)) / 2h."""
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


def richardson_d1(fn, t, h):
    """First derivative via two Richardson levels on the central difference."""
    d = lambda hh: central_fd(fn, t, hh)
    d1, d2, d3 = d(h), d(h / 2), d(h / 4)
    r1 = (4 * d2 - d1) / 3
    r2 = (4 * d3 - d2) / 3
    return (16 * r2 - r1) / 15


def fd_score(jm, x, rel_step=1e-6):
    """Componentwise central differences of log_density at one point."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (jm.log_density(xp) - jm.log_density(xm)) / (2 * h)
    return out


def quad_pdf_mass(m, lo=None, hi=None):
    """Numerical quadrature of a marginal pdf over its support."""
    a = m.support[0] if lo is None else lo
    b = m.support[1] if hi is None else hi
    val, _ = integrate.quad(lambda t: float(m.pdf(t)), a, b, limit=400)
    return val


def fft_conv_density(marginals, s_points, step=1e-3, hi=60.0, window=0.02):
    """Density of the independent sum via FFT convolution of cell masses.

    Each marginal is discretized to cells of width ``step`` on [0, hi] with
    the exact cdf-difference mass placed at the cell center (this handles
    the Weibull shape<1 singularity exactly).  With zero padding past
    n * hi there is no wraparound, so values at s <= hi are affected only by
    the O(step) discretization.  The density at s is the convolved mass in
    a +-window/2 band divided by the band width.
    """
    nbins = int(round(hi / step))
    edges = np.arange(nbins + 1) * step
    n = len(marginals)
    size = 1
    while size < (nbins + 1) * n:
        size *= 2
    spec = None
    for m in marginals:
        cell = np.diff(m.cdf(edges))
        f = np.fft.rfft(cell, size)
        spec = f if spec is None else spec * f
    mass = np.fft.irfft(spec, size)
    mass = np.maximum(mass, 0.0)
    # index J corresponds to s = (J + n/2) * step (cell centers add up);
    # select the band by index so float comparisons cannot drop edge cells
    half = max(1, int(round(window / (2 * step))))
    out = np.empty(len(s_points))
    for j, s in enumerate(np.asarray(s_points, dtype=float)):
        j0 = int(round(s / step - 0.5 * n))
        lo, hi_ix = max(j0 - half, 0), min(j0 + half + 1, size)
        out[j] = mass[lo:hi_ix].sum() / ((hi_ix - lo) * step)
    return out


def kendall_tau_se(r):
    """Asymptotic null standard error of the sample Kendall tau."""
    return math.sqrt(2.0 * (2 * r + 5) / (9.0 * r * (r - 1)))


def frank_bivariate_cdf(u, v, theta):
    return -1.0 / theta * math.log1p(
        (math.expm1(-theta * u) * math.expm1(-theta * v)) / math.expm1(-theta)
    )
