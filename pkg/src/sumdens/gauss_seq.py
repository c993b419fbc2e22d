"""Smooth estimators for sums of positive variables under a Gaussian copula.

The components are simulated sequentially, each truncated so the running
sum stays below s.  Every truncation probability alpha_k is one normal cdf
evaluation, the product of the alphas is an unbiased cdf estimator, and the
likelihood-ratio correction turns the same draw into a smooth (indicator
free) density estimator.

The draws are driven by a reusable uniform vector U: fixing U and moving s
moves the draw continuously, so by default one U matrix is shared by the
whole grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri_exp

from . import streams
from .copulas import GaussianCopula, Independence
from .estimators import EstimatorOutput, _mean_se
from .joint_score import JointModel

_LOG_HALF = float(np.log(0.5))
_SHY = 1.0 - 2.0**-50  # keeps x_k strictly inside the remaining budget
_BUDGET_FLOOR = 1e-300  # budget stays positive even when a path is exhausted
_U_LO = 2.0**-53
_U_HI = 1.0 - 2.0**-53


@dataclass
class SequentialDraw:
    """One batch of sequential truncated draws at a fixed s.

    ``y`` are the component fractions x_k / s (rows sum to at most 1, all
    entries positive); ``alphas`` the per-step truncation probabilities;
    ``z`` the latent normals and ``u`` the driving uniforms.
    """

    y: np.ndarray
    alphas: np.ndarray
    z: np.ndarray
    u: np.ndarray
    log_alphas: np.ndarray
    s: float


def _check_model(jm: JointModel):
    if not (jm.is_gaussian or isinstance(jm.copula, Independence)):
        raise ValueError("sequential conditioning is implemented for Gaussian or independence copulas")
    for m in jm.marginals:
        if m.support[0] < 0:
            raise ValueError(f"positive support required; {m!r} extends below 0")


def _truncation_point(m, r):
    """z* = Phi^{-1}(F(r)) through whichever log tail is the accurate one."""
    lc = np.asarray(m.log_cdf(r), dtype=float)
    ls = np.asarray(m.log_sf(r), dtype=float)
    lower = lc <= _LOG_HALF
    z = np.empty(lc.shape)
    z[lower] = ndtri_exp(lc[lower])
    z[~lower] = -ndtri_exp(ls[~lower])
    return z


def sequential_draw(jm: JointModel, s: float, u: np.ndarray) -> SequentialDraw:
    """Draw Y with components truncated to the simplex region sum(Y) <= 1.

    For k = 1..n: the remaining budget is r_k = s(1 - sum_{j<k} y_j); the
    latent normal Z_k | Z_{1:k-1} ~ N(m_k, v_k^2) is truncated at
    z*_k = Phi^{-1}(F_k(r_k)) via inverse transform with the driving uniform
    u_k, so alpha_k = Phi((z*_k - m_k)/v_k) comes out as a byproduct.
    alpha_k and u_k * alpha_k are handled in log space; a true alpha_k = 0
    cannot occur because r_k > 0 by construction.
    """
    _check_model(jm)
    if not s > 0:
        raise ValueError("s must be positive")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u.reshape(1, -1)
    r_draws, n = u.shape
    if n != jm.n:
        raise ValueError(f"u must have {jm.n} columns")

    gc = jm.copula if jm.is_gaussian else None
    equicorr = None if gc is None else gc.equicorr_rho
    use_closed_form = gc is None or equicorr is not None
    rho = 0.0 if gc is None else (equicorr if equicorr is not None else 0.0)

    x = np.empty((r_draws, n))
    zmat = np.empty((r_draws, n))
    log_alpha = np.empty((r_draws, n))
    eta = np.empty((r_draws, n)) if not use_closed_form else None
    z_sum = np.zeros(r_draws)
    budget = np.full(r_draws, float(s))

    for k in range(n):
        m_k_marg = jm.marginals[k]
        zstar = _truncation_point(m_k_marg, budget)
        if use_closed_form:
            denom = 1.0 + (k - 1) * rho
            mean = (rho / denom) * z_sum
            sd = np.sqrt((1.0 - rho) * (1.0 + k * rho) / denom)
        else:
            mean = eta[:, :k] @ gc.chol[k, :k] if k else np.zeros(r_draws)
            sd = gc.chol[k, k]
        la = log_ndtr((zstar - mean) / sd)
        eta_k = ndtri_exp(np.log(u[:, k]) + la)
        z_k = mean + sd * eta_k
        u_val = np.clip(ndtr(z_k), _U_LO, _U_HI)
        x_k = np.minimum(m_k_marg.quantile(u_val), budget * _SHY)

        log_alpha[:, k] = la
        zmat[:, k] = z_k
        x[:, k] = x_k
        z_sum += z_k
        if eta is not None:
            eta[:, k] = eta_k
        # paths that exhaust the budget carry alpha products ~ exp(-1e5);
        # flooring keeps the recursion finite without affecting the estimate
        budget = np.maximum(budget - x_k, _BUDGET_FLOOR)

    return SequentialDraw(
        y=x / s, alphas=np.exp(log_alpha), z=zmat, u=u, log_alphas=log_alpha, s=float(s)
    )


def cdf_estimate(draw: SequentialDraw) -> np.ndarray:
    """Per-replicate unbiased cdf estimates: the product of the alphas."""
    return np.exp(draw.log_alphas.sum(axis=1))


def pdf_estimate(jm: JointModel, s: float, draw: SequentialDraw) -> np.ndarray:
    """Per-replicate smooth density estimates at s.

    (Y . grad log f_X(s Y) + n/s) * prod_k alpha_k, using the same draw as
    the cdf estimator but without any indicator.
    """
    if draw.s != s:
        raise ValueError("draw was generated for a different s")
    x = s * draw.y
    g = jm.score(x)
    base = np.einsum("ij,ij->i", draw.y, g) + jm.n / s
    return base * np.exp(draw.log_alphas.sum(axis=1))


@dataclass
class DensityCurve:
    s_grid: np.ndarray
    outputs: list[EstimatorOutput]
    redraws: int


def _u_matrix_block(master_seed, stream, n, index, size):
    rng = streams.substream(master_seed, stream, index)
    return streams.open_uniform(rng, (size, n))


def draw_uniform_matrix(
    n: int, r: int, master_seed: int, workers: int = 1, stream: int = streams.GAUSS_U
) -> np.ndarray:
    """Block-deterministic driving uniforms, bit-identical for any worker count."""
    import functools

    fn = functools.partial(_u_matrix_block, master_seed, stream, n)
    return np.concatenate(streams.map_blocks(fn, r, workers=workers), axis=0)


def density_curve(
    jm: JointModel,
    s_grid,
    r: int,
    master_seed: int,
    common_u: bool = True,
    workers: int = 1,
) -> DensityCurve:
    """Smooth density estimates over a grid of s values.

    By default one uniform matrix drives every grid point (smooth curves in
    s); ``common_u=False`` draws fresh uniforms per point for variance
    diagnostics.  Draws whose score evaluation lands on a support edge are
    redrawn from a fresh substream; the count is reported.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= 0):
        raise ValueError("grid must be positive")
    t0 = time.perf_counter()
    u_common = draw_uniform_matrix(jm.n, r, master_seed, workers=workers) if common_u else None
    outputs = []
    redraws = 0
    for gi, s in enumerate(s_grid):
        if common_u:
            u = u_common
        else:
            u = draw_uniform_matrix(jm.n, r, master_seed + 7919 * (gi + 1), workers=workers)
        draw = sequential_draw(jm, float(s), u)
        vals = pdf_estimate(jm, float(s), draw)
        bad = ~np.isfinite(vals)
        attempt = 0
        while np.any(bad) and attempt < 8:
            attempt += 1
            rng = streams.substream(master_seed, streams.RETRY, gi * 16 + attempt)
            u_new = streams.open_uniform(rng, (int(bad.sum()), jm.n))
            redo = sequential_draw(jm, float(s), u_new)
            vals[bad] = pdf_estimate(jm, float(s), redo)
            redraws += int(bad.sum())
            bad = ~np.isfinite(vals)
        if np.any(bad):
            raise FloatingPointError(f"non-finite density values persisted at s={s}")
        est, se = _mean_se(vals)
        outputs.append(EstimatorOutput(est, se, vals.size, time.perf_counter() - t0))
    return DensityCurve(s_grid=s_grid, outputs=outputs, redraws=redraws)
