"""Density estimators for the sum S = X_1 + ... + X_n.

Four families of per-replicate estimators, each unbiased for f_S(s):

* sensitivity pair f1/f2 obtained by differentiating the cdf through the
  likelihood-ratio method, with their difference used as a control variate
  whose coefficient is fitted on a disjoint pilot block;
* conditional Monte Carlo, averaging the one-dimensional conditionals
  f(s - S_-i | x_-i) over the coordinates;
* the extended variant conditioning on the frailty Z as well;
* the differentiated maximum-summand (AK) estimator with its indicator
  1{M_-i + S_-i <= s}, extended form available for frailty families.

Plus the marginal-density variant of the sensitivity estimator with an
optional linear shift of the coordinate.

Replicate processing is vectorized; per-grid-point work uses per-replicate
value vectors so callers can form paired comparisons.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .copulas import CapabilityError
from .joint_score import JointModel, ReplicateSet


@dataclass(frozen=True)
class SensTerms:
    """The estimator pair and their difference for one replicate."""

    f1: float
    f2: float
    d: float


@dataclass(frozen=True)
class EstimatorOutput:
    estimate: float
    std_error: float
    r_used: int
    cpu_seconds: float


def sens_terms(x, score_x, s: float, n: int) -> SensTerms:
    """Pair (f1, f2) and control variate d = f1 - f2 for a single replicate."""
    if s == 0:
        raise ValueError("s = 0 is outside the estimator's domain; use the shifted marginal path")
    x = np.asarray(x, dtype=float)
    w = float(x @ np.asarray(score_x, dtype=float)) + n
    below = float(x.sum()) <= s
    f1 = w / s if below else 0.0
    f2 = 0.0 if below else -w / s
    return SensTerms(f1=f1, f2=f2, d=f1 - f2)


def cv_coefficient(pilot) -> float:
    """Control-variate coefficient beta = Cov(f1, d)/Var(d) from a pilot sample.

    Degenerate pilots (fewer than two points, or constant d) return 0 so the
    estimator falls back to plain f1.
    """
    f1 = np.array([p.f1 for p in pilot], dtype=float)
    d = np.array([p.d for p in pilot], dtype=float)
    return _beta(f1, d)


def _beta(f1: np.ndarray, d: np.ndarray) -> float:
    if f1.size < 2:
        return 0.0
    dv = d - d.mean()
    var_d = float(dv @ dv)
    if var_d == 0.0:
        return 0.0
    cov = float((f1 - f1.mean()) @ dv)
    return cov / var_d


def _pilot_split(r: int, pilot_frac: float) -> int:
    if not 0.0 <= pilot_frac < 1.0:
        raise ValueError("pilot_frac must be in [0, 1)")
    m_pilot = int(np.ceil(pilot_frac * r))
    if m_pilot >= r:
        raise ValueError(f"R = {r} leaves no evaluation replicates after a {pilot_frac:.0%} pilot")
    return m_pilot


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    m = values.size
    est = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return est, se


# ---------------------------------------------------------------------------
# sensitivity estimator
# ---------------------------------------------------------------------------


class SensWork:
    """Shared per-replicate quantities for the sensitivity estimators.

    ``w`` is x . grad log f(x) + n and ``total`` the row sum; both are
    independent of the evaluation point, so a grid pass computes them once.
    """

    def __init__(self, reps: ReplicateSet, jm: JointModel):
        scores = jm.score(reps.x)
        self.w = np.einsum("ij,ij->i", reps.x, scores) + reps.n
        self.total = reps.x.sum(axis=1)

    def pair_values(self, s: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-replicate (f1, d) at s; f2 = f1 - d."""
        if s == 0:
            raise ValueError("s = 0 is outside the estimator's domain")
        below = self.total <= s
        f1 = np.where(below, self.w, 0.0) / s
        d = self.w / s
        return f1, d

    def cv_values(self, s: float, pilot_frac: float) -> np.ndarray:
        """Evaluation-set values of f1 - beta*d, beta fitted on the pilot block."""
        f1, d = self.pair_values(s)
        m_pilot = _pilot_split(f1.size, pilot_frac)
        beta = _beta(f1[:m_pilot], d[:m_pilot])
        return f1[m_pilot:] - beta * d[m_pilot:]


def estimate_sensitivity(
    reps: ReplicateSet, jm: JointModel, s: float, pilot_frac: float = 0.05
) -> EstimatorOutput:
    """Control-variate sensitivity estimate of f_S(s).

    The pilot block (first ceil(pilot_frac * R) replicates) only fits beta;
    the mean and standard error come from the remaining replicates, keeping
    the estimator exactly unbiased.
    """
    t0 = time.perf_counter()
    values = SensWork(reps, jm).cv_values(s, pilot_frac)
    est, se = _mean_se(values)
    return EstimatorOutput(est, se, values.size, time.perf_counter() - t0)


def sensitivity_curve(
    reps: ReplicateSet, jm: JointModel, s_grid, pilot_frac: float = 0.05
) -> list[EstimatorOutput]:
    """Sensitivity estimates over a grid, sharing the score pass; beta per point."""
    t0 = time.perf_counter()
    work = SensWork(reps, jm)
    out = []
    for s in np.asarray(s_grid, dtype=float):
        values = work.cv_values(float(s), pilot_frac)
        est, se = _mean_se(values)
        out.append(EstimatorOutput(est, se, values.size, time.perf_counter() - t0))
    return out


# ---------------------------------------------------------------------------
# conditional, extended conditional, and AK estimators
# ---------------------------------------------------------------------------


class CondWork:
    """Shared structures for the conditional-style estimators."""

    def __init__(self, reps: ReplicateSet, jm: JointModel, extended: bool = False):
        if extended:
            if not (jm.has_frailty and jm.copula.extended_ok):
                raise CapabilityError(
                    f"extended conditioning needs a frailty representation; {jm.copula!r} has none"
                )
            if reps.z is None:
                raise CapabilityError("replicates carry no frailty draws; resimulate keeping Z")
        self.jm = jm
        self.extended = extended
        self.x = reps.x
        self.z = reps.z
        self.total = reps.x.sum(axis=1)
        if not extended:
            f = jm._cdf_matrix(reps.x)
            self.p = jm.copula.psi(f)
            self.t_full = self.p.sum(axis=1)
        # top-2 row statistics give max of x with one coordinate removed
        part = np.partition(reps.x, reps.n - 2, axis=1) if reps.n >= 2 else reps.x
        self.top1 = part[:, -1]
        self.top2 = part[:, -2] if reps.n >= 2 else np.full(reps.r, -np.inf)
        self.n_top1 = (reps.x == self.top1[:, None]).sum(axis=1)

    def _max_without(self, i: int) -> np.ndarray:
        xi = self.x[:, i]
        drop_max = (xi == self.top1) & (self.n_top1 == 1)
        return np.where(drop_max, self.top2, self.top1)

    def values(self, s: float, ak: bool = False) -> np.ndarray:
        """Per-replicate estimator values at s.

        Conditional/extended: mean over i of the conditional density at
        s - S_-i (out-of-support terms contribute 0).  AK: sum over i with
        the indicator 1{M_-i + S_-i <= s} and no 1/n factor.
        """
        n = self.x.shape[1]
        vals = np.zeros(self.x.shape[0])
        for i in range(n):
            s_rest = self.total - self.x[:, i]
            t = s - s_rest
            if self.extended:
                lc = self.jm._log_ext_cond(i, t, self.z)
            elif n == 1:
                lc = self.jm.marginals[i].log_pdf(np.atleast_1d(t))
            else:
                lc = self.jm._log_cond(i, t, self.t_full - self.p[:, i])
            term = np.exp(lc)
            if ak:
                term = term * (self._max_without(i) + s_rest <= s)
            vals += term
        return vals if ak else vals / n


def estimate_cond(reps: ReplicateSet, jm: JointModel, s: float) -> EstimatorOutput:
    """Conditional Monte Carlo estimate (1/n) sum_i f(s - S_-i | x_-i)."""
    t0 = time.perf_counter()
    values = CondWork(reps, jm).values(s)
    est, se = _mean_se(values)
    return EstimatorOutput(est, se, values.size, time.perf_counter() - t0)


def estimate_ext_cond(reps: ReplicateSet, jm: JointModel, s: float) -> EstimatorOutput:
    """Extended conditional estimate, conditioning on the frailty Z too."""
    t0 = time.perf_counter()
    values = CondWork(reps, jm, extended=True).values(s)
    est, se = _mean_se(values)
    return EstimatorOutput(est, se, values.size, time.perf_counter() - t0)


def estimate_ak(
    reps: ReplicateSet, jm: JointModel, s: float, extended: bool = False
) -> EstimatorOutput:
    """Differentiated maximum-summand estimator, optionally frailty-extended."""
    t0 = time.perf_counter()
    values = CondWork(reps, jm, extended=extended).values(s, ak=True)
    est, se = _mean_se(values)
    return EstimatorOutput(est, se, values.size, time.perf_counter() - t0)


def conditional_curve(
    reps: ReplicateSet, jm: JointModel, s_grid, ak: bool = False, extended: bool = False
) -> list[EstimatorOutput]:
    """Grid pass for the conditional-style estimators, sharing the psi matrix."""
    t0 = time.perf_counter()
    work = CondWork(reps, jm, extended=extended)
    out = []
    for s in np.asarray(s_grid, dtype=float):
        values = work.values(float(s), ak=ak)
        est, se = _mean_se(values)
        out.append(EstimatorOutput(est, se, values.size, time.perf_counter() - t0))
    return out


# ---------------------------------------------------------------------------
# marginal densities
# ---------------------------------------------------------------------------


def _batch_se(values: np.ndarray, n_batches: int) -> float:
    """Non-overlapping batch-means standard error (values kept in chain order)."""
    m = values.size
    nb = min(n_batches, m)
    if nb < 2:
        return 0.0
    usable = m - m % nb
    means = values[:usable].reshape(nb, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(nb))


def marginal_sens(
    samples,
    scores,
    i: int,
    s_grid,
    shift_a: float = 0.0,
    pilot_frac: float = 0.05,
    se_method: str = "iid",
    n_batches: int = 25,
) -> list[EstimatorOutput]:
    """Marginal density of coordinate i via the shifted sensitivity estimator.

    Per-sample term: (1/(s+a)) 1{X_i + a <= s + a} ((X_i + a) g_i + 1) with
    g_i the i-th component of grad log f at the *unshifted* sample (the score
    of a translate is unchanged).  The second-form estimator provides the
    control variate exactly as in the sum case.  The shift requires the
    coordinate to be supported on the whole real line.

    ``se_method="batch"`` computes batch-means standard errors for
    serially-correlated (MCMC) samples.
    """
    samples = np.asarray(samples, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if samples.ndim == 1:
        samples = samples.reshape(-1, 1)
        scores = scores.reshape(-1, 1)
    s_grid = np.asarray(s_grid, dtype=float)
    shifted = s_grid + shift_a
    if np.any(shifted == 0.0):
        raise ValueError(
            "grid point with s + shift = 0; choose a different shift_a to move the "
            "evaluation away from zero"
        )
    t0 = time.perf_counter()
    xs = samples[:, i] + shift_a
    w1 = xs * scores[:, i] + 1.0
    m_pilot = _pilot_split(xs.size, pilot_frac)
    out = []
    for st in shifted:
        f1 = np.where(xs <= st, w1, 0.0) / st
        d = w1 / st
        beta = _beta(f1[:m_pilot], d[:m_pilot])
        values = f1[m_pilot:] - beta * d[m_pilot:]
        est = float(values.mean())
        if se_method == "batch":
            se = _batch_se(values, n_batches)
        elif se_method == "iid":
            se = float(values.std(ddof=1) / np.sqrt(values.size))
        else:
            raise ValueError(f"unknown se_method {se_method!r}")
        out.append(EstimatorOutput(est, se, values.size, time.perf_counter() - t0))
    return out
