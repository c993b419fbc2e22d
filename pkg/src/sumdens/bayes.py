"""Posterior marginal densities for Bayesian logistic regression.

Random-walk Metropolis sampling of the posterior, marginal density
estimation through the shifted sensitivity estimator (which only needs the
log-posterior up to its normalizing constant), and a Gaussian-kernel KDE
baseline with the Silverman bandwidth rule.

The expected data file is the 532-row diabetes study CSV with header
columns npreg, glu, bp, skin, bmi, ped, age and a binary column type
(Yes/No or 1/0).  Five predictors (npreg, glu, bmi, ped, age) are
standardized and an intercept column is prepended, giving a 6-dimensional
coefficient vector with a standard-normal prior.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .estimators import EstimatorOutput, marginal_sens
from .streams import CHAIN, open_uniform, substream

PREDICTORS = ("npreg", "glu", "bmi", "ped", "age")
ALL_COLUMNS = ("npreg", "glu", "bp", "skin", "bmi", "ped", "age")
RESPONSE = "type"
EXPECTED_ROWS = 532

_YES = {"yes", "1", "true"}
_NO = {"no", "0", "false"}


@dataclass
class LogisticModel:
    """Standardized design matrix (intercept first) and binary response."""

    design: np.ndarray
    response: np.ndarray
    predictor_names: tuple[str, ...] = PREDICTORS
    prior_sd: float = 1.0

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    def coefficient_index(self, name: str) -> int:
        """Column index of a named predictor's coefficient (intercept is 0)."""
        if name == "intercept":
            return 0
        try:
            return 1 + self.predictor_names.index(name)
        except ValueError:
            raise ValueError(f"unknown predictor {name!r}; choose from {self.predictor_names}") from None

    def log_post(self, beta: np.ndarray) -> float:
        t = self.design @ beta
        loglik = float(self.response @ t - np.logaddexp(0.0, t).sum())
        return loglik - 0.5 * float(beta @ beta) / self.prior_sd**2

    def grad_log_post(self, beta: np.ndarray) -> np.ndarray:
        t = self.design @ beta
        return self.design.T @ (self.response - expit(t)) - beta / self.prior_sd**2


def log_post_and_grad(model: LogisticModel, beta) -> tuple[float, np.ndarray]:
    """Unnormalized log-posterior and its gradient at beta."""
    beta = np.asarray(beta, dtype=float)
    return model.log_post(beta), model.grad_log_post(beta)


def load_pima(path) -> LogisticModel:
    """Load and standardize the 532-row diabetes CSV described above."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in (*ALL_COLUMNS, RESPONSE) if c not in header]
        if missing:
            raise ValueError(f"data file {path} is missing column(s): {', '.join(missing)}")
        rows = list(reader)
    if len(rows) != EXPECTED_ROWS:
        raise ValueError(f"expected {EXPECTED_ROWS} data rows in {path}, found {len(rows)}")

    y = np.empty(len(rows))
    for j, row in enumerate(rows):
        val = row[RESPONSE].strip().lower()
        if val in _YES:
            y[j] = 1.0
        elif val in _NO:
            y[j] = 0.0
        else:
            raise ValueError(f"non-binary outcome {row[RESPONSE]!r} in row {j + 1}")

    cols = []
    for name in PREDICTORS:
        v = np.array([float(row[name]) for row in rows])
        sd = v.std(ddof=1)
        if sd == 0:
            raise ValueError(f"predictor {name!r} is constant; cannot standardize")
        cols.append((v - v.mean()) / sd)
    design = np.column_stack([np.ones(len(rows))] + cols)
    return LogisticModel(design=design, response=y)


@dataclass
class Chain:
    """Post-burn-in states of a random-walk Metropolis run."""

    samples: np.ndarray
    scores: np.ndarray | None
    acceptance_rate: float
    seed: int


def rw_metropolis(
    logp_fn,
    init,
    step_var: float,
    burn_in: int,
    keep: int,
    seed: int,
    grad_fn=None,
) -> Chain:
    """Isotropic random-walk Metropolis targeting exp(logp_fn).

    Proposals are beta + sqrt(step_var) * xi with standard-normal xi;
    a proposal is accepted with probability min(1, exp(logp' - logp)).
    Gradients of the kept states are stored when ``grad_fn`` is given
    (recomputed only on acceptance).
    """
    if not step_var > 0:
        raise ValueError("step_var must be positive")
    init = np.asarray(init, dtype=float)
    dim = init.size
    rng = substream(seed, stream=CHAIN)
    steps = burn_in + keep
    xi = rng.standard_normal((steps, dim)) * math.sqrt(step_var)
    log_u = np.log(open_uniform(rng, steps))

    cur = init.copy()
    cur_lp = logp_fn(cur)
    cur_grad = grad_fn(cur) if grad_fn is not None else None
    samples = np.empty((keep, dim))
    scores = np.empty((keep, dim)) if grad_fn is not None else None
    accepted = 0
    for t in range(steps):
        prop = cur + xi[t]
        lp = logp_fn(prop)
        if lp - cur_lp > log_u[t]:
            cur, cur_lp = prop, lp
            if grad_fn is not None:
                cur_grad = grad_fn(cur)
            if t >= burn_in:
                accepted += 1
        if t >= burn_in:
            samples[t - burn_in] = cur
            if scores is not None:
                scores[t - burn_in] = cur_grad
    return Chain(
        samples=samples,
        scores=scores,
        acceptance_rate=accepted / max(keep, 1),
        seed=seed,
    )


def default_shift(grid) -> float:
    """Shift placing the evaluated grid in [0.5, inf), away from the 1/s blow-up."""
    lo = float(np.min(grid))
    return max(0.0, 0.5 - lo)


def marginal_posterior_density(
    chain: Chain,
    coordinate: int,
    grid,
    shift_a: float | None = None,
    pilot_frac: float = 0.05,
    n_batches: int = 25,
) -> list[EstimatorOutput]:
    """Marginal posterior density along one coordinate of the chain.

    Delegates to the shifted sensitivity estimator; the samples are serially
    correlated, so standard errors use non-overlapping batch means.
    """
    if chain.scores is None:
        raise ValueError("chain was run without gradients; rerun with grad_fn")
    if shift_a is None:
        shift_a = default_shift(grid)
    return marginal_sens(
        chain.samples,
        chain.scores,
        coordinate,
        grid,
        shift_a=shift_a,
        pilot_frac=pilot_frac,
        se_method="batch",
        n_batches=n_batches,
    )


def silverman_bandwidth(samples: np.ndarray) -> float:
    m = samples.size
    sd = samples.std(ddof=1)
    q25, q75 = np.percentile(samples, [25, 75])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        raise ValueError("degenerate sample: zero spread")
    return 0.9 * spread * m ** (-0.2)


def kde(samples, grid) -> np.ndarray:
    """Gaussian-kernel density estimate on ``grid`` with Silverman bandwidth."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2:
        raise ValueError("kde needs at least two samples")
    h = silverman_bandwidth(samples)
    grid = np.asarray(grid, dtype=float)
    out = np.zeros(grid.shape)
    norm = 1.0 / (samples.size * h * math.sqrt(2.0 * math.pi))
    chunk = max(1, 10_000_000 // max(grid.size, 1))
    for start in range(0, samples.size, chunk):
        block = samples[start : start + chunk]
        zz = (grid[:, None] - block[None, :]) / h
        out += norm * np.exp(-0.5 * zz * zz).sum(axis=1)
    return out
