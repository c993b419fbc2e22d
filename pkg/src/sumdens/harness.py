"""Experiment harness: named configurations, timing, and table emission.

Each named experiment simulates one replicate set shared by every selected
estimator, times each method's full-grid estimation pass separately (the
shared simulation is timed and reported on its own), and reports estimate,
standard error, and the square root of the work-normalized relative
variance per grid point.

Determinism contract: a fixed config yields byte-identical output for any
worker count.  Because real wall-clock timings vary between runs, the
``timing="nominal"`` mode substitutes 1.0 s per method so the emitted
sqrt(WNRV) column is reproducible too; the default "wall" mode uses the
measured pass times.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from . import gauss_seq
from .copulas import (
    Clayton,
    Frank,
    GaussianCopula,
    GumbelHougaard,
    Independence,
)
from .estimators import conditional_curve, sensitivity_curve
from .joint_score import JointModel, simulate
from .marginals import Exponential, Lognormal, Weibull, parse_marginal
from .streams import PREPASS, map_blocks

METHODS = ("sensitivity", "cond", "ext_cond", "ak", "ak_ext", "gauss_seq")
EXPERIMENTS = ("clayton_weibull", "gumbel_exponential", "frank_lognormal", "gauss_lognormal", "custom")


def wnrv(cpu_seconds: float, variance: float, r: int, estimate: float) -> float:
    """Square root of the work-normalized relative variance.

    sqrt(cpu_seconds * variance / (r * estimate^2)), where ``variance`` is
    the per-replicate variance of the estimator.  A zero estimate yields a
    NaN sentinel rather than an error.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if estimate == 0.0:
        return math.nan
    return math.sqrt(cpu_seconds * variance / (r * estimate * estimate))


@dataclass
class ExperimentConfig:
    name: str
    n: int
    r: int = 100_000
    seed: int = 20240612
    grid_min: float | None = None
    grid_max: float | None = None
    grid_points: int = 50
    pilot_frac: float = 0.05
    methods: tuple[str, ...] = ()
    rho: float | None = None
    theta: float | None = None
    copula: str | None = None
    marginal: str | None = None
    workers: int = 1
    timing: str = "wall"
    common_u: bool = True
    prepass: int = 1_000_000

    def validate(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; choose from {EXPERIMENTS}")
        if self.grid_points < 2:
            raise ValueError("grid needs at least 2 points")
        if self.r < 100:
            raise ValueError("R must be at least 100")
        if self.timing not in ("wall", "nominal"):
            raise ValueError("timing must be 'wall' or 'nominal'")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown method(s) {bad}; choose from {METHODS}")
        if not self.methods:
            raise ValueError("no methods selected")


def named_config(name: str, **overrides) -> ExperimentConfig:
    """Experiment presets mirroring the benchmark figures."""
    presets = {
        "clayton_weibull": dict(n=10, theta=0.2, methods=("sensitivity", "ext_cond", "ak_ext")),
        "gumbel_exponential": dict(n=15, theta=5.0, methods=("sensitivity", "ext_cond", "ak_ext")),
        "frank_lognormal": dict(n=10, theta=1e-3, methods=("sensitivity", "cond", "ak")),
        "gauss_lognormal": dict(n=32, rho=0.5, methods=("gauss_seq",)),
        "custom": dict(n=2, methods=("sensitivity",)),
    }
    if name not in presets:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    params = {**presets[name], **{k: v for k, v in overrides.items() if v is not None}}
    cfg = ExperimentConfig(name=name, **params)
    cfg.validate()
    return cfg


def build_model(cfg: ExperimentConfig) -> JointModel:
    """Construct the joint model an experiment configuration describes."""
    if cfg.name == "clayton_weibull":
        return JointModel(Clayton(cfg.theta), [Weibull(0.3, 1.0) for _ in range(cfg.n)])
    if cfg.name == "gumbel_exponential":
        return JointModel(GumbelHougaard(cfg.theta), [Exponential(1.0) for _ in range(cfg.n)])
    if cfg.name == "frank_lognormal":
        margs = [Lognormal(i - 10.0, math.sqrt(i)) for i in range(1, cfg.n + 1)]
        return JointModel(Frank(cfg.theta), margs)
    if cfg.name == "gauss_lognormal":
        if cfg.rho is None:
            raise ValueError("gauss_lognormal needs rho")
        cop = GaussianCopula.equicorrelated(cfg.rho, cfg.n)
        return JointModel(cop, [Lognormal(0.0, 1.0) for _ in range(cfg.n)])
    if cfg.name == "custom":
        if cfg.marginal is None:
            raise ValueError("custom experiments need --marginal (e.g. exponential:1.0)")
        margs = [parse_marginal(cfg.marginal) for _ in range(cfg.n)]
        kind = (cfg.copula or "independence").lower()
        if kind == "independence":
            cop = Independence()
        elif kind == "clayton":
            cop = Clayton(_need_theta(cfg))
        elif kind in ("gumbel", "gumbelhougaard"):
            cop = GumbelHougaard(_need_theta(cfg))
        elif kind == "frank":
            cop = Frank(_need_theta(cfg))
        elif kind in ("gauss", "gaussian"):
            if cfg.rho is None:
                raise ValueError("gaussian copula needs --rho")
            cop = GaussianCopula.equicorrelated(cfg.rho, cfg.n)
        else:
            raise ValueError(f"unknown copula {cfg.copula!r}")
        return JointModel(cop, margs)
    raise ValueError(f"unknown experiment {cfg.name!r}")


def _need_theta(cfg):
    if cfg.theta is None:
        raise ValueError(f"copula {cfg.copula!r} needs --theta")
    return cfg.theta


def check_methods(cfg: ExperimentConfig, jm: JointModel):
    for m in cfg.methods:
        if m in ("ext_cond", "ak_ext") and not (jm.has_frailty and jm.copula.extended_ok):
            raise ValueError(
                f"method {m!r} needs a frailty (product) representation; "
                f"{jm.copula!r} does not offer one for extended estimators"
            )
        if m in ("cond", "ak") and jm.is_gaussian:
            raise ValueError(f"method {m!r} is not available under a Gaussian copula; use gauss_seq")
        if m == "gauss_seq":
            if not (jm.is_gaussian or isinstance(jm.copula, Independence)):
                raise ValueError("gauss_seq needs a Gaussian or independence copula")
            if any(marg.support[0] < 0 for marg in jm.marginals):
                raise ValueError("gauss_seq needs positive-supported marginals")


@dataclass(frozen=True)
class EstimateRow:
    s: float
    method: str
    estimate: float
    std_error: float
    sqrt_wnrv: float


@dataclass
class RunResult:
    rows: list[EstimateRow]
    metadata: dict
    grid: np.ndarray


def _prepass_block(cfg_model, seed, index, size):
    from .streams import substream

    rng = substream(seed, PREPASS, index)
    return cfg_model.sample_block(rng, size).x.sum(axis=1)


def default_grid(jm: JointModel, cfg: ExperimentConfig) -> np.ndarray:
    """Grid covering >= 99% of the sum's empirical mass (pre-pass quantiles)."""
    if cfg.grid_min is not None and cfg.grid_max is not None:
        return np.linspace(cfg.grid_min, cfg.grid_max, cfg.grid_points)
    import functools

    fn = functools.partial(_prepass_block, jm, cfg.seed)
    sums = np.concatenate(map_blocks(fn, cfg.prepass, workers=cfg.workers))
    lo, hi = np.quantile(sums, [0.005, 0.995])
    lo = cfg.grid_min if cfg.grid_min is not None else lo
    hi = cfg.grid_max if cfg.grid_max is not None else hi
    return np.linspace(lo, hi, cfg.grid_points)


def _sha256(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr).tobytes()).hexdigest()


def _version() -> str:
    try:
        from importlib.metadata import version

        base = version("sumdens")
    except Exception:
        base = "0.0.0"
    try:
        import subprocess

        head = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        ).stdout.strip()
        return f"{base}+g{head}" if head else base
    except Exception:
        return base


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Simulate once, run every selected method over the grid, time each pass."""
    cfg.validate()
    jm = build_model(cfg)
    check_methods(cfg, jm)
    wall_start = time.perf_counter()
    grid = default_grid(jm, cfg)

    x_methods = [m for m in cfg.methods if m != "gauss_seq"]
    reps = None
    metadata: dict = {
        "experiment": cfg.name,
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(cfg).items()},
        "grid": [float(g) for g in grid],
        "version": _version(),
        "method_cpu_seconds": {},
        "replicate_sha256": {},
    }
    if x_methods:
        t0 = time.perf_counter()
        reps = simulate(jm, cfg.r, cfg.seed, workers=cfg.workers)
        metadata["simulation_seconds"] = time.perf_counter() - t0

    rows: list[EstimateRow] = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        if method == "sensitivity":
            outs = sensitivity_curve(reps, jm, grid, pilot_frac=cfg.pilot_frac)
        elif method == "cond":
            outs = conditional_curve(reps, jm, grid)
        elif method == "ext_cond":
            outs = conditional_curve(reps, jm, grid, extended=True)
        elif method == "ak":
            outs = conditional_curve(reps, jm, grid, ak=True)
        elif method == "ak_ext":
            outs = conditional_curve(reps, jm, grid, ak=True, extended=True)
        elif method == "gauss_seq":
            curve = gauss_seq.density_curve(
                jm, grid, cfg.r, cfg.seed, common_u=cfg.common_u, workers=cfg.workers
            )
            outs = curve.outputs
            metadata["gauss_seq_redraws"] = curve.redraws
            metadata["replicate_sha256"][method] = _sha256(
                gauss_seq.draw_uniform_matrix(jm.n, cfg.r, cfg.seed, workers=cfg.workers)
            )
        else:  # pragma: no cover - caught by validate()
            raise ValueError(method)
        elapsed = time.perf_counter() - t0
        cpu = 1.0 if cfg.timing == "nominal" else elapsed
        metadata["method_cpu_seconds"][method] = elapsed
        if method != "gauss_seq":
            metadata["replicate_sha256"][method] = _sha256(reps.x)
        for s, out in zip(grid, outs):
            var = out.std_error**2 * out.r_used
            rows.append(
                EstimateRow(
                    s=float(s),
                    method=method,
                    estimate=out.estimate,
                    std_error=out.std_error,
                    sqrt_wnrv=wnrv(cpu, var, out.r_used, out.estimate),
                )
            )
    metadata["wall_seconds"] = time.perf_counter() - wall_start
    return RunResult(rows=rows, metadata=metadata, grid=grid)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

CSV_HEADER = ("s", "method", "estimate", "std_error", "sqrt_wnrv")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit(result: RunResult, path, fmt: str = "csv"):
    """Write the estimate table as CSV or JSON (17 significant digits)."""
    if fmt == "csv":
        emit_csv(result.rows, path)
    elif fmt == "json":
        emit_json(result, path)
    else:
        raise ValueError(f"unknown output format {fmt!r}")


def emit_csv(rows, path):
    import csv as _csv

    if not rows:
        raise ValueError("refusing to emit an empty table")
    try:
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow(
                    (_fmt(row.s), row.method, _fmt(row.estimate), _fmt(row.std_error), _fmt(row.sqrt_wnrv))
                )
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def _json_float(x: float):
    return float(x) if math.isfinite(x) else None


def emit_json(result: RunResult, path):
    if not result.rows:
        raise ValueError("refusing to emit an empty table")
    payload = {
        "metadata": result.metadata,
        "rows": [
            {
                "s": row.s,
                "method": row.method,
                "estimate": _json_float(row.estimate),
                "std_error": _json_float(row.std_error),
                "sqrt_wnrv": _json_float(row.sqrt_wnrv),
            }
            for row in result.rows
        ],
    }
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
    except OSError as exc:
        raise OSError(f"cannot write JSON to {path}: {exc}") from exc


def load_json(path) -> tuple[list[EstimateRow], dict]:
    """Read back a JSON table (inverse of emit_json; None maps to NaN)."""
    with open(path) as fh:
        payload = json.load(fh)

    def val(x):
        return math.nan if x is None else float(x)

    rows = [
        EstimateRow(
            s=float(r["s"]),
            method=r["method"],
            estimate=val(r["estimate"]),
            std_error=val(r["std_error"]),
            sqrt_wnrv=val(r["sqrt_wnrv"]),
        )
        for r in payload["rows"]
    ]
    return rows, payload["metadata"]
