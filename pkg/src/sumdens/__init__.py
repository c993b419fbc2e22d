"""Unbiased Monte Carlo estimators for the density of a sum of dependent
random variables, with copula dependence models and a CLI benchmark harness."""

from .copulas import (
    CapabilityError,
    Clayton,
    Frank,
    GaussianCopula,
    GumbelHougaard,
    Independence,
    generator_eval,
)
from .estimators import (
    EstimatorOutput,
    SensTerms,
    cv_coefficient,
    estimate_ak,
    estimate_cond,
    estimate_ext_cond,
    estimate_sensitivity,
    marginal_sens,
    sens_terms,
)
from .gauss_seq import SequentialDraw, cdf_estimate, density_curve, pdf_estimate, sequential_draw
from .joint_score import JointModel, ReplicateSet, UnnormalizedDensity, simulate
from .marginals import Exponential, Lognormal, Marginal, Normal, Uniform, Weibull

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "Clayton",
    "EstimatorOutput",
    "Exponential",
    "Frank",
    "GaussianCopula",
    "GumbelHougaard",
    "Independence",
    "JointModel",
    "Lognormal",
    "Marginal",
    "Normal",
    "ReplicateSet",
    "SensTerms",
    "SequentialDraw",
    "Uniform",
    "UnnormalizedDensity",
    "Weibull",
    "cdf_estimate",
    "cv_coefficient",
    "density_curve",
    "estimate_ak",
    "estimate_cond",
    "estimate_ext_cond",
    "estimate_sensitivity",
    "generator_eval",
    "marginal_sens",
    "pdf_estimate",
    "sens_terms",
    "sequential_draw",
    "simulate",
]
