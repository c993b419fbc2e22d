import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import quad_pdf_mass
from sumdens.marginals import (
    Exponential,
    Lognormal,
    Normal,
    Uniform,
    Weibull,
    parse_marginal,
)

FAMILIES = [
    Exponential(1.0),
    Exponential(0.3),
    Weibull(0.3, 1.0),
    Weibull(2.0, 1.5),
    Lognormal(0.0, 1.0),
    Lognormal(-2.0, 3.0),
    Normal(0.0, 1.0),
    Normal(3.0, 0.4),
]


def interior_points(m, rng, size):
    u = rng.uniform(0.01, 0.99, size)
    return m.quantile(u)


def test_exponential_point_values():
    e = Exponential(1.0)
    r = e.eval(1.0)
    assert_allclose(r.pdf, math.exp(-1.0), rtol=1e-12)
    assert_allclose(r.cdf, 1.0 - math.exp(-1.0), rtol=1e-12)
    assert_allclose(r.score, -1.0)
    # constant score on the support
    xs = np.array([0.2, 1.0, 7.5])
    assert_allclose(Exponential(2.5).score(xs), -2.5)


def test_exponential_quantile_closed_form():
    assert_allclose(Exponential(1.0).quantile(0.5), math.log(2.0), rtol=1e-12)


def test_weibull_point_values():
    w = Weibull(0.3, 1.0)
    assert_allclose(w.pdf(1.0), 0.3 * math.exp(-1.0), rtol=1e-12)
    assert_allclose(w.score(1.0), (0.3 - 1.0) / 1.0 - 0.3 * 1.0, rtol=1e-12)
    assert_allclose(w.quantile(1.0 - math.exp(-1.0)), 1.0, rtol=1e-10)


def test_normal_quantile_median():
    assert Normal(0.0, 1.0).quantile(0.5) == 0.0


def test_quantile_domain_errors():
    for bad in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(ValueError):
            Exponential(1.0).quantile(bad)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Exponential(0.0)
    with pytest.raises(ValueError):
        Weibull(-1.0, 1.0)
    with pytest.raises(ValueError):
        Weibull(1.0, 0.0)
    with pytest.raises(ValueError):
        Normal(0.0, 0.0)
    with pytest.raises(ValueError):
        Lognormal(0.0, -1.0)


def test_outside_support():
    for m in (Exponential(1.0), Weibull(0.3, 1.0), Lognormal(0.0, 1.0)):
        assert m.pdf(-1.0) == 0.0
        assert m.log_pdf(-1.0) == -np.inf
        assert m.cdf(-1.0) == 0.0
        assert np.isnan(m.score(-1.0))


def test_weibull_singularity_flagged():
    assert Weibull(0.3, 1.0).pdf(0.0) == np.inf
    assert Weibull(2.0, 1.0).pdf(0.0) == 0.0


@pytest.mark.parametrize("m", FAMILIES, ids=repr)
def test_round_trip(m):
    rng = np.random.default_rng(101)
    u = rng.uniform(1e-6, 1.0 - 1e-6, 10_000)
    x = m.quantile(u)
    assert np.max(np.abs(m.cdf(x) - u)) < 1e-9


@pytest.mark.parametrize("m", FAMILIES, ids=repr)
def test_score_matches_log_pdf_slope(m):
    rng = np.random.default_rng(202)
    x = interior_points(m, rng, 1000)
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    fd = (m.log_pdf(x + h) - m.log_pdf(x - h)) / (2 * h)
    rel = np.abs(m.score(x) - fd) / np.maximum(np.abs(fd), 1e-12)
    assert np.max(rel) < 1e-5


@pytest.mark.parametrize("m", FAMILIES, ids=repr)
def test_normalization(m):
    lo, hi = m.support
    if not math.isfinite(hi):
        hi = float(m.quantile(1.0 - 1e-13))
    if not math.isfinite(lo):
        lo = float(m.quantile(1e-13))
    assert abs(quad_pdf_mass(m, lo, hi) - 1.0) < 1e-8


@pytest.mark.parametrize("m", FAMILIES, ids=repr)
def test_log_tails_stay_finite(m):
    # deep-tail log cdf/sf must not flush to -inf while mass is representable
    x_lo = m.quantile(1e-12)
    x_hi = m.quantile(1.0 - 1e-12)
    assert m.log_cdf(x_lo) < math.log(1e-9)
    assert np.isfinite(m.log_cdf(x_lo))
    assert m.log_sf(x_hi) < math.log(1e-9)
    assert np.isfinite(m.log_sf(x_hi))
    # extreme lognormal tail: probability ~1e-88 still representable in log space
    if isinstance(m, Lognormal) and m.mu == 0.0 and m.sigma == 1.0:
        assert -210.0 < m.log_cdf(math.exp(-20.0)) < -190.0


def test_uniform_identity():
    u = Uniform()
    assert u.pdf(0.5) == 1.0
    assert u.cdf(0.25) == 0.25
    assert u.quantile(0.7) == 0.7
    assert u.score(0.5) == 0.0


def test_parse_marginal():
    m = parse_marginal("weibull:0.3,1")
    assert isinstance(m, Weibull) and m.k == 0.3 and m.lam == 1.0
    assert isinstance(parse_marginal("uniform"), Uniform)
    with pytest.raises(ValueError):
        parse_marginal("cauchy:0,1")
    with pytest.raises(ValueError):
        parse_marginal("normal:1")
