import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.stats import kendalltau, kstest

from oracles import frank_bivariate_cdf, kendall_tau_se, richardson_d1
from sumdens.copulas import (
    CapabilityError,
    Clayton,
    Frank,
    GaussianCopula,
    GumbelHougaard,
    Independence,
    generator_eval,
    sample_archimedean,
    sample_frank_direct,
)
from sumdens.marginals import Exponential, Lognormal, Uniform, Weibull
from sumdens.streams import substream

ALL_FAMILIES = [Clayton(0.2), Clayton(1.0), GumbelHougaard(5.0), GumbelHougaard(1.7), Frank(2.0), Frank(0.001)]


# -- generator evaluation ---------------------------------------------------


def test_generator_eval_clayton():
    psi, dpsi, d2psi = generator_eval(Clayton(1.0), 0.5)
    assert_allclose(psi, 1.0)
    assert_allclose(dpsi, -4.0)
    assert_allclose(d2psi, 16.0)


def test_generator_boundary():
    for fam in ALL_FAMILIES:
        psi, dpsi, _ = generator_eval(fam, 1.0)
        assert_allclose(psi, 0.0, atol=1e-12)
        assert dpsi < 0


def test_generator_eval_gumbel():
    psi, _, _ = generator_eval(GumbelHougaard(5.0), math.exp(-1.0))
    assert_allclose(psi, 1.0, rtol=1e-12)


def test_generator_eval_domain():
    with pytest.raises(ValueError):
        generator_eval(Clayton(1.0), 0.0)
    with pytest.raises(ValueError):
        generator_eval(Clayton(1.0), 1.5)


@pytest.mark.parametrize("fam", ALL_FAMILIES, ids=repr)
def test_generator_derivatives_match_fd(fam):
    rng = np.random.default_rng(5)
    u = rng.uniform(0.05, 0.95, 50)
    h = 1e-6
    fd1 = (fam.psi(u + h) - fam.psi(u - h)) / (2 * h)
    assert_allclose(fam.dpsi(u), fd1, rtol=1e-5)
    fd2 = (fam.dpsi(u + h) - fam.dpsi(u - h)) / (2 * h)
    assert_allclose(fam.d2psi(u), fd2, rtol=1e-4)
    assert_allclose(fam.d2psi(u) / fam.dpsi(u), fam.d2psi_over_dpsi(u), rtol=1e-10)
    assert_allclose(np.log(-fam.dpsi(u)), fam.log_neg_dpsi(u), rtol=1e-10)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Clayton(0.0)
    with pytest.raises(ValueError):
        GumbelHougaard(0.9)
    with pytest.raises(ValueError):
        Frank(-1.0)


# -- high-order derivatives of phi ------------------------------------------


def test_phi_deriv_clayton_closed_form_at_zero():
    la, sign = Clayton(1.0).phi_deriv(0.0, 3)
    assert sign == -1
    assert_allclose(sign * math.exp(la), -6.0, rtol=1e-12)


def test_phi_deriv_order_zero_is_phi():
    for fam in ALL_FAMILIES:
        la, sign = fam.phi_deriv(0.0, 0)
        assert sign == 1
        assert_allclose(math.exp(la), 1.0, rtol=1e-10)  # phi(0) = 1
        la1, _ = fam.phi_deriv(2.0, 0)
        assert_allclose(math.exp(la1), fam.phi(2.0), rtol=1e-10)


def test_phi_deriv_k_max_capability():
    with pytest.raises(CapabilityError):
        Clayton(1.0).phi_deriv(1.0, 41)
    with pytest.raises(ValueError):
        Clayton(1.0).phi_deriv(-0.5, 2)


@pytest.mark.parametrize("fam", ALL_FAMILIES, ids=repr)
def test_phi_deriv_matches_richardson_fd(fam):
    rng = np.random.default_rng(17)
    ts = rng.uniform(0.01, 20.0, 100)
    for k in range(1, 13):
        sgn_prev = 1 if (k - 1) % 2 == 0 else -1

        def value_prev(t):
            la, _ = fam.phi_deriv(np.asarray(t), k - 1)
            return sgn_prev * np.exp(la)

        sample = ts[:: max(1, len(ts) // 12)]
        for t in sample:
            fd = richardson_d1(value_prev, t, 1e-3 * max(t, 0.1))
            la, sign = fam.phi_deriv(t, k)
            val = sign * math.exp(la)
            assert abs(val - fd) / max(abs(val), 1e-280) < 1e-5, (fam, k, t)


@pytest.mark.parametrize("fam", ALL_FAMILIES + [Independence()], ids=repr)
def test_complete_monotonicity_signs(fam):
    rng = np.random.default_rng(23)
    for _ in range(1000):
        t = rng.uniform(0.0, 30.0)
        k = rng.integers(1, 13)
        la, sign = fam.phi_deriv(t, int(k))
        assert sign == (-1) ** k
        assert np.isfinite(la) or la == np.inf


def test_phi_deriv_log_space_no_overflow_high_order():
    # n = 32 plus the score's extra order: values span hundreds of orders
    fam = GumbelHougaard(5.0)
    la, sign = fam.phi_deriv(0.01, 33)
    assert np.isfinite(la)
    assert sign == -1
    la40, _ = Frank(2.0).phi_deriv(0.5, 40)
    assert np.isfinite(la40)


# -- frailty samplers --------------------------------------------------------


@pytest.mark.parametrize("fam", [Clayton(0.2), GumbelHougaard(5.0), Frank(2.0)], ids=repr)
def test_frailty_laplace_transform_identity(fam):
    rng = substream(2024, 90, 0)
    z = fam.sample_frailty(rng, 100_000)
    for t in (0.1, 1.0, 5.0):
        vals = np.exp(-t * z)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - fam.phi(t)) < 4 * se, (fam, t)


def test_clayton_frailty_gamma_mean():
    rng = substream(7, 90, 1)
    z = Clayton(0.2).sample_frailty(rng, 100_000)
    se = z.std(ddof=1) / math.sqrt(z.size)
    assert abs(z.mean() - 5.0) < 4 * se


def test_gumbel_theta_one_degenerate():
    rng = substream(7, 90, 2)
    z = GumbelHougaard(1.0).sample_frailty(rng, 1000)
    assert np.all(z == 1.0)


def test_frank_logseries_mass_at_one():
    rng = substream(7, 90, 3)
    fam = Frank(0.001)
    z = fam.sample_frailty(rng, 100_000)
    p = -math.expm1(-0.001)
    p1 = p / (-math.log1p(-p))
    se = math.sqrt(p1 * (1 - p1) / z.size)
    assert abs((z == 1.0).mean() - p1) < 4 * se
    # tiny theta short-circuits to Z = 1
    assert np.all(Frank(1e-8).sample_frailty(rng, 100) == 1.0)


# -- joint samplers -----------------------------------------------------------


def test_marshall_olkin_hand_composition():
    # Z = 1, E_1 = 1, Clayton theta=1, Exp(1) marginal: u = phi(1) = 1/2
    fam = Clayton(1.0)
    u = fam.phi(1.0)
    assert_allclose(u, 0.5)
    assert_allclose(Exponential(1.0).quantile(u), math.log(2.0))


def test_marshall_olkin_boundary():
    fam = Clayton(1.0)
    assert_allclose(fam.phi(0.0), 1.0)  # E -> 0 pushes u to the upper endpoint


def test_clayton_sample_kendall_tau():
    rng = substream(11, 90, 4)
    x, z = sample_archimedean(Clayton(0.2), [Uniform()] * 10, rng, 100_000)
    assert np.all(z > 0)
    tau = kendalltau(x[:, 0], x[:, 1]).statistic
    target = 0.2 / 2.2
    assert abs(tau - target) < 4 * kendall_tau_se(x.shape[0])


def test_archimedean_marginals_ks():
    rng = substream(12, 90, 5)
    margs = [Weibull(0.3, 1.0), Exponential(1.0), Lognormal(0.0, 1.0)]
    x, _ = sample_archimedean(Clayton(0.2), margs, rng, 100_000)
    crit_1pct = 1.628 / math.sqrt(x.shape[0])
    for i, m in enumerate(margs):
        stat = kstest(x[:, i], m.cdf).statistic
        assert stat < crit_1pct, (i, stat)


def test_frank_direct_near_independence_tau():
    rng = substream(13, 90, 6)
    x = sample_frank_direct(1e-3, [Uniform()] * 10, rng, 100_000)
    assert np.all((x > 0) & (x < 1))
    tau = kendalltau(x[:, 0], x[:, 1]).statistic
    # tau(theta) ~ theta/9 for small theta: statistically indistinguishable from 0
    assert abs(tau - 1e-3 / 9) < 4 * kendall_tau_se(x.shape[0])


def test_frank_direct_bivariate_cdf():
    rng = substream(14, 90, 7)
    theta = 2.0
    x = sample_frank_direct(theta, [Uniform()] * 2, rng, 100_000)
    emp = np.mean((x[:, 0] <= 0.5) & (x[:, 1] <= 0.5))
    cval = frank_bivariate_cdf(0.5, 0.5, theta)
    se = math.sqrt(cval * (1 - cval) / x.shape[0])
    assert abs(emp - cval) < 4 * se


def test_frank_direct_theta_zero_rejected():
    rng = substream(15, 90, 8)
    with pytest.raises(ValueError):
        sample_frank_direct(0.0, [Uniform()] * 2, rng, 10)


# -- Gaussian copula ----------------------------------------------------------


def test_cholesky_round_trip():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((6, 6))
    cov = a @ a.T + 6 * np.eye(6)
    d = np.sqrt(np.diag(cov))
    sigma = cov / np.outer(d, d)
    gc = GaussianCopula(sigma)
    assert np.max(np.abs(gc.chol @ gc.chol.T - sigma)) < 1e-10


def test_gaussian_validation():
    with pytest.raises(ValueError):
        GaussianCopula(np.array([[1.0, 0.2], [0.3, 1.0]]))  # not symmetric
    with pytest.raises(ValueError):
        GaussianCopula(np.array([[2.0, 0.0], [0.0, 1.0]]))  # diagonal not 1
    with pytest.raises(np.linalg.LinAlgError):
        GaussianCopula(np.array([[1.0, 1.0], [1.0, 1.0]]))  # singular
    with pytest.raises(ValueError):
        GaussianCopula.equicorrelated(-0.6, 3)  # below -1/(n-1)


def test_conditional_trivial_cases():
    gc = GaussianCopula.equicorrelated(0.0, 4)
    for k in (1, 2, 4):
        mean, sd = gc.conditional(k, np.zeros(k - 1))
        assert mean == 0.0 and sd == 1.0
    gc2 = GaussianCopula.equicorrelated(0.5, 4)
    mean, sd = gc2.conditional(1, [])
    assert mean == 0.0 and sd == 1.0


def test_conditional_equicorr_matches_generic():
    gc = GaussianCopula.equicorrelated(0.5, 3)
    m1, s1 = gc.conditional(3, [1.0, -0.5], method="equicorr")
    m2, s2 = gc.conditional(3, [1.0, -0.5], method="generic")
    assert abs(m1 - m2) < 1e-10
    assert abs(s1 - s2) < 1e-10
    assert_allclose(m1, 1.0 / 6.0, rtol=1e-12)
    assert_allclose(s1**2, 2.0 / 3.0, rtol=1e-12)


def test_conditional_equicorr_matches_generic_many():
    rng = np.random.default_rng(8)
    gc = GaussianCopula.equicorrelated(0.3, 8)
    for k in range(1, 9):
        z = rng.standard_normal(k - 1)
        m1, s1 = gc.conditional(k, z, method="equicorr")
        m2, s2 = gc.conditional(k, z, method="generic")
        assert abs(m1 - m2) < 1e-10 and abs(s1 - s2) < 1e-10


def test_conditional_range_errors():
    gc = GaussianCopula.equicorrelated(0.5, 3)
    with pytest.raises(ValueError):
        gc.conditional(0, [])
    with pytest.raises(ValueError):
        gc.conditional(4, [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        gc.conditional(2, [])  # wrong prefix length
