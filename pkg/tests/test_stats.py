import math

import numpy as np
import pytest
from scipy import integrate as spi

from lambdacoal.errors import DomainError, EmptySample
from lambdacoal.stats import (
    beta_conjecture_c,
    beta_limit_law,
    conjecture_alpha,
    conjecture_law,
    exp_law,
    kaplan_meier,
    kingman_law,
    km_ks_distance,
    ks_2samp,
    ks_test,
    mean_se,
    named_law,
)


@pytest.mark.parametrize(
    "law", [exp_law(), kingman_law(), beta_limit_law(0.5, 1.0), beta_limit_law(0.3, 2.0), conjecture_law(math.sqrt(math.pi) / 3)]
)
def test_densities_integrate_to_one_and_match_cdf(law):
    pdf = lambda value: float(law.pdf(np.array(value)))
    total, _ = spi.quad(pdf, 0, math.inf, epsabs=0, epsrel=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)
    for value in (0.1, 1.0, 7.0):
        part, _ = spi.quad(pdf, 0, value, epsabs=0, epsrel=1e-12)
        assert part == pytest.approx(float(law.cdf(np.array(value))), rel=1e-10)


def test_conjecture_constants_for_beta_half():
    constant = beta_conjecture_c(0.5)
    assert constant == pytest.approx(math.sqrt(math.pi) / 3, rel=1e-15)
    assert conjecture_alpha(constant) == pytest.approx(1.5, abs=1e-9)
    law = conjecture_law(constant)
    value = np.array([0.0, 0.5, 3.0])
    np.testing.assert_allclose(law.pdf(value), math.sqrt(math.pi) * (1 + constant * value) ** -4, rtol=1e-8)


@pytest.mark.parametrize("shape_a", [0.2, 0.5, 0.8])
def test_conjecture_alpha_beta_cross_check(shape_a):
    assert conjecture_alpha(beta_conjecture_c(shape_a)) == pytest.approx(2 - shape_a, abs=1e-9)


def test_conjecture_alpha_domain():
    with pytest.raises(DomainError):
        conjecture_alpha(0.0)
    with pytest.raises(DomainError):
        beta_limit_law(1.5, 1.0)
    with pytest.raises(DomainError):
        named_law("weird")


def test_ks_self_consistency():
    rng = np.random.default_rng(0)
    passes = sum(ks_test(rng.exponential(size=100_000), "exp")[0] < 1.36 / math.sqrt(100_000) for _ in range(40))
    assert passes >= 34


def test_ks_rejects_wrong_law_and_empty():
    rng = np.random.default_rng(1)
    stat, p_value = ks_test(rng.exponential(2.0, 5000), exp_law())
    assert stat > 0.2 and p_value < 1e-10
    with pytest.raises(EmptySample):
        ks_test(np.array([]), "exp")
    with pytest.raises(EmptySample):
        ks_test(np.array([np.nan]), "exp")
    with pytest.raises(EmptySample):
        ks_2samp(np.array([]), np.array([1.0]))
    with pytest.raises(EmptySample):
        kaplan_meier(np.array([]), np.array([], dtype=bool))
    with pytest.raises(EmptySample):
        mean_se(np.array([]))


def test_kaplan_meier_hand_example():
    # times 1, 2+, 3, 3, 4+ : S(1) = 4/5, S(3) = 4/5 * 1/3
    times, surv = kaplan_meier(np.array([1.0, 2.0, 3.0, 3.0, 4.0]), np.array([True, False, True, True, False]))
    np.testing.assert_array_equal(times, [1.0, 3.0])
    np.testing.assert_allclose(surv, [0.8, 0.8 / 3])


def test_kaplan_meier_recovers_exponential_under_censoring():
    rng = np.random.default_rng(3)
    life = rng.exponential(size=20_000)
    cens = rng.exponential(2.0, size=20_000)
    obs = life <= cens
    assert km_ks_distance(np.minimum(life, cens), obs, exp_law(), upto=3.0) < 0.02


def test_mean_se():
    mean, se = mean_se(np.array([1.0, 2.0, 3.0, 4.0]))
    assert mean == 2.5 and se == pytest.approx(math.sqrt(5 / 3) / 2)
