import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lambdacoal.errors import DomainError, MeasureSpecError, NonIntegrable, NotDominated
from lambdacoal.measure import (
    INV,
    INV2,
    ONE,
    Atom,
    FiniteMeasure,
    Piece,
    beta_kernel,
    binom_pmf,
    collision_kernel,
    functionals,
    integrate,
    lambda_rate,
    moments_first_drop,
    mu,
    mu_bar,
    mu_sequence,
    parse_measure,
    scaled_rate,
    total_rate,
    total_rate_integral,
)

LEB = FiniteMeasure.lebesgue()
KING = FiniteMeasure.dirac(0.0)


def test_lebesgue_inverse_weight_gives_log():
    for size in (10, 1000, 10**6):
        assert integrate(LEB, INV, (1 / size, 1)) == pytest.approx(math.log(size), rel=1e-12)


def test_null_measure_integrates_to_zero():
    null = FiniteMeasure.null()
    for weight in (ONE, INV, INV2, collision_kernel(7)):
        assert integrate(null, weight) == 0.0


def test_beta_half_inverse_weight_closed_form():
    # density 0.5 x^-0.5, so the integral of 0.5 x^-1.5 over [0.01, 1] is 9
    measure = FiniteMeasure.beta(0.5, 1.0)
    assert integrate(measure, INV, (0.01, 1.0)) == pytest.approx(9.0, rel=1e-10)


def test_atom_at_zero_with_singular_weight_is_rejected():
    with pytest.raises(NonIntegrable):
        integrate(KING, INV)
    with pytest.raises(NonIntegrable):
        integrate(LEB, INV)  # density 1 against x^-1 diverges at 0


def test_logpow_integrates_to_gamma():
    # int_0^1 log(1/x)^q dx = Gamma(q + 1)
    measure = FiniteMeasure.logpow(1.0, 2.5)
    assert measure.total_mass() == pytest.approx(math.gamma(3.5), rel=1e-10)


def test_lambda_rate_examples():
    assert lambda_rate(5, 2, KING) == 1.0
    assert lambda_rate(5, 3, KING) == 0.0
    assert lambda_rate(4, 3, LEB) == pytest.approx(1 / 6, rel=1e-12)
    assert lambda_rate(4, 2, LEB) == pytest.approx(1 / 3, rel=1e-12)
    assert lambda_rate(4, 4, LEB) == pytest.approx(1 / 3, rel=1e-12)
    with pytest.raises(DomainError):
        lambda_rate(4, 1, LEB)
    with pytest.raises(DomainError):
        lambda_rate(4, 5, LEB)


def test_lambda_rate_logpow_oracle():
    # high-precision quadrature of x^2 (1-x)^3 log(1/x) on [0, 1/2)
    measure = FiniteMeasure.logpow(1.0, 1.0, 0.5)
    assert lambda_rate(7, 4, measure) == pytest.approx(0.0130674083984855129328620874396, rel=1e-10)


def test_total_rate_examples():
    for size in (2, 5, 30):
        assert total_rate(size, LEB) == pytest.approx(size - 1, rel=1e-10)
        assert total_rate(size, KING) == pytest.approx(size * (size - 1) / 2, rel=1e-14)
    # sum of C(10,k) B(k-0.5, 11-k) / B(1.5, 1), evaluated at 30 digits
    assert total_rate(10, FiniteMeasure.beta(1.5, 1.0)) == pytest.approx(5.51319578254562774686613695902, rel=1e-10)
    assert total_rate_integral(100, FiniteMeasure.beta(0.5, 1.0)) == pytest.approx(588.26581343721826274062906063, rel=1e-9)


@pytest.mark.parametrize("measure", [LEB, FiniteMeasure.beta(1.5, 1.0), FiniteMeasure.beta(0.5, 2.0), FiniteMeasure.logpow(1.0, 1.0, 0.5)])
def test_total_rate_sum_matches_integral_form(measure):
    for blocks in range(2, 51, 3):
        assert total_rate(blocks, measure) == pytest.approx(total_rate_integral(blocks, measure), rel=1e-8)


def test_total_rate_integral_handles_atom_at_zero():
    measure = KING + LEB
    assert total_rate_integral(20, measure) == pytest.approx(190 + 19, rel=1e-10)


def test_functionals_examples():
    size = round(math.exp(10))
    values = functionals(size, LEB)
    assert values.mu_n == pytest.approx(math.log(size), abs=1e-9)
    assert values.g_n == pytest.approx(size - 1, rel=1e-9)
    assert values.mass_below == pytest.approx(1 / size, rel=1e-12)
    null = functionals(7, FiniteMeasure.null())
    assert (null.mu_n, null.mu_bar_n, null.g_n, null.mass_below) == (0, 0, 0, 0)
    assert null.degenerate and null.normalizer == 1.0
    beta = functionals(1000, FiniteMeasure.beta(0.5, 1.0))
    lead = math.gamma(1.5) / (0.5 * math.gamma(0.5)) * 1000**0.5
    assert abs(beta.mu_n / lead - 1) < 0.05
    assert abs(functionals(10**6, FiniteMeasure.beta(0.5, 1.0)).mu_n / 1000 - 1) < 0.002


def test_beta_closed_forms_for_mu():
    assert mu(5000, FiniteMeasure.beta(0.5, 1)) == pytest.approx(math.sqrt(5000) - 1, rel=1e-10)
    assert mu(5000, FiniteMeasure.beta(1.5, 1)) == pytest.approx(3 * (1 - 5000**-0.5), rel=1e-10)
    assert integrate(FiniteMeasure.beta(1.5, 1), INV) == pytest.approx(3.0, rel=1e-10)


def test_mu_sequence_matches_pointwise():
    measure = FiniteMeasure(atoms=(Atom(0.25, 0.5), Atom(0.0, 1.0)), pieces=(Piece("beta", (1.5, 2.0, 1.0)),))
    seq = mu_sequence(40, measure)
    for group in (1, 2, 3, 4, 5, 17, 40):
        assert seq[group] == pytest.approx(mu(group, measure), rel=1e-10, abs=1e-14)


def test_atom_at_split_point_goes_right():
    measure = FiniteMeasure(atoms=(Atom(0.5, 2.0),))
    left, right = measure.split_at(0.5)
    assert left.is_null
    assert right.atoms == (Atom(0.5, 2.0),)


def test_moments_first_drop_oracles():
    ex, ex2 = moments_first_drop(50, LEB)
    assert ex == pytest.approx(3.57061769217288271179639978874, rel=1e-10)
    assert ex2 == pytest.approx(46.4293823078271172882036002113, rel=1e-10)
    assert moments_first_drop(30, KING) == pytest.approx((1.0, 1.0), rel=1e-12)


def test_binom_pmf_matches_exact_fractions():
    from fractions import Fraction

    for trials, successes, prob in [(7, 3, 0.3), (40, 20, 0.01), (200, 2, 0.5), (1000, 999, 0.999)]:
        exact = math.comb(trials, successes) * Fraction(prob) ** successes * (1 - Fraction(prob)) ** (trials - successes)
        assert binom_pmf(successes, trials, prob) == pytest.approx(float(exact), rel=1e-13)


def test_json_round_trip_and_presets(tmp_path):
    measure = FiniteMeasure(
        atoms=(Atom(0.0, 1.0), Atom(0.3, 0.2)),
        pieces=(Piece("beta", (0.5, 1.0, 2.0), 0.0, 0.5), Piece("logpow", (1.0, 2.0), 0.0, 0.5), Piece("const", (1.0,), 0.5, 1.0)),
    )
    assert FiniteMeasure.from_json(measure.to_json()) == measure
    path = tmp_path / "m.json"
    path.write_text('{"atoms":[{"x":0.0,"mass":1.0}], "pieces":[{"family":"beta","a":0.5,"b":1.0,"weight":1.0,"lo":0.0,"hi":1.0}]}')
    loaded = parse_measure(f"file:{path}")
    assert loaded.mass_at_zero == 1.0 and loaded.pieces[0].params == (0.5, 1.0, 1.0)
    assert parse_measure("kingman") == KING
    assert parse_measure("lebesgue") == LEB
    assert parse_measure("beta:1.5,1") == FiniteMeasure.beta(1.5, 1)
    assert parse_measure("logpow:1,2,0.5") == FiniteMeasure.logpow(1, 2, 0.5)
    for bad in ("beta:x", "nope", '{"pieces":[{"family":"weird"}]}', '{"atoms":[{"x":2,"mass":1}]}'):
        with pytest.raises(MeasureSpecError):
            parse_measure(bad)


def test_difference_and_dominance():
    half = LEB.scaled(0.5)
    diff = LEB.difference(half)
    assert diff.total_mass() == pytest.approx(0.5)
    sub = FiniteMeasure.lebesgue(0.2, 0.4)
    diff = LEB.difference(sub)
    assert diff.total_mass() == pytest.approx(0.8)
    assert LEB.difference(LEB).total_mass() == 0.0
    with pytest.raises(NotDominated):
        half.difference(LEB)
    with pytest.raises(NotDominated):
        LEB.difference(FiniteMeasure.beta(1.5, 1))
    with pytest.raises(NotDominated):
        FiniteMeasure.null().difference(KING)


# ---------------------------------------------------------------------------
# properties

measures = st.sampled_from(
    [
        LEB,
        FiniteMeasure.beta(1.5, 1.0),
        FiniteMeasure.beta(0.7, 2.0),
        FiniteMeasure.logpow(1.0, 1.0, 0.5) + FiniteMeasure.lebesgue(0.5, 1.0),
        FiniteMeasure(atoms=(Atom(0.4, 0.3),), pieces=(Piece("beta", (2.5, 1.0, 1.0)),)),
    ]
)


@settings(max_examples=40, deadline=None)
@given(measure=measures, blocks=st.integers(2, 60), data=st.data())
def test_pascal_identity(measure, blocks, data):
    group = data.draw(st.integers(2, blocks))
    lhs = lambda_rate(blocks, group, measure)
    rhs = lambda_rate(blocks + 1, group, measure) + lambda_rate(blocks + 1, group + 1, measure)
    assert lhs == pytest.approx(rhs, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(measure=measures, cut=st.floats(0.01, 0.99), lo=st.floats(0.0, 0.3), hi=st.floats(0.5, 1.0))
def test_restriction_additivity(measure, cut, lo, hi):
    left, right = measure.split_at(cut)
    for weight in (ONE, beta_kernel(9, 4)):
        total = integrate(measure, weight, (lo, hi))
        assert integrate(left, weight, (lo, hi)) + integrate(right, weight, (lo, hi)) == pytest.approx(total, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(measure=measures, size=st.integers(2, 10**5))
def test_mu_monotone_and_ordered(measure, size):
    assert mu(size + 1, measure) >= mu(size, measure) - 1e-12
    assert mu_bar(size, measure) >= mu(size, measure) - 1e-12
    assert mu(size, measure) >= measure.mass(1 / size, 1.0) - 1e-12


def test_scaled_rate_is_binomial_times_lambda():
    measure = FiniteMeasure.beta(1.5, 1.0)
    for blocks, group in [(10, 2), (10, 5), (30, 30), (200, 100)]:
        assert scaled_rate(blocks, group, measure) == pytest.approx(math.comb(blocks, group) * lambda_rate(blocks, group, measure), rel=1e-9)


def test_vectorised_density_agrees_with_scalar():
    for piece in (Piece("beta", (0.5, 2.0, 1.5)), Piece("logpow", (1.0, 2.0), 0.0, 0.5), Piece("const", (2.0,), 0.2, 0.7)):
        xs = np.array([0.1, 0.3, 0.45, 0.6])
        inside = (xs >= piece.lo) & (xs < piece.hi)
        density_fn = piece.density_fn()
        expect = np.array([density_fn(point) if ok else 0.0 for point, ok in zip(xs, inside)])
        np.testing.assert_allclose(piece.density(xs), expect, rtol=1e-13)
