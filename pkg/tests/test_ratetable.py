import math

import numpy as np
import pytest

from lambdacoal.errors import DomainError
from lambdacoal.measure import FiniteMeasure, lambda_rate, total_rate
from lambdacoal.ratetable import build_rate_table

LEB = FiniteMeasure.lebesgue()


def test_lebesgue_four_blocks():
    table = build_rate_table(4, LEB)
    assert [table.lam(4, group) for group in (2, 3, 4)] == pytest.approx([1 / 3, 1 / 6, 1 / 3], rel=1e-12)
    assert table.totals[4] == pytest.approx(3.0, rel=1e-12)
    np.testing.assert_allclose(table.blocks_after_probs(4), [0, 1 / 9, 2 / 9, 2 / 3], atol=1e-13)


def test_kingman_rows():
    table = build_rate_table(30, FiniteMeasure.dirac(0.0))
    for blocks in range(2, 31):
        assert table.totals[blocks] == pytest.approx(blocks * (blocks - 1) / 2, rel=1e-14)
        assert table.merge_size_probs(blocks)[0] == pytest.approx(1.0)


def test_null_measure_is_absorbing():
    table = build_rate_table(10, FiniteMeasure.null())
    assert all(table.absorbing(blocks) for blocks in range(2, 11))


def test_rows_sum_to_one():
    table = build_rate_table(300, FiniteMeasure.beta(0.5, 1.0))
    for blocks in (2, 3, 57, 300):
        assert math.fsum(table.merge_size_probs(blocks)) == pytest.approx(1.0, abs=1e-14)
        assert table.cdf_row(blocks)[-1] == 1.0


@pytest.mark.parametrize("measure", [LEB, FiniteMeasure.beta(1.5, 1.0), FiniteMeasure.logpow(1.0, 2.0, 0.5) + FiniteMeasure.lebesgue(0.5, 1.0)])
def test_pascal_rows_match_direct_quadrature(measure):
    table = build_rate_table(200, measure)
    for blocks, group in [(2, 2), (5, 3), (40, 2), (40, 40), (120, 7), (199, 100)]:
        assert table.lam(blocks, group) == pytest.approx(lambda_rate(blocks, group, measure), rel=1e-9)
    for blocks in (3, 50, 150):
        assert table.totals[blocks] == pytest.approx(total_rate(blocks, measure), rel=1e-9)


def test_grid_independence():
    measure = FiniteMeasure.beta(0.5, 1.0)
    small = build_rate_table(500, measure)
    large = build_rate_table(2000, measure)
    for blocks in (2, 10, 100, 500):
        np.testing.assert_allclose(large.row(blocks), small.row(blocks), rtol=1e-12)


def test_bounds_checked():
    table = build_rate_table(5, LEB)
    with pytest.raises(DomainError):
        table.row(6)
    with pytest.raises(DomainError):
        table.scaled(4, 1)
    with pytest.raises(DomainError):
        build_rate_table(1, LEB)
