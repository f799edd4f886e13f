import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats as sps

from lambdacoal.errors import DomainError, IncompletePath
from lambdacoal.measure import FiniteMeasure
from lambdacoal.ratetable import build_rate_table
from lambdacoal.rng import replicate_rng
from lambdacoal.simulator import (
    CoalescentPath,
    first_jump_sizes,
    run_replicates,
    simulate,
    simulate_counts,
    simulate_full_batch,
    summarize,
)
from lambdacoal.stats import kingman_law, ks_test

LEB = FiniteMeasure.lebesgue()
KING = FiniteMeasure.dirac(0.0)


def test_single_element():
    table = build_rate_table(2, LEB)
    summary = summarize(simulate(1, table, np.random.default_rng(0)))
    assert (summary.tmrca, summary.l_ext, summary.l_total, summary.x1) == (0.0, 0.0, 0.0, 0)
    batch = simulate_counts(1, table, 0, 5)
    assert np.all(batch.tmrca == 0) and np.all(batch.l_total == 0)


def test_two_elements_are_exponential():
    table = build_rate_table(2, LEB)
    vals = np.array([simulate(2, table, replicate_rng(1, rep)).times[0] for rep in range(3000)])
    assert sps.kstest(vals, "expon").statistic < 0.03
    summary = summarize(simulate(2, table, np.random.default_rng(3)))
    assert summary.external[0] == summary.external[1] == summary.tmrca
    assert summary.l_total == pytest.approx(2 * summary.tmrca)


def test_summarize_examples():
    path = CoalescentPath(3, [1.0, 3.0], [(1, 2), (1, 3)], [2, 1])
    summary = summarize(path)
    np.testing.assert_array_equal(summary.external, [1.0, 1.0, 3.0])
    assert (summary.l_ext, summary.l_total, summary.tmrca, summary.x1) == (5.0, 7.0, 3.0, 1)
    path = CoalescentPath(4, [0.5], [(1, 2, 3, 4)], [1])
    summary = summarize(path)
    assert (summary.l_ext, summary.l_total, summary.x1) == (2.0, 2.0, 3)


def test_absorbed_path_is_incomplete():
    table = build_rate_table(5, FiniteMeasure.null())
    path = simulate(5, table, np.random.default_rng(0))
    assert path.absorbed and not path.complete
    with pytest.raises(IncompletePath):
        summarize(path)


def test_simulate_bounds():
    table = build_rate_table(5, LEB)
    with pytest.raises(DomainError):
        simulate(6, table, np.random.default_rng(0))
    with pytest.raises(DomainError):
        simulate(0, table, np.random.default_rng(0))


def test_total_length_recomputed_from_partitions():
    table = build_rate_table(15, FiniteMeasure.beta(0.8, 1.2))
    path = simulate(15, table, np.random.default_rng(7))
    values = list(path.partitions())
    direct = sum((t1 - t0) * len(partition) for (t0, partition), (t1, _) in zip(values[:-1], values[1:]))
    assert summarize(path).l_total == pytest.approx(direct, rel=1e-12)
    assert len(values[-1][1]) == 1


def test_exchangeability_of_first_merger():
    table = build_rate_table(6, FiniteMeasure.beta(1.5, 1.0))
    counts = Counter()
    reps = 12000
    for rep in range(reps):
        path = simulate(6, table, replicate_rng(11, rep))
        if len(path.merged[0]) == 2:
            counts[path.merged[0]] += 1
    obs = np.array([counts[(first, second)] for first in range(1, 7) for second in range(first + 1, 7)])
    assert sps.chisquare(obs).pvalue > 1e-3


def test_sampling_consistency():
    # restricting an n=6 path to {1,2,3} gives the n=3 law
    measure = LEB
    table = build_rate_table(6, measure)
    reps = 4000
    restricted_tmrca = []
    for rep in range(reps):
        path = simulate(6, table, replicate_rng(5, rep))
        for time, partition in path.partitions():
            if partition.block_of(1) == partition.block_of(2) == partition.block_of(3):
                restricted_tmrca.append(time)
                break
    direct = [summarize(simulate(3, table, replicate_rng(6, rep))).tmrca for rep in range(reps)]
    assert sps.ks_2samp(restricted_tmrca, direct).pvalue > 1e-3


def test_counts_engine_matches_full_engine():
    table = build_rate_table(30, LEB)
    full = simulate_full_batch(30, table, 1, 4000)
    counts = simulate_counts(30, table, 2, 4000)
    for name in ("tmrca", "l_total", "l_ext", "t_1"):
        assert sps.ks_2samp(getattr(full, name), getattr(counts, name)).pvalue > 1e-3, name
    assert sps.ks_2samp(full.x1, counts.x1).statistic < 0.04


def test_kingman_limit_small_sample():
    size = 50
    table = build_rate_table(size, KING)
    batch = simulate_counts(size, table, 3, 4000)
    stat, _ = ks_test(size * batch.t_1, kingman_law())
    assert stat < 0.03


def test_determinism_across_workers_and_chunks():
    table = build_rate_table(40, LEB)
    serial = run_replicates(40, table, 9, 250, workers=1, chunk=1000)
    parallel = run_replicates(40, table, 9, 250, workers=2, chunk=60)
    for name in ("tmrca", "l_total", "t_1", "x1"):
        np.testing.assert_array_equal(getattr(serial, name), getattr(parallel, name))
    chunked_full = run_replicates(40, table, 9, 30, mode="full", chunk=7)
    direct_full = simulate_full_batch(40, table, 9, 30)
    np.testing.assert_array_equal(chunked_full.l_total, direct_full.l_total)


def test_horizon_censors_statistics():
    table = build_rate_table(100, LEB)
    batch = simulate_counts(100, table, 4, 200, horizon=1e-3)
    assert np.all(batch.blocks_at_horizon > 1)
    assert np.all(np.isnan(batch.tmrca))


def test_first_jump_sizes_match_moments():
    table = build_rate_table(50, LEB)
    drops = first_jump_sizes(table, 50, 200000, np.random.default_rng(0))
    assert drops.mean() == pytest.approx(3.5706176921728827, abs=4 * drops.std() / math.sqrt(len(drops)))
