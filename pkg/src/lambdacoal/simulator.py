"""Exact jump-chain simulation of the Lambda-coalescent and its branch statistics.

Two engines share one :class:`~lambdacoal.ratetable.RateTable`:

* :func:`simulate` keeps full partitions and returns a :class:`CoalescentPath`;
  it is the reference used by the coupling constructions.
* :func:`simulate_counts` is a compiled kernel that tracks only which blocks
  are still singletons, enough for every branch-length statistic, and is what
  the large runs use.

Blocks are identified by their smallest element throughout.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numba
import numpy as np

from .errors import DomainError, IncompletePath
from .partition import LabeledPartition
from .ratetable import RateTable, row_offset
from .rng import replicate_rng, replicate_seeds32

CSV_COLUMNS = ("replicate", "tmrca", "l_ext", "l_total", "x1", "t_1")


@dataclass
class CoalescentPath:
    """Time-ordered merger events of one path started from ``n`` singletons.

    ``merged[i]`` lists the minima of the blocks joined at ``times[i]``; the new
    block is identified by the smallest of them.
    """

    size: int
    times: list[float] = field(default_factory=list)
    merged: list[tuple[int, ...]] = field(default_factory=list)
    counts_after: list[int] = field(default_factory=list)
    absorbed: bool = False

    @property
    def complete(self) -> bool:
        return self.size <= 1 or (bool(self.counts_after) and self.counts_after[-1] == 1)

    def block_count(self, when: float) -> int:
        """``|Pi(t)|`` with right-continuous paths."""
        pos = int(np.searchsorted(self.times, when, side="right"))
        return self.size if pos == 0 else self.counts_after[pos - 1]

    def partitions(self) -> Iterator[tuple[float, LabeledPartition]]:
        """Replay the path, yielding ``(time, partition)`` from the start value on."""
        blocks = {elem: [elem] for elem in range(1, self.size + 1)}
        yield 0.0, LabeledPartition.from_blocks(blocks.values(), self.size)
        for when, ids in zip(self.times, self.merged):
            head = min(ids)
            for member in ids:
                if member != head:
                    blocks[head].extend(blocks.pop(member))
            yield when, LabeledPartition.from_blocks(blocks.values(), self.size)


@dataclass
class ReplicateSummary:
    """Branch statistics of one complete path. ``T[i - 1]`` is element i's external branch."""

    external: np.ndarray
    l_ext: float
    l_total: float
    tmrca: float
    x1: int

    @property
    def t_1(self) -> float:
        return float(self.external[0]) if len(self.external) else 0.0


def _draw_merge_size(table: RateTable, blocks: int, uniform: float) -> int:
    return int(np.searchsorted(table.cdf_row(blocks), uniform, side="right")) + 2


def simulate(size: int, table: RateTable, rng: np.random.Generator) -> CoalescentPath:
    """One path from ``n`` singletons to a single block (or an absorbing row)."""
    if size < 1:
        raise DomainError("size must be positive")
    if size > table.n_max:
        raise DomainError(f"n={size} exceeds table n_max={table.n_max}")
    path = CoalescentPath(size)
    minima = list(range(1, size + 1))
    now = 0.0
    blocks = size
    while blocks > 1:
        total = table.totals[blocks]
        if total <= 0:
            path.absorbed = True
            break
        now += rng.exponential(1.0 / total)
        group = _draw_merge_size(table, blocks, rng.random())
        for slot in range(group):
            pick = int(rng.integers(slot, blocks))
            minima[slot], minima[pick] = minima[pick], minima[slot]
        chosen = tuple(sorted(minima[:group]))
        # the merged block takes slot 0; survivors are kept in slots 1..b-k
        minima = [chosen[0]] + minima[group:]
        blocks = len(minima)
        path.times.append(now)
        path.merged.append(chosen)
        path.counts_after.append(blocks)
    return path


def summarize(path: CoalescentPath) -> ReplicateSummary:
    if not path.complete:
        raise IncompletePath("path was absorbed before reaching one block")
    size = path.size
    external = np.full(size, np.nan)
    # a block identified by i is {i} until its first merger
    for when, ids in zip(path.times, path.merged):
        for elem in ids:
            if np.isnan(external[elem - 1]):
                external[elem - 1] = when
    l_total = 0.0
    prev, blocks = 0.0, size
    for when, count in zip(path.times, path.counts_after):
        l_total += (when - prev) * blocks
        prev, blocks = when, count
    tmrca = path.times[-1] if path.times else 0.0
    if size == 1:
        external[:] = 0.0
    x1 = size - path.counts_after[0] if path.counts_after else 0
    return ReplicateSummary(external, float(np.sum(external)), l_total, tmrca, x1)


# ---------------------------------------------------------------------------
# compiled block-count engine


@numba.njit(cache=True)
def _counts_batch(size, cdf, totals, seeds, n_track, horizon, tmrca, l_ext, l_total, x1, t_track, b_horizon):
    tags = np.empty(size, dtype=np.int64)
    for rep in range(seeds.shape[0]):
        np.random.seed(seeds[rep])
        for slot in range(size):
            tags[slot] = slot
        for slot in range(n_track):
            t_track[rep, slot] = np.nan
        blocks = size
        now = 0.0
        ext = 0.0
        tot = 0.0
        first = True
        x1[rep] = 0
        tmrca[rep] = 0.0 if size == 1 else np.nan
        b_horizon[rep] = size
        while blocks > 1:
            gb = totals[blocks]
            if gb <= 0.0:
                break
            hold = -math.log(1.0 - np.random.random()) / gb
            if now + hold > horizon:
                tot += (horizon - now) * blocks
                break
            now += hold
            tot += hold * blocks
            # merger size by binary search on the cumulative row
            lo = (blocks - 1) * (blocks - 2) // 2
            uniform = np.random.random()
            left = 0
            right = blocks - 2
            while left < right:
                mid = (left + right) // 2
                if cdf[lo + mid] > uniform:
                    right = mid
                else:
                    left = mid + 1
            group = left + 2
            for slot in range(group):
                pick = slot + int(np.random.random() * (blocks - slot))
                if pick >= blocks:
                    pick = blocks - 1
                tmp = tags[slot]
                tags[slot] = tags[pick]
                tags[pick] = tmp
                tag = tags[slot]
                if tag >= 0:
                    ext += now
                    if tag < n_track:
                        t_track[rep, tag] = now
            nb = blocks - group + 1
            top = group if group > nb else nb
            small = group if group < nb else nb
            for slot in range(small - 1):
                tags[1 + slot] = tags[top + slot]
            tags[0] = -1
            if first:
                x1[rep] = group - 1
                first = False
            blocks = nb
            b_horizon[rep] = blocks
        if blocks == 1:
            tmrca[rep] = now
        l_ext[rep] = ext if blocks == 1 else np.nan
        l_total[rep] = tot


@dataclass
class CountsBatch:
    """Per-replicate statistics from :func:`simulate_counts`.

    ``t_track[:, i]`` is the external branch of element ``i + 1``; values are
    NaN where the statistic was not reached (horizon hit or absorbing row).
    """

    replicate: np.ndarray
    tmrca: np.ndarray
    l_ext: np.ndarray
    l_total: np.ndarray
    x1: np.ndarray
    t_track: np.ndarray
    blocks_at_horizon: np.ndarray

    @property
    def t_1(self) -> np.ndarray:
        return self.t_track[:, 0]


def simulate_counts(
    size: int,
    table: RateTable,
    seed: int,
    reps: int,
    *,
    start: int = 0,
    n_track: int = 2,
    horizon: float = math.inf,
) -> CountsBatch:
    """Replicates ``start .. start + reps - 1`` of the block-count engine."""
    if size < 1:
        raise DomainError("size must be positive")
    if size > table.n_max:
        raise DomainError(f"n={size} exceeds table n_max={table.n_max}")
    n_track = max(1, min(n_track, size))
    seeds = replicate_seeds32(seed, start, start + reps)
    out = CountsBatch(
        replicate=np.arange(start, start + reps),
        tmrca=np.empty(reps),
        l_ext=np.empty(reps),
        l_total=np.empty(reps),
        x1=np.empty(reps, dtype=np.int64),
        t_track=np.empty((reps, n_track)),
        blocks_at_horizon=np.empty(reps, dtype=np.int64),
    )
    cdf = table.cdf if size >= 2 else np.ones(1)
    _counts_batch(
        size, cdf, table.totals, seeds, n_track, float(horizon),
        out.tmrca, out.l_ext, out.l_total, out.x1, out.t_track, out.blocks_at_horizon,
    )
    if size == 1:
        out.t_track[:] = 0.0
        out.l_ext[:] = 0.0
    return out


def simulate_full_batch(size: int, table: RateTable, seed: int, reps: int, start: int = 0) -> CountsBatch:
    """Same statistics as :func:`simulate_counts` from the full-partition engine."""
    rows = [summarize(simulate(size, table, replicate_rng(seed, rep))) for rep in range(start, start + reps)]
    tracked = np.array([summary.external[: min(2, size)] for summary in rows]).reshape(reps, -1)
    return CountsBatch(
        replicate=np.arange(start, start + reps),
        tmrca=np.array([summary.tmrca for summary in rows]),
        l_ext=np.array([summary.l_ext for summary in rows]),
        l_total=np.array([summary.l_total for summary in rows]),
        x1=np.array([summary.x1 for summary in rows], dtype=np.int64),
        t_track=tracked,
        blocks_at_horizon=np.ones(reps, dtype=np.int64),
    )


def run_replicates(
    size: int,
    table: RateTable,
    seed: int,
    reps: int,
    mode: str = "counts",
    workers: int = 1,
    chunk: int = 1000,
) -> CountsBatch:
    """Run ``reps`` replicates, optionally split across worker processes.

    Results depend only on ``(seed, replicate)`` so they do not change with
    ``workers``.
    """
    if mode not in ("counts", "full"):
        raise DomainError(f"unknown mode {mode!r}")
    fn = simulate_counts if mode == "counts" else simulate_full_batch
    starts = list(range(0, reps, chunk))
    sizes = [min(chunk, reps - first) for first in starts]
    if workers > 1 and len(starts) > 1:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=workers)(delayed(fn)(size, table, seed, count, start=first) for first, count in zip(starts, sizes))
    else:
        parts = [fn(size, table, seed, count, start=first) for first, count in zip(starts, sizes)]
    return concat_batches(parts)


def concat_batches(parts: list[CountsBatch]) -> CountsBatch:
    return CountsBatch(*(np.concatenate([getattr(part, name) for part in parts]) for name in CountsBatch.__dataclass_fields__))


def write_replicates_csv(path: str | Path, batch: CountsBatch) -> None:
    """CSV with columns ``replicate, tmrca, l_ext, l_total, x1, t_1``; floats in repr form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in range(len(batch.replicate)):
            writer.writerow(
                (
                    int(batch.replicate[row]),
                    repr(float(batch.tmrca[row])),
                    repr(float(batch.l_ext[row])),
                    repr(float(batch.l_total[row])),
                    int(batch.x1[row]),
                    repr(float(batch.t_1[row])),
                )
            )


def first_jump_sizes(table: RateTable, blocks: int, draws: int, rng: np.random.Generator) -> np.ndarray:
    """``draws`` i.i.d. copies of the block-count drop at the first collision from ``n`` blocks."""
    uniform = rng.random(draws)
    return np.searchsorted(table.cdf_row(blocks), uniform, side="right") + 1


__all__ = [
    "CSV_COLUMNS",
    "CoalescentPath",
    "CountsBatch",
    "ReplicateSummary",
    "first_jump_sizes",
    "simulate_full_batch",
    "row_offset",
    "run_replicates",
    "simulate",
    "simulate_counts",
    "summarize",
    "write_replicates_csv",
]
