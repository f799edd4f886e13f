"""Merger-rate tables for all block counts up to ``n_max``.

Entries are stored as ``r[b, k] = C(b, k) * lambda_{b,k}``, the total rate at
which some ``k`` of ``b`` blocks merge. Only the bottom row ``b = n_max`` is
integrated; every other row follows from the Pascal identity
``lambda_{b,k} = lambda_{b+1,k} + lambda_{b+1,k+1}`` rewritten for ``r``::

    r[b, k] = ((b + 1 - k) * r[b+1, k] + (k + 1) * r[b+1, k+1]) / (b + 1)

Both terms are non-negative, so the recursion loses no relative accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError
from .measure import FiniteMeasure, scaled_rate


def row_offset(blocks: int) -> int:
    """Start of row ``b`` in the packed triangle (row ``b`` holds ``k = 2..b``)."""
    return (blocks - 1) * (blocks - 2) // 2


@numba.njit(cache=True)
def _pascal_fill(entries, n_max):
    for blocks in range(n_max - 1, 1, -1):
        lo = (blocks - 1) * (blocks - 2) // 2
        up = blocks * (blocks - 1) // 2
        for group in range(2, blocks + 1):
            entries[lo + group - 2] = ((blocks + 1 - group) * entries[up + group - 2] + (group + 1) * entries[up + group - 1]) / (blocks + 1)


@numba.njit(cache=True)
def _cumulative(entries, totals, n_max, out):
    for blocks in range(2, n_max + 1):
        lo = (blocks - 1) * (blocks - 2) // 2
        if totals[blocks] <= 0.0:
            for group in range(blocks - 1):
                out[lo + group] = 1.0
            continue
        acc = 0.0
        for group in range(blocks - 1):
            acc += entries[lo + group]
            out[lo + group] = acc / totals[blocks]
        out[lo + blocks - 2] = 1.0


@dataclass
class RateTable:
    """Scaled merger rates ``r[b, k]`` and total rates ``g[b]`` for ``2 <= k <= b <= n_max``.

    ``cdf`` (the cumulative merger-size law of each row, used for sampling) is
    built on first access.
    """

    n_max: int
    entries: np.ndarray
    totals: np.ndarray
    measure: FiniteMeasure | None = None
    _cdf: np.ndarray | None = field(default=None, repr=False)

    def row(self, blocks: int) -> np.ndarray:
        """``r[b, k]`` for ``k = 2..b``."""
        self._check(blocks)
        lo = row_offset(blocks)
        return self.entries[lo : lo + blocks - 1]

    def scaled(self, blocks: int, group: int) -> float:
        self._check(blocks)
        if group < 2 or group > blocks:
            raise DomainError(f"need 2 <= group <= blocks, got blocks={blocks}, group={group}")
        return float(self.entries[row_offset(blocks) + group - 2])

    def lam(self, blocks: int, group: int) -> float:
        """``lambda_{b,k}``, recovered from the scaled entry."""
        entry = self.scaled(blocks, group)
        if entry == 0.0:
            return 0.0
        return math.exp(math.log(entry) - (math.lgamma(blocks + 1) - math.lgamma(group + 1) - math.lgamma(blocks - group + 1)))

    def absorbing(self, blocks: int) -> bool:
        return blocks >= 2 and self.totals[blocks] <= 0.0

    def merge_size_probs(self, blocks: int) -> np.ndarray:
        """Probability that the next merger involves ``k`` blocks, ``k = 2..b``."""
        row = self.row(blocks)
        if self.totals[blocks] <= 0:
            return np.zeros_like(row)
        return row / self.totals[blocks]

    def blocks_after_probs(self, blocks: int) -> np.ndarray:
        """``p[j]`` = probability of ``j`` blocks right after the next collision, ``j = 0..b-1``.

        Index 0 is unused and kept so that ``p[j]`` reads naturally.
        """
        out = np.zeros(blocks)
        out[1:] = self.merge_size_probs(blocks)[::-1]
        return out

    @property
    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            out = np.empty_like(self.entries)
            _cumulative(self.entries, self.totals, self.n_max, out)
            self._cdf = out
        return self._cdf

    def cdf_row(self, blocks: int) -> np.ndarray:
        lo = row_offset(blocks)
        return self.cdf[lo : lo + blocks - 1]

    def _check(self, blocks: int) -> None:
        if blocks < 2 or blocks > self.n_max:
            raise DomainError(f"row {blocks} outside table 2..{self.n_max}")


def build_rate_table(n_max: int, measure: FiniteMeasure) -> RateTable:
    if n_max < 2:
        raise DomainError("rate table needs n_max >= 2")
    entries = np.zeros(n_max * (n_max - 1) // 2)
    if not measure.is_null:
        bottom = row_offset(n_max)
        for group in range(2, n_max + 1):
            entries[bottom + group - 2] = scaled_rate(n_max, group, measure)
        _pascal_fill(entries, n_max)
    totals = np.zeros(n_max + 1)
    for blocks in range(2, n_max + 1):
        lo = row_offset(blocks)
        totals[blocks] = math.fsum(entries[lo : lo + blocks - 1])
    return RateTable(n_max, entries, totals, measure)
