"""Labelled partitions of {1..n}, the refinement order, and restriction by the smallest element."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BadIndices, PreconditionViolated, SizeMismatch


@dataclass(frozen=True)
class LabeledPartition:
    """A partition of ``{1..n}`` with a primary/secondary flag per element.

    Blocks are sorted tuples kept in canonical order (by minimum element), so
    two equal partitions compare equal and block indices are stable.
    ``secondary[i - 1]`` is the label of element ``i``.
    """

    size: int
    blocks: tuple[tuple[int, ...], ...]
    secondary: tuple[bool, ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(block)) for block in self.blocks if len(block)), key=lambda block: block[0]))
        flat = [elem for block in blocks for elem in block]
        if sorted(flat) != list(range(1, self.size + 1)):
            raise SizeMismatch(f"blocks do not partition 1..{self.size}")
        sec = tuple(bool(flag) for flag in self.secondary) if self.secondary else (False,) * self.size
        if len(sec) != self.size:
            raise SizeMismatch("label vector has the wrong length")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "secondary", sec)

    @classmethod
    def singletons(cls, size: int) -> "LabeledPartition":
        return cls(size, tuple((elem,) for elem in range(1, size + 1)), ())

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], size: int | None = None) -> "LabeledPartition":
        blocks = [tuple(block) for block in blocks]
        if size is None:
            size = sum(len(block) for block in blocks)
        return cls(size, tuple(blocks), ())

    @property
    def minima(self) -> tuple[int, ...]:
        return tuple(block[0] for block in self.blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def block_of(self, element: int) -> int:
        for index, block in enumerate(self.blocks):
            if element in block:
                return index
        raise BadIndices(f"element {element} not in 1..{self.size}")

    def block_is_secondary(self, index: int) -> bool:
        return all(self.secondary[elem - 1] for elem in self.blocks[index])

    def with_secondary(self, elements: Iterable[int]) -> "LabeledPartition":
        sec = list(self.secondary)
        for elem in elements:
            sec[elem - 1] = True
        return LabeledPartition(self.size, self.blocks, tuple(sec))

    def to_json(self) -> dict:
        return {
            "n": self.size,
            "blocks": [list(block) for block in self.blocks],
            "secondary": [[self.secondary[elem - 1] for elem in block] for block in self.blocks],
        }

    @classmethod
    def from_json(cls, doc: dict | str) -> "LabeledPartition":
        if isinstance(doc, str):
            doc = json.loads(doc)
        blocks = [tuple(int(elem) for elem in block) for block in doc["blocks"]]
        size = int(doc.get("n", sum(len(block) for block in blocks)))
        sec = [False] * size
        for block, flags in zip(blocks, doc.get("secondary", [[False] * len(block) for block in blocks])):
            if len(flags) != len(block):
                raise SizeMismatch("label array does not match block shape")
            for elem, flag in zip(block, flags):
                sec[elem - 1] = bool(flag)
        return cls(size, tuple(blocks), tuple(sec))


def refines(xi: LabeledPartition, chi: LabeledPartition) -> bool:
    """True iff every block of ``chi`` is a union of blocks of ``xi``."""
    if xi.size != chi.size:
        raise SizeMismatch(f"{xi.size} != {chi.size}")
    owner = np.empty(chi.size + 1, dtype=np.int64)
    for index, block in enumerate(chi.blocks):
        owner[list(block)] = index
    return all(len({owner[elem] for elem in block}) == 1 for block in xi.blocks)


def merge(partition: LabeledPartition, block_indices: Iterable[int]) -> LabeledPartition:
    idx = set(block_indices)
    if len(idx) < 2 or any(not 0 <= index < len(partition) for index in idx):
        raise BadIndices(f"bad merge indices {sorted(idx)} for {len(partition)} blocks")
    merged = tuple(elem for index in sorted(idx) for elem in partition.blocks[index])
    rest = tuple(block for index, block in enumerate(partition.blocks) if index not in idx)
    return LabeledPartition(partition.size, rest + (merged,), partition.secondary)


def restrict_by_smallest(
    path_value: LabeledPartition,
    source_start: LabeledPartition,
    target_start: LabeledPartition,
) -> LabeledPartition:
    """Route each block of ``target_start`` to the block of ``path_value``
    holding its smallest element and merge co-routed blocks.

    ``source_start`` must be finer than ``target_start``; ``path_value`` is a
    later value of a path started from ``source_start``.
    """
    if not refines(source_start, target_start):
        raise PreconditionViolated("source start is not finer than target start")
    if not refines(source_start, path_value):
        raise PreconditionViolated("path value is not a coarsening of the source start")
    owner = np.empty(path_value.size + 1, dtype=np.int64)
    for index, block in enumerate(path_value.blocks):
        owner[list(block)] = index
    groups: dict[int, list[int]] = {}
    for block in target_start.blocks:
        groups.setdefault(int(owner[block[0]]), []).extend(block)
    return LabeledPartition(target_start.size, tuple(tuple(group) for group in groups.values()), target_start.secondary)


def coarsening_sequence(values: Sequence[LabeledPartition]) -> bool:
    """True iff each partition in ``values`` is a coarsening of the previous one."""
    return all(refines(earlier, later) for earlier, later in zip(values, values[1:]))
