"""Pathwise couplings of Lambda-coalescents.

All constructions start from a path of the noise coalescent (driven by
``m1``) and modify it with collisions driven by a second measure ``m2``. After
each such collision the future of the noise path is re-used through
restriction by the smallest element: every current block follows the noise
block that holds its smallest element.

The state of that routing is kept in :class:`_Router`. Each current block is
attached to exactly one noise block and vice versa, so a noise merger becomes
a visible merger only when at least two current blocks ride on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .errors import DegenerateRate, DomainError, NonIntegrable
from .measure import INV2, FiniteMeasure, integrate, moments_first_drop, mu
from .ratetable import RateTable, build_rate_table
from .simulator import CoalescentPath, simulate, simulate_counts

ETA_GRID_POINTS = 4096
SERIES_CUTOFF = 1e-12


class _Router:
    """Current partition plus its routing onto a noise path.

    Block ids are minimum elements. ``noise_of[c]`` is the noise block carrying
    current block ``c`` and ``cur_of`` is its inverse.
    """

    def __init__(self, size: int):
        self.elems: dict[int, list[int]] = {elem: [elem] for elem in range(1, size + 1)}
        self.ids: list[int] = list(range(1, size + 1))
        self.noise_of: dict[int, int] = {elem: elem for elem in range(1, size + 1)}
        self.cur_of: dict[int, int] = {elem: elem for elem in range(1, size + 1)}

    def __len__(self) -> int:
        return len(self.ids)

    def merge_current(self, chosen: list[int]) -> int:
        """Merge current blocks; the result keeps the route of its smallest element."""
        head = min(chosen)
        for block in chosen:
            if block == head:
                continue
            self.elems[head].extend(self.elems.pop(block))
            del self.cur_of[self.noise_of.pop(block)]
        drop = set(chosen)
        drop.discard(head)
        self.ids = [block for block in self.ids if block not in drop]
        return head

    def noise_event(self, merged: tuple[int, ...]) -> list[int]:
        """Apply a noise merger; returns the current blocks it joins (maybe fewer than 2)."""
        riders = [self.cur_of.pop(noise_id) for noise_id in merged if noise_id in self.cur_of]
        new_noise = min(merged)
        if not riders:
            return riders
        for block in riders:
            del self.noise_of[block]
        if len(riders) >= 2:
            head = min(riders)
            for block in riders:
                if block != head:
                    self.elems[head].extend(self.elems.pop(block))
            drop = set(riders)
            drop.discard(head)
            self.ids = [block for block in self.ids if block not in drop]
        else:
            head = riders[0]
        self.noise_of[head] = new_noise
        self.cur_of[new_noise] = head
        return riders


def _uniform_subset(ids: list[int], group: int, rng: np.random.Generator) -> list[int]:
    pool = list(ids)
    count = len(pool)
    for slot in range(group):
        pick = int(rng.integers(slot, count))
        pool[slot], pool[pick] = pool[pick], pool[slot]
    return pool[:group]


def _ensure_table(table: RateTable | None, size: int, measure: FiniteMeasure) -> RateTable:
    if table is not None and table.n_max >= size:
        return table
    return build_rate_table(max(size, 2), measure)


def divide_path(
    noise_path: CoalescentPath,
    table2: RateTable,
    rng: np.random.Generator,
) -> CoalescentPath:
    """Modify ``noise_path`` with collisions of the coalescent whose rates are ``table2``.

    Between noise events a fresh main coalescent runs from the current value;
    its first collision merges current blocks and the remaining noise path is
    re-used by restriction by the smallest element. A null main measure draws
    no random numbers and returns the noise path unchanged.
    """
    size = noise_path.size
    out = CoalescentPath(size)
    if size <= 1:
        return out
    state = _Router(size)
    g2 = table2.totals
    when = 0.0
    noise_idx = 0
    n_old = len(noise_path.times)

    def clock(now: float) -> float:
        blocks = len(state)
        if blocks < 2 or g2[blocks] <= 0:
            return math.inf
        return now + rng.exponential(1.0 / g2[blocks])

    t2 = clock(0.0)
    while len(state) > 1:
        t_old = noise_path.times[noise_idx] if noise_idx < n_old else math.inf
        if t2 < t_old:
            when = t2
            blocks = len(state)
            group = int(np.searchsorted(table2.cdf_row(blocks), rng.random(), side="right")) + 2
            chosen = _uniform_subset(state.ids, group, rng)
            state.merge_current(chosen)
            out.times.append(when)
            out.merged.append(tuple(sorted(chosen)))
            out.counts_after.append(len(state))
            t2 = clock(when)
        elif t_old < math.inf:
            when = t_old
            riders = state.noise_event(noise_path.merged[noise_idx])
            noise_idx += 1
            if len(riders) >= 2:
                out.times.append(when)
                out.merged.append(tuple(sorted(riders)))
                out.counts_after.append(len(state))
                # the main coalescent restarts from the new value
                t2 = clock(when)
        else:
            out.absorbed = True
            break
    return out


def measure_division_simulate(
    size: int,
    m1: FiniteMeasure,
    m2: FiniteMeasure,
    rng: np.random.Generator,
    table1: RateTable | None = None,
    table2: RateTable | None = None,
) -> CoalescentPath:
    """A path of the ``(m1 + m2)``-coalescent built from an ``m1`` path interrupted by ``m2``."""
    if size < 1:
        raise DomainError("size must be positive")
    table1 = _ensure_table(table1, size, m1)
    table2 = _ensure_table(table2, size, m2)
    noise = simulate(size, table1, rng)
    return divide_path(noise, table2, rng)


def coupling_violations(path1: CoalescentPath, path2: CoalescentPath) -> int:
    """Number of event times at which ``|path2| > |path1|``."""
    times = sorted(set(path1.times) | set(path2.times) | {0.0})
    return sum(path2.block_count(when) > path1.block_count(when) for when in times)


def monotone_couple(
    size: int,
    m1: FiniteMeasure,
    m2: FiniteMeasure,
    rng: np.random.Generator,
    table1: RateTable | None = None,
    table_diff: RateTable | None = None,
) -> tuple[CoalescentPath, CoalescentPath]:
    """Coupled ``m1``- and ``m2``-paths with ``|path2(t)| <= |path1(t)|`` for all t.

    Requires ``m1 <= m2``, certified piece by piece (raises ``NotDominated``).
    """
    diff = m2.difference(m1)
    table1 = _ensure_table(table1, size, m1)
    table_diff = _ensure_table(table_diff, size, diff)
    path1 = simulate(size, table1, rng)
    return path1, divide_path(path1, table_diff, rng)


# ---------------------------------------------------------------------------
# two-type coalescent


class EtaSampler:
    """Draws from ``x**-2 m2(dx)`` normalised, by a tabulated inverse CDF.

    Atoms are exact jumps; density pieces are cut into log-spaced cells whose
    masses come from Gauss-Legendre quadrature, and a draw inside a cell is
    uniform (linear interpolation of the CDF).
    """

    def __init__(self, m2: FiniteMeasure, grid_points: int = ETA_GRID_POINTS):
        self.total = integrate(m2, INV2)
        if not self.total > 0:
            raise DomainError("main measure has no mass")
        nodes, weights = np.polynomial.legendre.leggauss(8)
        lefts, rights, masses = [], [], []
        for piece in m2.pieces:
            lo = piece.lo if piece.lo > 0 else min(1e-12, piece.hi / 2)
            edges = np.geomspace(lo, piece.hi, grid_points)
            cell_lo, cell_hi = edges[:-1], edges[1:]
            half = (cell_hi - cell_lo) / 2
            points = (cell_lo + cell_hi)[:, None] / 2 + half[:, None] * nodes[None, :]
            vals = piece.density(points.ravel()).reshape(points.shape) / points**2
            lefts.append(cell_lo)
            rights.append(cell_hi)
            masses.append(half * (vals @ weights))
        for at in m2.atoms:
            lefts.append(np.array([at.location]))
            rights.append(np.array([at.location]))
            masses.append(np.array([at.mass / at.location**2]))
        self.left = np.concatenate(lefts)
        self.right = np.concatenate(rights)
        mass = np.concatenate(masses)
        self.cum = np.cumsum(mass)
        self.mass = mass

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        target = rng.random(size) * self.cum[-1]
        cell = np.minimum(np.searchsorted(self.cum, target, side="right"), len(self.cum) - 1)
        prev = np.where(cell > 0, self.cum[cell - 1], 0.0)
        frac = np.clip((target - prev) / self.mass[cell], 0.0, 1.0)
        return self.left[cell] + frac * (self.right[cell] - self.left[cell])


@dataclass
class MarkingSchedule:
    """Poisson marking times ``S_i`` at rate ``int x**-2 m2`` and head probabilities ``eta_i``."""

    times: np.ndarray
    etas: np.ndarray


@dataclass
class TwoTypePath:
    """A two-type path.

    ``first_mark[i - 1]`` is element i's first Head time while a singleton
    (``inf`` if never), ``noise_external[i - 1]`` its external branch in the
    underlying noise path, and ``coalesced_at_first_mark`` whether {i} merged at
    that mark. ``label_updates`` lists ``(time, elements turned secondary)``.
    """

    path: CoalescentPath
    noise_path: CoalescentPath
    schedule: MarkingSchedule
    first_mark: np.ndarray
    noise_external: np.ndarray
    coalesced_at_first_mark: np.ndarray
    secondary: np.ndarray
    label_updates: list[tuple[float, tuple[int, ...]]] = field(default_factory=list)


def default_split(size: int, measure: FiniteMeasure) -> tuple[FiniteMeasure, FiniteMeasure]:
    """``(m restricted to [0, 1/n), m restricted to [1/n, 1])``."""
    return measure.split_at(1.0 / size)


def _noise_external(path: CoalescentPath) -> np.ndarray:
    external = np.full(path.size, np.inf)
    for when, ids in zip(path.times, path.merged):
        for elem in ids:
            if external[elem - 1] == np.inf:
                external[elem - 1] = when
    return external


def two_type_simulate(
    size: int,
    m1: FiniteMeasure,
    m2: FiniteMeasure,
    rng: np.random.Generator,
    *,
    horizon: float = math.inf,
    table1: RateTable | None = None,
    eta: EtaSampler | None = None,
    batch: int = 256,
) -> TwoTypePath:
    """Run the marking construction on a fresh ``m1`` path until one block or ``horizon``."""
    if size < 1:
        raise DomainError("size must be positive")
    rate = integrate(m2, INV2)
    if not math.isfinite(rate):
        raise NonIntegrable("main measure has infinite x^-2 moment")
    table1 = _ensure_table(table1, size, m1)
    noise = simulate(size, table1, rng)
    if eta is None and rate > 0:
        eta = EtaSampler(m2)

    out = CoalescentPath(size)
    first_mark = np.full(size, np.inf)
    hit = np.zeros(size, dtype=bool)
    secondary = np.zeros(size, dtype=bool)
    updates: list[tuple[float, tuple[int, ...]]] = []
    mark_t: list[np.ndarray] = []
    mark_eta: list[np.ndarray] = []
    state = _Router(size)
    noise_idx = 0
    n_old = len(noise.times)
    clock_start = 0.0
    done = len(state) <= 1
    while not done:
        if rate > 0:
            ts = clock_start + np.cumsum(rng.exponential(1.0 / rate, batch))
            es = eta.sample(rng, batch)
            us = rng.random(batch)
        else:
            ts = np.array([math.inf])
            es = us = np.zeros(1)
        mark_t.append(ts)
        mark_eta.append(es)
        for mark_idx in range(len(ts)):
            t_mark = ts[mark_idx]
            # noise events strictly before the mark
            while noise_idx < n_old and noise.times[noise_idx] < t_mark and noise.times[noise_idx] <= horizon and len(state) > 1:
                riders = state.noise_event(noise.merged[noise_idx])
                if len(riders) >= 2:
                    out.times.append(noise.times[noise_idx])
                    out.merged.append(tuple(sorted(riders)))
                    out.counts_after.append(len(state))
                noise_idx += 1
            if len(state) == 1 or t_mark == math.inf or t_mark > horizon:
                done = True
                break
            n_heads = _binomial_from_uniform(len(state), es[mark_idx], us[mark_idx])
            if n_heads == 0:
                continue
            heads = _uniform_subset(state.ids, n_heads, rng)
            flipped = []
            for block in heads:
                members = state.elems[block]
                if len(members) == 1 and first_mark[block - 1] == np.inf:
                    first_mark[block - 1] = t_mark
                    hit[block - 1] = n_heads >= 2
                for elem in members:
                    if not secondary[elem - 1]:
                        secondary[elem - 1] = True
                        flipped.append(elem)
            if flipped:
                updates.append((float(t_mark), tuple(sorted(flipped))))
            if n_heads >= 2:
                state.merge_current(heads)
                out.times.append(float(t_mark))
                out.merged.append(tuple(sorted(heads)))
                out.counts_after.append(len(state))
        clock_start = float(ts[-1])
    if len(state) > 1 and rate == 0 and horizon == math.inf:
        out.absorbed = True
    times = np.concatenate(mark_t) if mark_t else np.zeros(0)
    etas = np.concatenate(mark_eta) if mark_eta else np.zeros(0)
    keep = times <= (out.times[-1] if len(state) == 1 and out.times else horizon)
    return TwoTypePath(
        path=out,
        noise_path=noise,
        schedule=MarkingSchedule(times[keep], etas[keep]),
        first_mark=first_mark,
        noise_external=_noise_external(noise),
        coalesced_at_first_mark=hit,
        secondary=secondary,
        label_updates=updates,
    )


def _binomial_from_uniform(trials: int, prob: float, uniform: float) -> int:
    """Smallest h with ``P(Binomial(b, p) <= h) > u``, by summing the pmf upward."""
    if prob >= 1.0:
        return trials
    fail_prob = 1.0 - prob
    pmf = math.exp(trials * math.log1p(-prob))
    if pmf == 0.0:
        return int(binom.ppf(uniform, trials, prob))
    acc = pmf
    count = 0
    ratio = prob / fail_prob
    while acc <= uniform and count < trials:
        pmf *= (trials - count) / (count + 1) * ratio
        count += 1
        acc += pmf
    return count


def first_mark_coalescence_prob(
    size: int,
    m2: FiniteMeasure,
    horizon: float,
    group_size: int,
    reps: int,
    rng: np.random.Generator,
    batch: int = 4096,
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of the first-mark coalescence series.

    ``m2`` is restricted to ``[1/size, 1]``. Each replicate draws a marking
    schedule and sums ``Delta_i (1 - (1 - Delta_i)**(group_size - 1))`` over marks
    before ``horizon`` with ``Delta_i = eta_i prod_{j<i} (1 - eta_j)``, stopping once the
    running product falls below 1e-12.
    """
    if group_size < 2:
        raise DomainError("group_size must be at least 2")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    main = m2.restrict(1.0 / size, 1.0)
    rate = integrate(main, INV2)
    if rate == 0:
        return 0.0, 0.0
    eta = EtaSampler(main)
    vals = np.empty(reps)
    for rep in range(reps):
        total = 0.0
        log_surv = 0.0
        clock_start = 0.0
        while True:
            if math.isfinite(horizon):
                times = clock_start + np.cumsum(rng.exponential(1.0 / rate, batch))
            else:
                times = np.zeros(batch)
            etas = eta.sample(rng, batch)
            with np.errstate(divide="ignore"):
                log1m = np.log1p(-np.minimum(etas, 1.0))
            before = log_surv + np.concatenate(([0.0], np.cumsum(log1m)[:-1]))
            delta = etas * np.exp(before)
            live = (times < horizon) & (before > math.log(SERIES_CUTOFF))
            stop = not live.all()
            if stop:
                cut = int(np.argmin(live))
                delta = delta[:cut]
            with np.errstate(divide="ignore"):
                total += float(np.sum(delta * -np.expm1((group_size - 1) * np.log1p(-np.minimum(delta, 1.0)))))
            if stop:
                break
            log_surv += float(np.sum(log1m))
            clock_start = float(times[-1]) if math.isfinite(horizon) else 0.0
        vals[rep] = total
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0


# ---------------------------------------------------------------------------
# tripling


@dataclass
class TriplingReport:
    """Result of :func:`tripling_check`.

    ``violations`` counts replicates where ``n - sum(W) > |Pi(t)|`` at some
    event; ``w_mean``/``w_sq_mean`` are empirical moments of all merger drops
    ``W`` with their standard errors and the closed forms they estimate.
    """

    reps: int
    violations: int
    w_mean: float
    w_mean_se: float
    w_sq_mean: float
    w_sq_mean_se: float
    exact_mean: float
    exact_sq_mean: float
    n_draws: int
    final_blocks: np.ndarray = field(repr=False)

    @property
    def bound_fraction(self) -> float:
        return 1.0 - self.violations / self.reps


def tripling_check(
    size: int,
    measure: FiniteMeasure,
    horizon_t: float,
    reps: int,
    rng: np.random.Generator,
    table: RateTable | None = None,
) -> TriplingReport:
    """Simulate the tripled system and check ``n - sum W_i <= |Pi(t)|`` on every path.

    The coalescent is embedded in ``n`` slots that always merge at the full
    ``n``-block rate: each collision picks ``k`` slots, ``W = k - 1`` is the drop
    the bound charges, and the real blocks lose ``j - 1`` where ``j`` of them
    were among the chosen slots. The real block count is a Lambda-coalescent by
    consistency.
    """
    table = _ensure_table(table, size, measure)
    total = table.totals[size] if size >= 2 else 0.0
    if not total > 0:
        raise DegenerateRate(f"g_{size} = 0")
    ex, ex2 = moments_first_drop(size, measure)
    cdf = table.cdf_row(size)
    violations = 0
    ws: list[np.ndarray] = []
    finals = np.empty(reps, dtype=np.int64)
    for rep in range(reps):
        events = rng.poisson(total * horizon_t)
        ks = np.searchsorted(cdf, rng.random(events), side="right") + 2
        blocks = size
        bad = False
        used = 0
        for group in ks:
            if blocks > 1:
                hits = int(rng.hypergeometric(blocks, size - blocks, group)) if size > blocks else int(group)
                if hits >= 2:
                    blocks -= hits - 1
            used += int(group) - 1
            if size - used > blocks:
                bad = True
        violations += bad
        finals[rep] = blocks
        ws.append(ks - 1)
    drops = np.concatenate(ws).astype(float) if ws else np.zeros(0)
    nd = len(drops)
    se = lambda values: float(values.std(ddof=1) / math.sqrt(len(values))) if len(values) > 1 else math.nan
    return TriplingReport(
        reps=reps,
        violations=violations,
        w_mean=float(drops.mean()) if nd else math.nan,
        w_mean_se=se(drops),
        w_sq_mean=float((drops**2).mean()) if nd else math.nan,
        w_sq_mean_se=se(drops**2),
        exact_mean=ex,
        exact_sq_mean=ex2,
        n_draws=nd,
        final_blocks=finals,
    )


def noise_block_loss_prob(
    size: int,
    measure: FiniteMeasure,
    time_scale: float,
    eps: float,
    reps: int,
    seed: int,
    m1: FiniteMeasure | None = None,
) -> tuple[float, float]:
    """Probability that the noise coalescent loses at least ``size * eps`` blocks by ``time_scale / mu_n``.

    ``m1`` defaults to ``measure`` restricted to ``[0, 1/size)``; ``mu_n`` is that of ``measure``.
    Returns the estimate and its standard error.
    """
    mu_n = mu(size, measure)
    if not mu_n > 0:
        raise DomainError("mu_n must be positive")
    noise = measure.restrict(0.0, 1.0 / size, include_hi=False) if m1 is None else m1
    if noise.is_null:
        return 0.0, 0.0
    table = build_rate_table(size, noise)
    batch = simulate_counts(size, table, seed, reps, n_track=1, horizon=time_scale / mu_n)
    lost = batch.blocks_at_horizon <= size - size * eps
    prob = float(lost.mean())
    return prob, math.sqrt(prob * (1 - prob) / reps)


__all__ = [
    "EtaSampler",
    "MarkingSchedule",
    "TriplingReport",
    "TwoTypePath",
    "coupling_violations",
    "default_split",
    "divide_path",
    "first_mark_coalescence_prob",
    "measure_division_simulate",
    "monotone_couple",
    "noise_block_loss_prob",
    "tripling_check",
    "two_type_simulate",
]
