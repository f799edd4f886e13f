"""Deterministic numerics: growth-condition diagnostics and the expectation recurrences."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as _spi

from .errors import Degenerate, DomainError
from .measure import ONE, FiniteMeasure, integrate, mu, mu_bar, mu_sequence, total_rate_integral
from .ratetable import RateTable, row_offset

F_OUTER_EPSREL = 1e-6


# ---------------------------------------------------------------------------
# f-function


def f_function(measure: FiniteMeasure, level: float) -> float:
    """``f(y) = 1 - y mu(1/y) / int_0^y mu(1/x) dx`` with the inner integral by quadrature."""
    if not 0 < level <= 1:
        raise DomainError("level must lie in (0, 1]")
    cumulative = cumulative_mu(measure, level)
    if cumulative == 0:
        return math.nan
    return 1.0 - level * mu(1.0 / level, measure) / cumulative


def cumulative_mu(measure: FiniteMeasure, level: float) -> float:
    """``int_0^y mu(1/x) dx`` by nested quadrature in ``u = log(y / x)``."""
    def integrand(depth: float) -> float:
        point = level * math.exp(-depth)
        return mu(1.0 / point, measure) * point if point > 0 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        val, _ = _spi.quad(integrand, 0.0, math.inf, epsabs=0.0, epsrel=F_OUTER_EPSREL, limit=200)
    return val


def f_function_fubini(measure: FiniteMeasure, level: float) -> float:
    """Same quantity via ``int_0^y mu(1/x) dx = m((0, y]) + y mu(1/y)`` (test oracle)."""
    below = integrate(FiniteMeasure(tuple(atom for atom in measure.atoms if atom.location > 0), measure.pieces), ONE, (0.0, level))
    top = level * mu(1.0 / level, measure)
    return below / (below + top) if below + top > 0 else math.nan


def reconstruct_mu(profile: Callable[[float], float], ys: np.ndarray, total: float, panels_per_decade: int = 8) -> np.ndarray:
    """``mu(1/y) = total * exp(int_y^1 f(t)/t dt) * (1 - f(y))`` with ``total = int_0^1 mu(1/x) dx``.

    The inner integral uses 8-point Gauss-Legendre on log-spaced panels.
    """
    nodes, weights = np.polynomial.legendre.leggauss(8)
    out = np.empty(len(ys))
    for index, level in enumerate(ys):
        if level >= 1.0:
            acc = 0.0
        else:
            n_pan = max(1, int(math.ceil(-math.log10(level) * panels_per_decade)))
            edges = np.linspace(math.log(level), 0.0, n_pan + 1)
            acc = 0.0
            for left, right in zip(edges[:-1], edges[1:]):
                log_nodes = (left + right) / 2 + (right - left) / 2 * nodes
                # dt / t = ds in s = log t
                acc += (right - left) / 2 * sum(weight * profile(math.exp(log_t)) for weight, log_t in zip(weights, log_nodes))
        out[index] = total * math.exp(acc) * (1.0 - profile(level))
    return out


# ---------------------------------------------------------------------------
# condition diagnostics


@dataclass
class ConditionReport:
    """Per-n values of the growth condition ``g_n / (n mu_n) -> 0`` and its split."""

    sizes: np.ndarray
    totals: np.ndarray
    mu: np.ndarray
    mu_bar: np.ndarray
    ratio: np.ndarray
    ratio_main: np.ndarray
    ratio_noise: np.ndarray
    f_values: np.ndarray
    atom_at_zero: float
    verdict: str = field(default="inconclusive")

    def to_json(self) -> dict:
        # JSON key -> attribute
        cols = {"n": "sizes", "g": "totals", "mu": "mu", "mu_bar": "mu_bar", "ratio": "ratio",
                "ratio_main": "ratio_main", "ratio_noise": "ratio_noise", "f_values": "f_values"}
        rows = []
        for row in range(len(self.sizes)):
            values = {key: float(getattr(self, attr)[row]) for key, attr in cols.items()}
            rows.append({key: (value if math.isfinite(value) else None) for key, value in values.items()})
        return {"verdict": self.verdict, "atom_at_zero": self.atom_at_zero, "rows": rows}


def _verdict(ns: np.ndarray, ratio: np.ndarray, atom0: float) -> str:
    if atom0 > 0:
        return "violated"
    if len(ns) < 2:
        return "inconclusive"
    if np.all(np.diff(ratio) >= 0):
        return "violated"
    # log-log slope over the last decade of the grid
    last = ns[-1]
    sel = ns >= last / 10
    if sel.sum() < 2:
        sel = np.zeros_like(sel)
        sel[-2:] = True
    slope = np.polyfit(np.log(ns[sel]), np.log(ratio[sel]), 1)[0]
    return "plausible" if slope < -0.03 else "inconclusive"


def condition_diagnostics(measure: FiniteMeasure, n_grid: Sequence[float], with_f: bool = True) -> ConditionReport:
    ns = np.array(sorted(int(round(value)) for value in n_grid), dtype=float)
    if np.any(ns < 2):
        raise DomainError("grid values must be >= 2")
    mus = np.array([mu(size, measure) for size in ns])
    atom0 = measure.mass_at_zero
    # an atom at 0 alone makes the ratio infinite, which is reported rather than raised
    if np.any(mus == 0) and atom0 == 0:
        raise Degenerate(f"mu_n vanishes at n={ns[mus == 0][0]:g}")
    totals = np.array([total_rate_integral(int(size), measure) for size in ns])
    mub = np.array([mu_bar(size, measure) for size in ns])
    below = np.array([measure.mass(0.0, 1.0 / size, include_hi=False) for size in ns])
    f_vals = np.array([f_function(measure, 1.0 / size) for size in ns]) if with_f else np.full(len(ns), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = totals / (ns * mus)
        ratio_main = mub / (ns * mus)
        ratio_noise = ns * below / mus
    return ConditionReport(
        sizes=ns,
        totals=totals,
        mu=mus,
        mu_bar=mub,
        ratio=ratio,
        ratio_main=ratio_main,
        ratio_noise=ratio_noise,
        f_values=f_vals,
        atom_at_zero=atom0,
        verdict=_verdict(ns, ratio, atom0),
    )


@dataclass
class GrowthRatios:
    sizes: np.ndarray
    mu_power_over_n: np.ndarray
    shift_ratio: np.ndarray
    power_ratio: np.ndarray


def corollary_ratios(measure: FiniteMeasure, n_grid: Sequence[float], power: int = 2, shift: float = 10.0, eps: float = 0.5) -> GrowthRatios:
    """``mu_n**power / n``, ``mu_n / mu_(n - shift)`` and ``mu_n / mu_(n**eps)`` across the grid."""
    ns = np.array(sorted(float(value) for value in n_grid))
    if np.any(ns - shift < 1) or np.any(ns**eps < 1):
        raise DomainError("grid too small for the requested shift")
    mus = np.array([mu(size, measure) for size in ns])
    shifted = np.array([mu(size - shift, measure) for size in ns])
    powered = np.array([mu(size**eps, measure) for size in ns])
    if np.any(mus == 0) or np.any(shifted == 0) or np.any(powered == 0):
        raise Degenerate("mu vanishes on the grid")
    return GrowthRatios(ns, mus**power / ns, mus / shifted, mus / powered)


# ---------------------------------------------------------------------------
# recurrences


def _after_probs(table: RateTable, size: int) -> np.ndarray:
    """``p[k - 1]`` = probability of ``k`` blocks right after the collision from ``n``, ``k = 1..n-1``."""
    lo = row_offset(size)
    row = table.entries[lo : lo + size - 1]
    return row[::-1] / table.totals[size]


def solve_external_recurrence(
    n_max: int,
    table: RateTable,
    cost: Sequence[float] | Callable[[int], float] | None = None,
    seeds: Sequence[float] = (),
) -> np.ndarray:
    """``a_n = c_n + sum_{k<n} p_{n,k} (k - 1)/n a_k`` for ``n = 1..n_max``.

    ``p_{n,k}`` is the probability of ``k`` blocks right after the first
    collision. ``cost`` defaults to ``1/g_n``, making ``a_n`` the mean external
    branch length; ``seeds`` fixes ``a_1, a_2, ...`` (default ``a_1 = 0``).
    Returns an array indexed by ``n`` (entry 0 unused).
    """
    if n_max > table.n_max:
        raise DomainError(f"n_max={n_max} exceeds table n_max={table.n_max}")
    ext_means = np.zeros(n_max + 1)
    for index, seed_value in enumerate(seeds[:n_max]):
        ext_means[index + 1] = seed_value
    if cost is None:
        cost = lambda size: 1.0 / table.totals[size]
    cfun = cost if callable(cost) else (lambda size: cost[size])
    ks = np.arange(1, n_max, dtype=float)
    for size in range(max(len(seeds), 1) + 1, n_max + 1):
        if table.totals[size] <= 0:
            ext_means[size] = math.inf
            continue
        probs = _after_probs(table, size)
        ext_means[size] = cfun(size) + float(np.dot(probs * (ks[: size - 1] - 1.0), ext_means[1:size])) / size
    return ext_means


def solve_total_recurrence(n_max: int, table: RateTable, mu_values: np.ndarray | None = None) -> np.ndarray:
    """``b_n = mu_n/g_n + sum_{k<n} p_{n,k} k mu_n / (n mu_k) b_k`` with ``b_1 = 0``.

    ``b_n`` is the mean of ``mu_n L_total / n``. ``mu_values[k]`` defaults to
    :func:`~lambdacoal.measure.mu_sequence` of the table's measure; zeros are
    replaced by 1.
    """
    if n_max > table.n_max:
        raise DomainError(f"n_max={n_max} exceeds table n_max={table.n_max}")
    if mu_values is None:
        if table.measure is None:
            raise DomainError("table carries no measure; pass mu_values")
        mu_values = mu_sequence(n_max, table.measure)
    muv = np.where(np.asarray(mu_values[: n_max + 1], dtype=float) == 0, 1.0, mu_values[: n_max + 1])
    total_means = np.zeros(n_max + 1)
    ks = np.arange(1, n_max, dtype=float)
    for size in range(2, n_max + 1):
        if table.totals[size] <= 0:
            total_means[size] = math.inf
            continue
        probs = _after_probs(table, size)
        total_means[size] = muv[size] / table.totals[size] + muv[size] / size * float(np.dot(probs * ks[: size - 1] / muv[1:size], total_means[1:size]))
    return total_means


def solve_pair_recurrence(n_max: int, table: RateTable, ext_means: np.ndarray | None = None) -> np.ndarray:
    """``d_n = E[T_1 T_2]``, the mixed moment of two external branches, for ``n = 2..n_max``.

    With holding time ``H ~ Exp(g_n)`` and ``m = n - k + 1`` blocks after a
    ``k``-merger, conditioning on how many of elements 1 and 2 take part gives
    ``d_n = 2/g_n**2 + sum_k P(k) [q0 (2 a_m / g_n + d_m) + q1 a_m / g_n]``
    where ``ext_means`` holds the external-branch means from
    :func:`solve_external_recurrence`. Returns an array indexed by ``n``.
    """
    if n_max > table.n_max:
        raise DomainError(f"n_max={n_max} exceeds table n_max={table.n_max}")
    if ext_means is None:
        ext_means = solve_external_recurrence(n_max, table)
    pair_means = np.zeros(n_max + 1)
    for size in range(2, n_max + 1):
        total = table.totals[size]
        if total <= 0:
            pair_means[size] = math.inf
            continue
        ks = np.arange(2, size + 1)
        after = size - ks + 1
        probs = table.row(size) / total
        neither = (size - ks) * (size - ks - 1) / (size * (size - 1))
        one = 2.0 * ks * (size - ks) / (size * (size - 1))
        pair_means[size] = 2.0 / total**2 + float(np.dot(probs, neither * (2.0 * ext_means[after] / total + pair_means[after]) + one * ext_means[after] / total))
    return pair_means


def perturbed_cost(table: RateTable, strength: float = 5.0) -> Callable[[int], float]:
    """``c'_n = (1 + strength / ln n) / g_n``."""
    return lambda size: (1.0 + strength / math.log(size)) / table.totals[size]
