"""Goodness-of-fit helpers and the limit laws the simulations are checked against."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError, EmptySample


@dataclass(frozen=True)
class LimitLaw:
    """A distribution on [0, inf) given by its CDF and density."""

    name: str
    cdf: Callable[[np.ndarray], np.ndarray]
    pdf: Callable[[np.ndarray], np.ndarray]


def exp_law() -> LimitLaw:
    return LimitLaw("exp", lambda value: -np.expm1(-np.maximum(value, 0.0)), lambda value: np.exp(-value) * (value >= 0))


def kingman_law() -> LimitLaw:
    """Limit of ``n * T`` for the Kingman coalescent: density ``8 / (2 + x)**3``."""
    return LimitLaw(
        "kingman",
        lambda value: 1.0 - 4.0 / (2.0 + np.maximum(value, 0.0)) ** 2,
        lambda value: 8.0 / (2.0 + value) ** 3 * (value >= 0),
    )


def beta_limit_law(shape_a: float, shape_b: float) -> LimitLaw:
    """Limit of ``n**(1 - shape_a)`` times the external branch for Beta(shape_a, shape_b), ``0 < shape_a < 1``.

    Density ``norm (1 + rate x)**-gam`` with ``norm = G(a+b) / ((1-a) G(b))``,
    ``rate = G(a+b) / ((2-a) G(b))`` and ``gam = (3 - 2a) / (1 - a)``, where
    ``a, b`` are the two shapes.
    """
    if not 0 < shape_a < 1 or shape_b <= 0:
        raise DomainError("beta limit law needs 0 < a < 1 and b > 0")
    lg = special.gammaln(shape_a + shape_b) - special.gammaln(shape_b)
    norm = math.exp(lg) / (1 - shape_a)
    rate = math.exp(lg) / (2 - shape_a)
    gam = (3 - 2 * shape_a) / (1 - shape_a)
    return LimitLaw(
        f"beta({shape_a},{shape_b})",
        lambda value: 1.0 - (1.0 + rate * np.maximum(value, 0.0)) ** (1.0 - gam),
        lambda value: norm * (1.0 + rate * value) ** (-gam) * (value >= 0),
    )


def conjecture_alpha(constant: float, tol: float = 1e-10) -> float:
    """Root ``alpha`` in (1, 2) of ``(alpha - 1) Gamma(2 - alpha) / alpha = constant``, by bisection."""
    if not constant > 0:
        raise DomainError("constant must be positive")
    objective = lambda al: (al - 1.0) * math.gamma(2.0 - al) / al - constant
    # the left side runs from 0 at alpha=1 to +inf as alpha -> 2
    lo, hi = 1.0 + 1e-15, 2.0 - 1e-15
    return optimize.bisect(objective, lo, hi, xtol=tol)


def conjecture_law(constant: float) -> LimitLaw:
    """Density ``Gamma(2 - alpha) (1 + constant x)**(-alpha/(alpha-1) - 1)`` with ``alpha`` from :func:`conjecture_alpha`."""
    al = conjecture_alpha(constant)
    power = al / (al - 1.0)
    gamma_val = math.gamma(2.0 - al)
    return LimitLaw(
        f"conjecture(c={constant:.6g})",
        lambda value: 1.0 - (1.0 + constant * np.maximum(value, 0.0)) ** (-power),
        lambda value: gamma_val * (1.0 + constant * value) ** (-power - 1.0) * (value >= 0),
    )


def beta_conjecture_c(shape_a: float) -> float:
    """``c = (1 - a) Gamma(a) / (2 - a)`` for Beta(a, b), ``0 < a < 1``."""
    return (1 - shape_a) * math.gamma(shape_a) / (2 - shape_a)


def named_law(name: str, shape_a: float = 0.5, shape_b: float = 1.0, constant: float | None = None) -> LimitLaw:
    if name == "exp":
        return exp_law()
    if name == "kingman":
        return kingman_law()
    if name == "beta":
        return beta_limit_law(shape_a, shape_b)
    if name == "conjecture":
        return conjecture_law(beta_conjecture_c(shape_a) if constant is None else constant)
    raise DomainError(f"unknown law {name!r}")


def ks_test(sample: np.ndarray, law: LimitLaw | str) -> tuple[float, float]:
    """Kolmogorov-Smirnov distance of ``sample`` to ``law`` and its asymptotic p-value."""
    values = np.asarray(sample, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        raise EmptySample("no data")
    if isinstance(law, str):
        law = named_law(law)
    res = stats.kstest(values, law.cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_2samp(first: np.ndarray, second: np.ndarray) -> tuple[float, float]:
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.size == 0 or second.size == 0:
        raise EmptySample("no data")
    res = stats.ks_2samp(first, second)
    return float(res.statistic), float(res.pvalue)


def kaplan_meier(times: np.ndarray, observed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kaplan-Meier survival estimate.

    Returns the distinct event times and the survival just after each. A
    censored value equal to an event time counts as still at risk there.
    """
    times = np.asarray(times, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    if times.size == 0:
        raise EmptySample("no data")
    order = np.lexsort((~observed, times))
    sorted_times, events = times[order], observed[order]
    at_risk = len(sorted_times) - np.arange(len(sorted_times))
    ev_t = sorted_times[events]
    # distinct event times: ties share one factor
    uniq, first = np.unique(ev_t, return_index=True)
    counts = np.diff(np.append(first, len(ev_t)))
    risk = at_risk[events][first]
    surv = np.cumprod(1.0 - counts / risk)
    return uniq, surv


def km_ks_distance(times: np.ndarray, observed: np.ndarray, law: LimitLaw, upto: float = math.inf) -> float:
    """Sup distance between a Kaplan-Meier curve and ``law``'s survival on ``[0, upto]``."""
    ut, surv = kaplan_meier(times, observed)
    keep = ut <= upto
    ut, surv = ut[keep], surv[keep]
    if ut.size == 0:
        return 0.0
    target = 1.0 - law.cdf(ut)
    before = np.concatenate(([1.0], surv[:-1]))
    return float(max(np.max(np.abs(surv - target)), np.max(np.abs(before - target))))


def mean_se(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptySample("no data")
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
