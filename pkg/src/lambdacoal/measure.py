"""Finite measures on [0, 1] and the integral functionals of a Lambda-coalescent.

A :class:`FiniteMeasure` is a finite sum of point masses and density pieces.
Everything the rest of the package needs from the characteristic measure goes
through :func:`integrate`, which adds exact atom contributions to adaptive
quadrature over each piece.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy import integrate as _spi
from scipy import special

from .errors import DegenerateRate, DomainError, MeasureSpecError, NonIntegrable, NotDominated

# Below this point quadrature runs in the variable u = -log(x).
SUBSTITUTION_EPS = 1e-3
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 400


def log_binom(total: int, chosen: int) -> float:
    return math.lgamma(total + 1) - math.lgamma(chosen + 1) - math.lgamma(total - chosen + 1)


# ---------------------------------------------------------------------------
# integrands


@dataclass(frozen=True)
class Weight:
    """A named integrand ``w(x)`` used against the measure.

    ``zero_power`` is the exponent ``p`` with ``w(x) ~ x**p`` as ``x -> 0``;
    ``at_zero`` is ``w(0)`` when it is finite and ``None`` when the weight is
    singular there, in which case an atom at 0 makes the integral diverge.
    """

    name: str
    fn: Callable[[float], float]
    zero_power: float
    at_zero: float | None
    peak: float | None = None

    def __call__(self, point: float) -> float:
        if point == 0.0:
            if self.at_zero is None:
                raise NonIntegrable(f"weight {self.name} is singular at 0")
            return self.at_zero
        return self.fn(point)


ONE = Weight("1", lambda point: 1.0, 0.0, 1.0)
INV = Weight("x^-1", lambda point: 1.0 / point, -1.0, None)
INV2 = Weight("x^-2", lambda point: 1.0 / (point * point), -2.0, None)


def beta_kernel(blocks: int, group: int, log_scale: float = 0.0) -> Weight:
    """``exp(log_scale) * x**(k-2) * (1-x)**(b-k)``, the integrand of lambda_{b,k}."""
    if group < 2 or group > blocks:
        raise DomainError(f"need 2 <= group <= blocks, got blocks={blocks}, group={group}")
    pk, pb = group - 2, blocks - group

    def kernel(point: float) -> float:
        if point >= 1.0:
            return math.exp(log_scale) if pb == 0 else 0.0
        log_value = log_scale
        if pk:
            log_value += pk * math.log(point)
        if pb:
            log_value += pb * math.log1p(-point)
        return math.exp(log_value)

    at_zero = math.exp(log_scale) if group == 2 else 0.0
    peak = pk / (blocks - 2) if blocks > 2 and 0 < pk < blocks - 2 else None
    return Weight(f"x^{pk}(1-x)^{pb}", kernel, float(pk), at_zero, peak)


_STIRLERR_SMALL = [
    math.lgamma(count + 1.0) - (count + 0.5) * math.log(count) + count - 0.5 * math.log(2 * math.pi) if count else 0.0
    for count in range(16)
]


def _stirlerr(count: float) -> float:
    """``log(n!) - log(sqrt(2 pi n) (n/e)**n)`` for integer ``n``."""
    if count <= 15:
        return _STIRLERR_SMALL[int(count)]
    nn = count * count
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    if count > 500:
        return (s0 - s1 / nn) / count
    if count > 80:
        return (s0 - (s1 - s2 / nn) / nn) / count
    if count > 35:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / count
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / count


def _bd0(successes: float, np_: float) -> float:
    """``x log(x / np) + np - x`` without cancellation when ``x`` is close to ``np``."""
    if abs(successes - np_) < 0.1 * (successes + np_):
        ratio = (successes - np_) / (successes + np_)
        total = (successes - np_) * ratio
        ej = 2 * successes * ratio
        ratio = ratio * ratio
        term = 1
        while True:
            ej *= ratio
            s1 = total + ej / (2 * term + 1)
            if s1 == total:
                return s1
            total = s1
            term += 1
    return successes * math.log(successes / np_) + np_ - successes


def binom_pmf(successes: int, trials: int, prob: float) -> float:
    """Binomial probability ``C(n,k) x**k (1-x)**(n-k)`` to near machine precision.

    Uses the saddle-point form (Loader's algorithm), which avoids the large
    cancelling logarithms of the naive ``lgamma`` route. ``scipy.stats.binom``
    computes the same thing but is far too slow per scalar call inside an
    adaptive quadrature.
    """
    fail_prob = 1.0 - prob
    if successes == 0:
        return math.exp(trials * math.log1p(-prob))
    if successes == trials:
        return math.exp(trials * math.log(prob))
    lc = _stirlerr(trials) - _stirlerr(successes) - _stirlerr(trials - successes) - _bd0(successes, trials * prob) - _bd0(trials - successes, trials * fail_prob)
    lf = math.log(2 * math.pi) + math.log(successes) + math.log1p(-successes / trials)
    return math.exp(lc - 0.5 * lf)


def binomial_kernel(blocks: int, group: int) -> Weight:
    """``C(b,k) x**(k-2) (1-x)**(b-k)``; integrates to ``C(b,k) * lambda_{b,k}``.

    Working with this scaled kernel keeps every rate-table entry O(1) where the
    unscaled ``lambda_{b,k}`` would underflow for large ``b``.
    """
    if group < 2 or group > blocks:
        raise DomainError(f"need 2 <= group <= blocks, got blocks={blocks}, group={group}")
    c2 = blocks * (blocks - 1) / 2.0

    def kernel(point: float) -> float:
        if point >= 1.0:
            return 1.0 if group == blocks else 0.0
        if point < 1e-150:
            return c2 if group == 2 else 0.0
        return binom_pmf(group, blocks, point) / point / point

    peak = (group - 2) / (blocks - 2) if blocks > 2 and 0 < group - 2 < blocks - 2 else None
    return Weight(f"C({blocks},{group})x^{group - 2}(1-x)^{blocks - group}", kernel, float(group - 2), c2 if group == 2 else 0.0, peak)


def collision_kernel(blocks: int) -> Weight:
    """``(1 - (1-x)**n - n x (1-x)**(n-1)) / x**2``, the integrand of ``g_n``."""

    def kernel(point: float) -> float:
        if point >= 1.0:
            return 1.0
        # P(Binomial(n, x) >= 2), without the cancellation of the raw form
        if point < 1e-300:
            return blocks * (blocks - 1) / 2.0
        return float(special.betainc(2.0, blocks - 1.0, point)) / point / point

    return Weight(f"collision[{blocks}]", kernel, 0.0, None)


def first_drop_kernel(blocks: int) -> Weight:
    """``(1 - (1-x)**(n-1)) / x``, the integrand in the mean first-collision drop."""

    def kernel(point: float) -> float:
        if point >= 1.0:
            return 1.0
        return -math.expm1((blocks - 1) * math.log1p(-point)) / point

    return Weight(f"firstdrop[{blocks}]", kernel, 0.0, float(blocks - 1))


# ---------------------------------------------------------------------------
# density pieces


@dataclass(frozen=True)
class Atom:
    location: float
    mass: float


@dataclass(frozen=True)
class Piece:
    """A density on the interval ``[lo, hi)``.

    Families:

    * ``const``: ``c``
    * ``beta``: ``weight * x**(a-1) (1-x)**(b-1) / Beta(a, b)``
    * ``logpow``: ``p * log(1/x)**q``
    """

    family: str
    params: tuple[float, ...]
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise MeasureSpecError(f"bad support [{self.lo}, {self.hi}]")
        fam, params = self.family, self.params
        if fam == "const":
            ok = len(params) == 1 and params[0] >= 0
        elif fam == "beta":
            ok = len(params) == 3 and params[0] > 0 and params[1] > 0 and params[2] >= 0
        elif fam == "logpow":
            ok = len(params) == 2 and params[0] >= 0 and params[1] > -1
        else:
            raise MeasureSpecError(f"unknown family {fam!r}")
        if not ok:
            raise MeasureSpecError(f"bad parameters {params} for family {fam}")

    # scale is the linear coefficient, shape the remaining parameters
    @property
    def scale(self) -> float:
        return self.params[2] if self.family == "beta" else self.params[0]

    @property
    def shape(self) -> tuple[float, ...]:
        if self.family == "beta":
            return self.params[:2]
        return self.params[1:]

    def with_scale(self, value: float) -> "Piece":
        if self.family == "beta":
            return replace(self, params=(self.params[0], self.params[1], value))
        return replace(self, params=(value,) + self.params[1:])

    @property
    def zero_power(self) -> float:
        return self.params[0] - 1.0 if self.family == "beta" else 0.0

    @property
    def is_zero(self) -> bool:
        return self.scale == 0.0

    def density_fn(self) -> Callable[[float], float]:
        fam, params = self.family, self.params
        if fam == "const":
            coef = params[0]
            return lambda point: coef
        if fam == "beta":
            shape_a, shape_b, weight = params
            lognorm = math.log(weight) - special.betaln(shape_a, shape_b) if weight > 0 else -math.inf

            def beta_pdf(point: float) -> float:
                log_value = lognorm
                if shape_a != 1.0:
                    log_value += (shape_a - 1.0) * math.log(point)
                if shape_b != 1.0:
                    log_value += (shape_b - 1.0) * math.log1p(-point)
                return math.exp(log_value)

            return beta_pdf
        coef, power = params
        return lambda point: coef * (-math.log(point)) ** power

    def density(self, points: np.ndarray) -> np.ndarray:
        """Vectorised density, zero outside ``[lo, hi)``."""
        points = np.asarray(points, dtype=float)
        out = np.zeros_like(points)
        inside = (points >= self.lo) & (points < self.hi) & (points > 0) & (points < 1)
        xi = points[inside]
        fam, params = self.family, self.params
        if fam == "const":
            out[inside] = params[0]
        elif fam == "beta":
            shape_a, shape_b, weight = params
            out[inside] = weight * np.exp((shape_a - 1) * np.log(xi) + (shape_b - 1) * np.log1p(-xi) - special.betaln(shape_a, shape_b))
        else:
            out[inside] = params[0] * (-np.log(xi)) ** params[1]
        return out

    def to_json(self) -> dict:
        fam, params = self.family, self.params
        doc: dict = {"family": fam}
        if fam == "const":
            doc["c"] = params[0]
        elif fam == "beta":
            doc.update(a=params[0], b=params[1], weight=params[2])
        else:
            doc.update(p=params[0], q=params[1])
        doc.update(lo=self.lo, hi=self.hi)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Piece":
        try:
            fam = doc["family"]
            lo, hi = float(doc.get("lo", 0.0)), float(doc.get("hi", 1.0))
            if fam == "const":
                params = (float(doc["c"]),)
            elif fam == "beta":
                params = (float(doc["a"]), float(doc["b"]), float(doc.get("weight", 1.0)))
            elif fam == "logpow":
                params = (float(doc["p"]), float(doc["q"]))
            else:
                raise MeasureSpecError(f"unknown family {fam!r}")
        except KeyError as exc:
            raise MeasureSpecError(f"piece missing field {exc}") from None
        return cls(fam, params, lo, hi)


# ---------------------------------------------------------------------------
# the measure


@dataclass(frozen=True)
class FiniteMeasure:
    """Atoms plus density pieces on [0, 1]. Immutable; the null measure is legal."""

    atoms: tuple[Atom, ...] = ()
    pieces: tuple[Piece, ...] = ()

    def __post_init__(self):
        atoms = tuple(sorted(self.atoms, key=lambda atom: atom.location))
        for atom in atoms:
            if not (0.0 <= atom.location <= 1.0) or not atom.mass > 0 or not math.isfinite(atom.mass):
                raise MeasureSpecError(f"bad atom {atom}")
        xs = [atom.location for atom in atoms]
        if len(set(xs)) != len(xs):
            raise MeasureSpecError("atom locations must be distinct")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "pieces", tuple(piece for piece in self.pieces if not piece.is_zero))

    # constructors ----------------------------------------------------------
    @classmethod
    def null(cls) -> "FiniteMeasure":
        return cls()

    @classmethod
    def dirac(cls, location: float = 0.0, mass: float = 1.0) -> "FiniteMeasure":
        return cls(atoms=(Atom(location, mass),))

    @classmethod
    def lebesgue(cls, lo: float = 0.0, hi: float = 1.0, density: float = 1.0) -> "FiniteMeasure":
        return cls(pieces=(Piece("const", (density,), lo, hi),))

    @classmethod
    def beta(cls, shape_a: float, shape_b: float, weight: float = 1.0) -> "FiniteMeasure":
        return cls(pieces=(Piece("beta", (shape_a, shape_b, weight)),))

    @classmethod
    def logpow(cls, coef: float, power: float, cutoff: float = 1.0) -> "FiniteMeasure":
        return cls(pieces=(Piece("logpow", (coef, power), 0.0, cutoff),))

    # algebra ---------------------------------------------------------------
    @property
    def is_null(self) -> bool:
        return not self.atoms and not self.pieces

    @property
    def mass_at_zero(self) -> float:
        return sum(atom.mass for atom in self.atoms if atom.location == 0.0)

    def __add__(self, other: "FiniteMeasure") -> "FiniteMeasure":
        masses: dict[float, float] = {}
        for atom in self.atoms + other.atoms:
            masses[atom.location] = masses.get(atom.location, 0.0) + atom.mass
        return FiniteMeasure(tuple(Atom(location, mass) for location, mass in masses.items()), self.pieces + other.pieces)

    def scaled(self, factor: float) -> "FiniteMeasure":
        if factor < 0:
            raise DomainError("scale factor must be non-negative")
        if factor == 0:
            return FiniteMeasure()
        return FiniteMeasure(
            tuple(Atom(atom.location, atom.mass * factor) for atom in self.atoms),
            tuple(piece.with_scale(piece.scale * factor) for piece in self.pieces),
        )

    def restrict(self, lo: float, hi: float, include_hi: bool = True) -> "FiniteMeasure":
        """Restriction to ``[lo, hi]`` (or ``[lo, hi)`` with ``include_hi=False``)."""
        atoms = tuple(atom for atom in self.atoms if lo <= atom.location and (atom.location <= hi if include_hi else atom.location < hi))
        pieces = []
        for piece in self.pieces:
            left, right = max(piece.lo, lo), min(piece.hi, hi)
            if left < right:
                pieces.append(replace(piece, lo=left, hi=right))
        return FiniteMeasure(atoms, tuple(pieces))

    def split_at(self, cut: float) -> tuple["FiniteMeasure", "FiniteMeasure"]:
        """``(Lambda 1_[0,c), Lambda 1_[c,1])``; an atom at ``c`` goes right."""
        return self.restrict(0.0, cut, include_hi=False), self.restrict(cut, 1.0)

    def difference(self, smaller: "FiniteMeasure") -> "FiniteMeasure":
        """``self - smaller``, certified syntactically.

        Every piece of ``smaller`` must sit inside a piece of ``self`` of the
        same family and shape with at least its scale, and every atom of
        ``smaller`` must be matched by an atom of ``self`` at the same location
        with at least its mass. Anything else raises :class:`NotDominated`.
        """
        masses = {atom.location: atom.mass for atom in self.atoms}
        for atom in smaller.atoms:
            have = masses.get(atom.location, 0.0)
            if have < atom.mass * (1 - 1e-12):
                raise NotDominated(f"atom at {atom.location}: {have} < {atom.mass}")
            masses[atom.location] = have - atom.mass
        atoms = tuple(Atom(location, mass) for location, mass in masses.items() if mass > 1e-15)

        pieces = list(self.pieces)
        for sp in smaller.pieces:
            for index, bp in enumerate(pieces):
                if (
                    bp.family == sp.family
                    and bp.shape == sp.shape
                    and bp.lo <= sp.lo
                    and sp.hi <= bp.hi
                    and bp.scale >= sp.scale * (1 - 1e-12)
                ):
                    parts = []
                    if bp.lo < sp.lo:
                        parts.append(replace(bp, hi=sp.lo))
                    parts.append(replace(bp, lo=sp.lo, hi=sp.hi).with_scale(max(bp.scale - sp.scale, 0.0)))
                    if sp.hi < bp.hi:
                        parts.append(replace(bp, lo=sp.hi))
                    pieces[index : index + 1] = parts
                    break
            else:
                raise NotDominated(f"no piece dominates {sp}")
        return FiniteMeasure(atoms, tuple(pieces))

    def total_mass(self) -> float:
        return integrate(self, ONE)

    def mass(self, lo: float, hi: float, include_hi: bool = True) -> float:
        return integrate(self.restrict(lo, hi, include_hi), ONE, (lo, hi))

    # serialisation ---------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "atoms": [{"x": atom.location, "mass": atom.mass} for atom in self.atoms],
            "pieces": [piece.to_json() for piece in self.pieces],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FiniteMeasure":
        if not isinstance(doc, dict):
            raise MeasureSpecError("measure spec must be a JSON object")
        try:
            atoms = tuple(Atom(float(atom["x"]), float(atom["mass"])) for atom in doc.get("atoms", []))
        except (KeyError, TypeError) as exc:
            raise MeasureSpecError(f"bad atom entry: {exc}") from None
        pieces = tuple(Piece.from_json(piece) for piece in doc.get("pieces", []))
        return cls(atoms, pieces)


def parse_measure(spec: str) -> FiniteMeasure:
    """Parse a preset (``kingman``, ``lebesgue``, ``null``, ``beta:a,b``,
    ``logpow:p,q,r``), ``file:path.json``, a path to a JSON file, or inline JSON."""
    spec = spec.strip()
    name, _, arg = spec.partition(":")
    try:
        if name == "kingman":
            return FiniteMeasure.dirac(0.0)
        if name in ("lebesgue", "bolthausen-sznitman", "bs"):
            return FiniteMeasure.lebesgue()
        if name == "null":
            return FiniteMeasure.null()
        if name == "beta":
            shape_a, shape_b = (float(token) for token in arg.split(","))
            return FiniteMeasure.beta(shape_a, shape_b)
        if name == "logpow":
            vals = [float(token) for token in arg.split(",")]
            if len(vals) == 2:
                vals.append(1.0)
            coef, power, cutoff = vals
            return FiniteMeasure.logpow(coef, power, cutoff)
    except ValueError as exc:
        raise MeasureSpecError(f"bad preset {spec!r}: {exc}") from None
    if name == "file":
        return FiniteMeasure.from_json(json.loads(Path(arg).read_text()))
    if spec.startswith("{"):
        return FiniteMeasure.from_json(json.loads(spec))
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return FiniteMeasure.from_json(json.loads(path.read_text()))
    raise MeasureSpecError(f"unrecognised measure spec {spec!r}")


# ---------------------------------------------------------------------------
# quadrature


def _quad(integrand: Callable[[float], float], left: float, right: float, peak: float | None = None, epsrel: float = QUAD_EPSREL) -> float:
    if not left < right:
        return 0.0
    if peak is not None and left < peak < right:
        return _quad(integrand, left, peak, None, epsrel) + _quad(integrand, peak, right, None, epsrel)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _spi.IntegrationWarning)
        val, _ = _spi.quad(integrand, left, right, epsabs=0.0, epsrel=epsrel, limit=QUAD_LIMIT)
    return val


def _integrate_piece(piece: Piece, weight: Weight, lo: float, hi: float, epsrel: float) -> float:
    density = piece.density_fn()
    weight_fn = weight.fn

    def integrand(point: float) -> float:
        return weight_fn(point) * density(point)

    peak = weight.peak
    total = 0.0
    if lo < SUBSTITUTION_EPS:
        top = min(hi, SUBSTITUTION_EPS)

        def hu(depth: float) -> float:
            point = math.exp(-depth)
            if point == 0.0:
                return 0.0
            return integrand(point) * point

        upeak = -math.log(peak) if peak is not None and lo < peak < top else None
        total += _quad(hu, -math.log(top), math.inf if lo == 0.0 else -math.log(lo), upeak, epsrel)
        lo = top
    if lo < hi:
        total += _quad(integrand, lo, hi, peak, epsrel)
    return total


def integrate(
    measure: FiniteMeasure,
    weight: Weight,
    interval: tuple[float, float] = (0.0, 1.0),
    epsrel: float = QUAD_EPSREL,
) -> float:
    """``int_{[lo, hi]} weight(x) m(dx)``.

    Atoms contribute exactly; each density piece is integrated by adaptive
    Gauss-Kronrod quadrature at relative tolerance ``epsrel``, in the variable
    ``u = -log x`` on the part below 1e-3.
    """
    lo, hi = interval
    if not (0.0 <= lo <= hi <= 1.0):
        raise DomainError(f"interval {interval} not inside [0, 1]")
    total = 0.0
    for atom in measure.atoms:
        if lo <= atom.location <= hi:
            if atom.location == 0.0 and weight.at_zero is None:
                raise NonIntegrable(f"atom at 0 against singular weight {weight.name}")
            total += atom.mass * weight(atom.location)
    for piece in measure.pieces:
        left, right = max(piece.lo, lo), min(piece.hi, hi)
        if not left < right:
            continue
        if left == 0.0:
            power = piece.zero_power + weight.zero_power
            if power <= -1:
                raise NonIntegrable(f"{piece.family} piece against {weight.name} diverges at 0")
        total += _integrate_piece(piece, weight, left, right, epsrel)
    return total


# ---------------------------------------------------------------------------
# rates and functionals


def lambda_rate(blocks: int, group: int, measure: FiniteMeasure) -> float:
    """``lambda_{b,k} = int x**(k-2) (1-x)**(b-k) m(dx)``."""
    if group < 2 or group > blocks:
        raise DomainError(f"need 2 <= group <= blocks, got blocks={blocks}, group={group}")
    return integrate(measure, beta_kernel(blocks, group))


def scaled_rate(blocks: int, group: int, measure: FiniteMeasure, epsrel: float = QUAD_EPSREL) -> float:
    """``C(b,k) * lambda_{b,k}``: the rate at which some k of b blocks merge."""
    if group < 2 or group > blocks:
        raise DomainError(f"need 2 <= group <= blocks, got blocks={blocks}, group={group}")
    return integrate(measure, binomial_kernel(blocks, group), epsrel=epsrel)


def total_rate(blocks: int, measure: FiniteMeasure) -> float:
    """``g_b = sum_k C(b,k) lambda_{b,k}`` by direct summation."""
    if blocks < 2:
        raise DomainError("total rate needs b >= 2")
    return math.fsum(scaled_rate(blocks, group, measure) for group in range(2, blocks + 1))


def total_rate_integral(blocks: int, measure: FiniteMeasure) -> float:
    """``g_b`` from the collision-probability integral.

    An atom at 0 contributes its Kingman rate ``C(b,2) * mass`` separately, so
    this also works when ``m({0}) > 0``.
    """
    if blocks < 2:
        raise DomainError("total rate needs b >= 2")
    rest = FiniteMeasure(tuple(atom for atom in measure.atoms if atom.location > 0.0), measure.pieces)
    return blocks * (blocks - 1) / 2 * measure.mass_at_zero + integrate(rest, collision_kernel(blocks))


@dataclass(frozen=True)
class MeasureFunctionals:
    size: float
    mu_n: float
    mu_bar_n: float
    g_n: float
    mass_below: float
    degenerate: bool = field(default=False)

    @property
    def normalizer(self) -> float:
        """``mu_n`` with the convention that a vanishing value is replaced by 1."""
        return 1.0 if self.degenerate else self.mu_n


def mu(size: float, measure: FiniteMeasure) -> float:
    """``int_{[1/n, 1]} x**-1 m(dx)``; ``size`` may be any real >= 1."""
    return integrate(measure, INV, (1.0 / size, 1.0))


def mu_bar(size: float, measure: FiniteMeasure) -> float:
    return integrate(measure, INV2, (1.0 / size, 1.0))


def functionals(size: int, measure: FiniteMeasure) -> MeasureFunctionals:
    if size < 2:
        raise DomainError("functionals need size >= 2")
    mu_n = mu(size, measure)
    return MeasureFunctionals(
        size=size,
        mu_n=mu_n,
        mu_bar_n=mu_bar(size, measure),
        g_n=total_rate_integral(int(size), measure),
        mass_below=measure.mass(0.0, 1.0 / size, include_hi=False),
        degenerate=mu_n == 0.0,
    )


def mu_sequence(n_max: int, measure: FiniteMeasure) -> np.ndarray:
    """``mu^(k)`` for ``k = 0..n_max`` (index 0 unused), built incrementally."""
    out = np.zeros(n_max + 1)
    rest = FiniteMeasure(pieces=measure.pieces)
    acc = 0.0
    for size in range(1, n_max + 1):
        if size > 1:
            acc += integrate(rest, INV, (1.0 / size, 1.0 / (size - 1)))
        out[size] = acc
    atom_part = np.zeros(n_max + 1)
    for atom in measure.atoms:
        if atom.location > 0:
            # atom at x counts for every k with 1/k <= x
            kmin = max(1, math.ceil(1.0 / atom.location - 1e-12))
            if kmin <= n_max:
                atom_part[kmin:] += atom.mass / atom.location
    out += atom_part
    out[0] = 0.0
    return out


def moments_first_drop(size: int, measure: FiniteMeasure) -> tuple[float, float]:
    """Closed forms for ``E[X]`` and ``E[X**2]``, X the block-count drop at the
    first collision of an ``n``-coalescent."""
    total = total_rate_integral(size, measure)
    if total == 0:
        raise DegenerateRate(f"g_{size} = 0")
    ex = size * integrate(measure, first_drop_kernel(size)) / total - 1.0
    ex2 = size * (size - 1) * measure.total_mass() / total - ex
    return ex, ex2


def iter_pieces(measures: Iterable[FiniteMeasure]) -> Iterable[Piece]:
    for measure in measures:
        yield from measure.pieces
