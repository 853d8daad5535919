"""Scalars over valued fields: the reals and the p-adic rationals.

Real scalars carry a float payload.  p-adic scalars carry an exact
``Fraction`` so that valuations and absolute values are exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

DEFAULT_REAL_THETA = 1.0 - 2.0**-20

Number = Union[float, int, Fraction]


class ValuationMismatch(ValueError):
    """Operands live over different valued fields."""


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def p_valuation(x: Number, p: int) -> float:
    """Exact p-adic valuation of a rational; ``inf`` for zero."""
    x = Fraction(x)
    if x == 0:
        return math.inf
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


@dataclass(frozen=True)
class Valuation:
    """A nontrivial absolute value on a field.

    ``kind`` is ``"real"`` (archimedean, dense value group, configurable
    annulus constant ``theta``) or ``"padic"`` (value group ``p**Z`` and
    ``theta = 1/p``).
    """

    kind: str
    p: int | None = None
    theta: float = DEFAULT_REAL_THETA

    def __post_init__(self):
        if self.kind == "real":
            if self.p is not None:
                raise ValueError("real valuation takes no prime")
            if not 0.0 < self.theta <= 1.0:
                raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        elif self.kind == "padic":
            if self.p is None or not _is_prime(int(self.p)):
                # p = 1 or composite would not be a valuation; p-less is the trivial one
                raise ValueError(f"p-adic valuation needs a prime, got {self.p}")
            object.__setattr__(self, "p", int(self.p))
            object.__setattr__(self, "theta", 1.0 / self.p)
        else:
            raise ValueError(f"unknown valuation kind {self.kind!r} (trivial valuation is not supported)")

    @classmethod
    def real(cls, theta: float = DEFAULT_REAL_THETA) -> "Valuation":
        return cls("real", None, theta)

    @classmethod
    def padic(cls, p: int) -> "Valuation":
        return cls("padic", p)

    @property
    def dense(self) -> bool:
        return self.kind == "real"

    @property
    def archimedean(self) -> bool:
        return self.kind == "real"

    def abs(self, x: Number):
        """Absolute value of a raw payload (float for reals, Fraction for p-adics)."""
        if self.kind == "real":
            return abs(float(x))
        v = p_valuation(x, self.p)
        if v == math.inf:
            return Fraction(0)
        return Fraction(self.p) ** (-v)

    def coerce(self, x: Number):
        """Convert a raw number to this field's payload type."""
        if self.kind == "real":
            return float(x)
        if isinstance(x, float):
            return Fraction(x)  # exact binary fraction
        return Fraction(x)

    def in_value_group(self, w: Number) -> bool:
        """Whether ``w`` is a nonzero absolute value of some field element."""
        if w <= 0:
            return False
        if self.kind == "real":
            return True
        w = Fraction(w)
        e = p_valuation(w, self.p)
        return w == Fraction(self.p) ** e

    def value_group_floor(self, theta: Number):
        """Largest element of the value group not exceeding ``theta``."""
        if theta <= 0:
            raise ValueError("theta must be positive")
        if self.kind == "real":
            return theta
        p = Fraction(self.p)
        t = Fraction(theta)
        e = math.floor(math.log(float(t), self.p))
        while p**e > t:
            e -= 1
        while p ** (e + 1) <= t:
            e += 1
        return p**e

    def to_json(self) -> dict:
        if self.kind == "real":
            return {"kind": "real", "theta": self.theta}
        return {"kind": "padic", "p": self.p}

    @classmethod
    def from_json(cls, obj: dict) -> "Valuation":
        kind = obj.get("kind")
        if kind == "real":
            return cls.real(obj.get("theta", DEFAULT_REAL_THETA))
        if kind == "padic":
            return cls.padic(obj["p"])
        raise ValueError(f"unknown valuation kind {kind!r}")


REAL = Valuation.real()


@dataclass(frozen=True)
class Scalar:
    valuation: Valuation
    value: Number

    def __post_init__(self):
        object.__setattr__(self, "value", self.valuation.coerce(self.value))

    def _check(self, other) -> "Scalar":
        if not isinstance(other, Scalar):
            return Scalar(self.valuation, other)
        if other.valuation != self.valuation:
            raise ValuationMismatch(f"{self.valuation} vs {other.valuation}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return Scalar(self.valuation, self.value + other.value)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._check(other)
        return Scalar(self.valuation, self.value - other.value)

    def __rsub__(self, other):
        return self._check(other) - self

    def __mul__(self, other):
        other = self._check(other)
        return Scalar(self.valuation, self.value * other.value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._check(other)
        return Scalar(self.valuation, self.value / other.value)

    def __neg__(self):
        return Scalar(self.valuation, -self.value)

    def __abs__(self):
        return abs_value(self)

    @property
    def valuation_order(self) -> float:
        """v_p of a p-adic scalar (``inf`` at zero)."""
        if self.valuation.kind != "padic":
            raise ValueError("order is only defined for p-adic scalars")
        return p_valuation(self.value, self.valuation.p)


def abs_value(s: Scalar):
    """|s|; exact (a Fraction in p**Z) for p-adic scalars."""
    return s.valuation.abs(s.value)


def theta(v: Valuation) -> float:
    return v.theta


def sup_norm(v: Valuation, x: Sequence[Number], weights: Sequence[float] | None = None):
    """max_i w_i |x_i|"""
    if weights is None:
        return max(v.abs(c) for c in x)
    return max(w * v.abs(c) for w, c in zip(weights, x))


def normalize_annulus(v: Valuation, x: Sequence[Number]):
    """Rescale a nonzero vector into the annulus Θ ≤ |y| ≤ 1 (sup-norm).

    Returns ``(k, y)`` with ``y = k x``.  Over the reals ``|y| = 1``;
    over ℚ_p the scaling is by a power of p, which also lands on ``|y| = 1``.
    """
    x = [v.coerce(c) for c in x]
    n = sup_norm(v, x)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    if v.kind == "real":
        k = 1.0 / n
        # divide rather than multiply so the max entry maps to exactly ±1
        y = [c / n for c in x]
    else:
        e = min(p_valuation(c, v.p) for c in x if c != 0)
        k = Fraction(v.p) ** -e
        y = [c * k for c in x]
    return Scalar(v, k), y
