"""Extended-real values with an explicit classification.

Numbers coming out of the bound computations are one of: an ordinary finite
value, exactly zero, +infinity (a certified divergence), or "unknown" (a
sampling probe could not settle the limit; ``value`` then carries the best
observed magnitude for diagnostics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["ExtendedReal", "FINITE", "INFINITE", "ZERO", "UNKNOWN"]

FINITE = "finite"
INFINITE = "infinite"
ZERO = "zero"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class ExtendedReal:
    value: float
    classification: str = FINITE

    @staticmethod
    def finite(v: float) -> "ExtendedReal":
        v = float(v)
        if math.isinf(v):
            return ExtendedReal(math.inf, INFINITE)
        if v == 0.0:
            return ExtendedReal(0.0, ZERO)
        return ExtendedReal(v, FINITE)

    @staticmethod
    def infinite() -> "ExtendedReal":
        return ExtendedReal(math.inf, INFINITE)

    @staticmethod
    def zero() -> "ExtendedReal":
        return ExtendedReal(0.0, ZERO)

    @staticmethod
    def unknown(best: float = math.nan) -> "ExtendedReal":
        return ExtendedReal(best, UNKNOWN)

    @property
    def is_finite(self) -> bool:
        return self.classification in (FINITE, ZERO)

    @property
    def is_infinite(self) -> bool:
        return self.classification == INFINITE

    @property
    def is_unknown(self) -> bool:
        return self.classification == UNKNOWN

    def scaled(self, factor: float) -> "ExtendedReal":
        """Multiply by a positive finite factor, preserving classification."""
        if self.classification == FINITE:
            return ExtendedReal.finite(self.value * factor)
        if self.classification == UNKNOWN:
            return ExtendedReal(self.value * factor, UNKNOWN)
        return self

    def squared(self) -> "ExtendedReal":
        if self.classification == FINITE:
            return ExtendedReal.finite(self.value * self.value)
        if self.classification == UNKNOWN:
            return ExtendedReal(self.value * self.value, UNKNOWN)
        return self

    def json_value(self):
        if self.is_infinite:
            return "inf"
        if math.isnan(self.value):
            return None
        return self.value

    def to_json(self) -> dict:
        return {"value": self.json_value(), "class": self.classification}

    def __float__(self) -> float:
        return float(self.value)

    def __format__(self, spec: str) -> str:
        if self.is_infinite:
            return "inf"
        return format(self.value, spec)


def ext_max(*vals: ExtendedReal) -> ExtendedReal:
    """Supremum of classified values: any infinite wins; otherwise the largest
    known value, downgraded to unknown if an unknown term could exceed it."""
    if any(v.is_infinite for v in vals):
        return ExtendedReal.infinite()
    known = [v for v in vals if v.is_finite]
    unknown = [v for v in vals if v.is_unknown]
    best = max((v.value for v in known), default=0.0)
    if unknown:
        seen = max((v.value for v in unknown if not math.isnan(v.value)), default=math.nan)
        if math.isnan(seen) or seen > best:
            return ExtendedReal(max(best, 0.0 if math.isnan(seen) else seen), UNKNOWN)
    if not known:
        return ExtendedReal.zero()
    return ExtendedReal.finite(best)


__all__.append("ext_max")
