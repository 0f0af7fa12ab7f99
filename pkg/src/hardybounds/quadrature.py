"""Adaptive quadrature with certified error estimates and divergence detection.

The integrator is a Gauss-Kronrod 7/15 rule with worst-panel bisection;
improper endpoints are folded to [0, 1) by the rational substitution
``x = anchor +/- scale*t/(1-t)``.  Divergence is a classification, not an error:
a panel overflowing to infinity, or exhaustion of the subdivision budget,
both yield ``classification="divergent"``.

Two interchangeable engines provide the hot loop: a compiled extension and a
numpy fallback.  ``HARDYBOUNDS_FORCE_FALLBACK=1`` forces the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _kernel_fallback
from .expr import CompiledDensity, DomainError

__all__ = [
    "IntegralResult",
    "integrate",
    "divergence_probe",
    "eval_density",
    "backend_name",
    "DEFAULT_REL_TOL",
    "DEFAULT_ABS_TOL",
    "DEFAULT_MAX_SUBDIV",
]

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-14
DEFAULT_MAX_SUBDIV = 2**15

if os.environ.get("HARDYBOUNDS_FORCE_FALLBACK", "") == "1":
    _backend = _kernel_fallback
else:
    try:
        from . import _kernel as _backend  # type: ignore[attr-defined]
    except ImportError:
        _backend = _kernel_fallback


def backend_name() -> str:
    return _backend.BACKEND_NAME


def eval_density(cd: CompiledDensity, xs):
    """Evaluate a compiled program at scalar or array ``xs``."""
    return _backend.eval_many(cd, np.asarray(xs, dtype=float))


Integrand = Union[CompiledDensity, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class IntegralResult:
    value: float
    est_error: float
    classification: str  # "finite" | "divergent"
    subdivisions: int

    @property
    def is_finite(self) -> bool:
        return self.classification == "finite"


def _adapt(f: Integrand, a: float, b: float, mode: int, anchor: float,
           rel_tol: float, abs_tol: float, max_subdiv: int, scale: float):
    if isinstance(f, CompiledDensity):
        return _backend.adapt(f, a, b, mode, anchor, rel_tol, abs_tol,
                              max_subdiv, scale)
    # arbitrary callables always go through the python engine
    return _kernel_fallback.adapt(f, a, b, mode, anchor, rel_tol, abs_tol,
                                  max_subdiv, scale)


def integrate(
    f: Integrand,
    a: float,
    b: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_subdiv: int = DEFAULT_MAX_SUBDIV,
) -> IntegralResult:
    """Integrate ``f`` over (a, b); either endpoint may be infinite.

    For a finite result, ``est_error <= rel_tol*|value| + abs_tol`` holds.
    Domain errors raised by the integrand propagate as :class:`DomainError`.
    """
    if not a < b:
        if a == b:
            return IntegralResult(0.0, 0.0, "finite", 0)
        raise ValueError(f"empty integration range ({a}, {b})")

    # improper pieces map through x = anchor +/- scale*t/(1-t); scaling by
    # the anchor magnitude keeps integrable tails resolvable when the anchor
    # itself is huge
    pieces = []
    if math.isinf(a) and math.isinf(b):
        pieces.append((0.0, 1.0, 2, 0.0, 1.0))  # (-inf, 0]
        pieces.append((0.0, 1.0, 1, 0.0, 1.0))  # [0, +inf)
    elif math.isinf(b):
        pieces.append((0.0, 1.0, 1, a, max(1.0, abs(a))))
    elif math.isinf(a):
        pieces.append((0.0, 1.0, 2, b, max(1.0, abs(b))))
    else:
        pieces.append((a, b, 0, 0.0, 1.0))

    value = 0.0
    err = 0.0
    nsub = 0
    divergent = False
    for lo, hi, mode, anchor, scale in pieces:
        v, e, status, n = _adapt(f, lo, hi, mode, anchor, rel_tol,
                                 abs_tol / len(pieces), max_subdiv, scale)
        nsub += n
        if status != 0:
            divergent = True
            value = math.inf
            err = math.inf
            break
        value += v
        err += e
    if divergent:
        return IntegralResult(math.inf, math.inf, "divergent", nsub)
    return IntegralResult(value, err, "finite", nsub)


# probe parameters: octave sums over a geometrically growing (or shrinking)
# ladder toward the endpoint under test
_PROBE_TERMS = 48
_PROBE_RTOL = 1e-8


def divergence_probe(f: Integrand, toward: float, from_point: float) -> str:
    """Classify ``integral of f`` from ``from_point`` toward ``toward`` as
    ``"integrable"`` or ``"nonintegrable"``.

    The endpoint may be infinite or a finite singular point.  The classifier
    sums octaves along a geometric ladder and inspects the tail mass ratios;
    decay ratio bounded below 1 means a convergent geometric tail.
    """
    if math.isinf(toward):
        sign = 1.0 if toward > 0 else -1.0
        step0 = max(1.0, abs(from_point))
        points = [from_point + sign * step0 * (2.0**k - 1.0) for k in range(_PROBE_TERMS + 1)]
    else:
        gap = toward - from_point
        points = [toward - gap * 2.0 ** (-k) for k in range(_PROBE_TERMS + 1)]

    masses = []
    total = 0.0
    for lo, hi in zip(points, points[1:]):
        if not min(lo, hi) < max(lo, hi):
            break  # ladder collapsed onto the endpoint (float spacing)
        r = integrate(f, min(lo, hi), max(lo, hi), rel_tol=_PROBE_RTOL, abs_tol=0.0,
                      max_subdiv=2**10)
        if not r.is_finite or not math.isfinite(r.value):
            return "nonintegrable"
        masses.append(r.value)
        total += r.value
        if total > 1e300:
            return "nonintegrable"

    if not masses:
        return "integrable"
    tail = masses[-8:]
    scale = max(total, 1.0)
    if all(m <= 1e-16 * scale for m in tail):
        return "integrable"
    ratios = [b / a for a, b in zip(tail, tail[1:]) if a > 0.0]
    if not ratios:
        return "integrable"
    gmean = math.exp(sum(math.log(max(r, 1e-300)) for r in ratios) / len(ratios))
    if gmean <= 0.999:
        return "integrable"
    return "nonintegrable"
