"""Sharp-factor constants multiplying the variational bounds.

``k_general(p, q)`` is the factor valid on any interval,

    k = (1 + q/p')^(1/q) * (1 + p'/q)^(1/p'),    p' = p/(p-1),

and ``k_halfline(p, q)`` the smaller Bliss-type factor valid for one-sided
problems with strict p < q, expressed through the gamma function.  Reports on
bilateral problems always use the general factor; the half-line value is
informational.

The gamma/beta implementations use the Lanczos approximation (g = 607/128,
15 terms) so the package does not depend on scipy.special here.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

__all__ = [
    "KFactor",
    "k_general",
    "k_halfline",
    "gamma_fn",
    "lgamma_fn",
    "beta_fn",
]

# Lanczos coefficients for g = 607/128 (15 terms).
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = (
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    3.3994649984811888699e-5,
    4.6523628927048575665e-5,
    -9.8374475304879564677e-5,
    1.5808870322491248884e-4,
    -2.1026444172410488319e-4,
    2.1743961811521264320e-4,
    -1.6431810653676389022e-4,
    8.4418223983852743293e-5,
    -2.6190838401581408670e-5,
    3.6899182659531622704e-6,
)


def _lanczos_series(z: float) -> float:
    s = _LANCZOS_C[0]
    for k in range(1, len(_LANCZOS_C)):
        s += _LANCZOS_C[k] / (z + k - 1.0)
    return s


def gamma_fn(z: float) -> float:
    """Gamma function for real arguments (poles at 0, -1, -2, ... raise)."""
    if z <= 0.0 and z == math.floor(z):
        raise ValueError(f"gamma pole at {z}")
    if z < 0.5:
        # reflection: gamma(z) gamma(1-z) = pi / sin(pi z)
        return math.pi / (math.sin(math.pi * z) * gamma_fn(1.0 - z))
    z -= 1.0
    base = z + _LANCZOS_G + 0.5
    try:
        return math.sqrt(2.0 * math.pi) * base ** (z + 0.5) * math.exp(-base) * _lanczos_series(z + 1.0)
    except OverflowError:
        return math.inf


def lgamma_fn(z: float) -> float:
    """log gamma for z > 0; stable where gamma itself overflows."""
    if z <= 0.0:
        raise ValueError(f"lgamma requires a positive argument, got {z}")
    if z < 0.5:
        return math.log(math.pi / math.sin(math.pi * z)) - lgamma_fn(1.0 - z)
    zm = z - 1.0
    base = zm + _LANCZOS_G + 0.5
    return 0.5 * math.log(2.0 * math.pi) + (zm + 0.5) * math.log(base) - base + math.log(
        _lanczos_series(z)
    )


def beta_fn(a: float, b: float) -> float:
    """Euler beta via lgamma (avoids overflow for large arguments)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"beta requires positive arguments, got ({a}, {b})")
    return math.exp(lgamma_fn(a) + lgamma_fn(b) - lgamma_fn(a + b))


@dataclass(frozen=True)
class KFactor:
    value: float
    form: str  # "general" | "halfline"

    def __post_init__(self):
        if not self.value >= 1.0:
            raise ValueError(f"k factor must be >= 1, got {self.value}")


def _k_scale() -> float:
    # test hook: lets consistency checks detect a perturbed factor
    return float(os.environ.get("HARDYBOUNDS_K_SCALE", "1.0"))


def validate_pq(p: float, q: float, strict: bool = False) -> None:
    if not (1.0 < p < math.inf and 1.0 < q < math.inf):
        raise ValueError(f"exponents must satisfy 1 < p, q < inf, got p={p}, q={q}")
    if strict:
        if not p < q:
            raise ValueError(f"requires p < q, got p={p}, q={q}")
    elif not p <= q:
        raise ValueError(f"requires p <= q, got p={p}, q={q}")


def k_general(p: float, q: float) -> KFactor:
    """General-interval factor for 1 < p <= q < inf."""
    validate_pq(p, q)
    pp = p / (p - 1.0)
    value = (1.0 + q / pp) ** (1.0 / q) * (1.0 + pp / q) ** (1.0 / pp)
    return KFactor(value=value * _k_scale(), form="general")


def k_halfline(p: float, q: float) -> KFactor:
    """One-sided (Bliss) factor for 1 < p < q < inf:

        k = [ Gamma(pq/(q-p)) / (Gamma(q/(q-p)) Gamma(p(q-1)/(q-p))) ]^(1/p - 1/q)

    computed through lgamma since the arguments blow up as q -> p.
    """
    validate_pq(p, q, strict=True)
    d = q - p
    log_ratio = (
        lgamma_fn(p * q / d) - lgamma_fn(q / d) - lgamma_fn(p * (q - 1.0) / d)
    )
    value = math.exp((1.0 / p - 1.0 / q) * log_ratio)
    return KFactor(value=value * _k_scale(), form="halfline")
