"""Weighted intervals, masses, dual densities, quantiles and matching points.

A :class:`WeightedInterval` carries two weight densities u (for the target
measure) and v (for the gradient measure) on an interval whose endpoints may
be infinite.  For an exponent p the dual density is ``h = v^(-1/(p-1))``;
masses of ``u dx`` and ``h dx`` drive every bound formula.

Masses are organized in per-density ledgers: exact adaptive integrals
memoized by coordinate, one-sided masses anchored at the endpoints (so tiny
tails keep full relative accuracy), and a 4097-node interpolation table in
the compactified coordinate used for fast bracketing and grid search.  Every
reported quantity is re-evaluated with exact masses; tables only steer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from . import quadrature
from .expr import CompiledDensity, DensityExpr, compile_density, compose_power, parse
from .extreal import ExtendedReal

__all__ = [
    "ValidationError",
    "NumericalError",
    "Endpoint",
    "Exponents",
    "WeightedInterval",
    "MeasureSystem",
    "h_density",
    "mu_mass",
    "nuhat_mass",
    "matching_point",
    "median",
]

TABLE_NODES = 4097
POSITIVITY_PROBES = 64


class ValidationError(ValueError):
    """Problem data rejected before any computation."""


class NumericalError(RuntimeError):
    """A computation could not reach its accuracy contract."""


@dataclass(frozen=True)
class Endpoint:
    value: float

    @property
    def tag(self) -> str:
        if math.isinf(self.value):
            return "plus_infinity" if self.value > 0 else "minus_infinity"
        return "finite"

    @property
    def is_finite(self) -> bool:
        return not math.isinf(self.value)


@dataclass(frozen=True)
class Exponents:
    p: float
    q: float

    def __post_init__(self):
        if not (1.0 < self.p < math.inf) or not (1.0 < self.q < math.inf):
            raise ValidationError(
                f"exponents must satisfy 1 < p, q < inf, got p={self.p}, q={self.q}"
            )

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)


class _CoordMap:
    """Bijection between the interval and the open unit interval.

    Finite intervals map affinely; half-infinite and doubly infinite ones use
    rational maps whose inverses are closed-form.
    """

    def __init__(self, left: float, right: float):
        self.left = left
        self.right = right
        self.kind = (math.isinf(left), math.isinf(right))

    def x(self, xi):
        xi = np.asarray(xi, dtype=float)
        li, ri = self.kind
        if not li and not ri:
            out = self.left + (self.right - self.left) * xi
        elif not li and ri:
            out = self.left + xi / (1.0 - xi)
        elif li and not ri:
            out = self.right - (1.0 - xi) / xi
        else:
            out = (2.0 * xi - 1.0) / (2.0 * xi * (1.0 - xi))
        return float(out) if out.ndim == 0 else out

    def xi(self, x):
        x = np.asarray(x, dtype=float)
        li, ri = self.kind
        with np.errstate(all="ignore"):
            if not li and not ri:
                out = (x - self.left) / (self.right - self.left)
            elif not li and ri:
                d = x - self.left
                out = d / (1.0 + d)
            elif li and not ri:
                d = self.right - x
                out = 1.0 / (1.0 + d)
            else:
                out = np.where(
                    x == 0.0, 0.5, (x - 1.0 + np.sqrt(x * x + 1.0)) / (2.0 * np.where(x == 0.0, 1.0, x))
                )
        out = np.clip(out, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out


@dataclass
class _Table:
    xi: np.ndarray
    xs: np.ndarray
    cum: np.ndarray  # signed approx mass from a mid-table base node to xs[i]
    from_left: np.ndarray | None  # approx mass of [left, xs[i]]
    from_right: np.ndarray | None  # approx mass of [xs[i], right]


class _MassLedger:
    """All mass queries for one density on one interval."""

    def __init__(self, cd: CompiledDensity, left: float, right: float, name: str):
        self.cd = cd
        self.left = left
        self.right = right
        self.name = name
        self.map = _CoordMap(left, right)
        self.anchor = self.map.x(0.5)
        self._F: dict[float, float] = {}
        self._L: dict[float, float] = {}
        self._R: dict[float, float] = {}
        self._Lt: dict[float, float] = {}
        self._Rt: dict[float, float] = {}

    # -- endpoint integrability ------------------------------------------

    def _probe_side(self, toward: float) -> bool:
        if not math.isinf(toward):
            # a finite endpoint only carries a divergence if the density is
            # unbounded there; peek before paying for a full probe
            gaps = np.abs(toward - self.anchor) * 2.0 ** -np.arange(4, 24, 2)
            pts = toward + np.sign(self.anchor - toward) * gaps
            vals = quadrature.eval_density(self.cd, pts)
            if np.all(vals <= 1e6 * (1.0 + abs(float(vals[0])))):
                return True
        return quadrature.divergence_probe(self.cd, toward, self.anchor) == "integrable"

    @cached_property
    def left_integrable(self) -> bool:
        return self._probe_side(self.left)

    @cached_property
    def right_integrable(self) -> bool:
        return self._probe_side(self.right)

    # -- exact masses ------------------------------------------------------

    def _int(self, a: float, b: float, rel_tol: float = quadrature.DEFAULT_REL_TOL) -> float:
        # abs_tol must be zero here: one-sided masses get inverted inside
        # bracket sums, so a mass of 1e-200 still needs relative accuracy
        r = quadrature.integrate(self.cd, a, b, rel_tol=rel_tol, abs_tol=0.0)
        if not r.is_finite:
            return math.inf
        return r.value

    def F(self, x: float) -> float:
        """Signed cumulative mass from the anchor."""
        x = float(x)
        got = self._F.get(x)
        if got is None:
            got = self._int(self.anchor, x) if x >= self.anchor else -self._int(x, self.anchor)
            self._F[x] = got
        return got

    def L(self, x: float) -> float:
        """Mass of [left, x]; inf when the left tail diverges."""
        if not self.left_integrable:
            return math.inf
        x = float(x)
        got = self._L.get(x)
        if got is None:
            got = self._int(self.left, x)
            self._L[x] = got
        return got

    def R(self, x: float) -> float:
        """Mass of [x, right]; inf when the right tail diverges."""
        if not self.right_integrable:
            return math.inf
        x = float(x)
        got = self._R.get(x)
        if got is None:
            got = self._int(x, self.right)
            self._R[x] = got
        return got

    # high-precision variants backing the matching-point residual contract
    def L_tight(self, x: float) -> float:
        if not self.left_integrable:
            return math.inf
        x = float(x)
        got = self._Lt.get(x)
        if got is None:
            got = self._int(self.left, x, rel_tol=1e-13)
            self._Lt[x] = got
        return got

    def R_tight(self, x: float) -> float:
        if not self.right_integrable:
            return math.inf
        x = float(x)
        got = self._Rt.get(x)
        if got is None:
            got = self._int(x, self.right, rel_tol=1e-13)
            self._Rt[x] = got
        return got

    @cached_property
    def total(self) -> float:
        if not (self.left_integrable and self.right_integrable):
            return math.inf
        return self.L(self.anchor) + self.R(self.anchor)

    def mass(self, x: float, y: float) -> float:
        """Mass of [x, y] inside the interval; endpoints may equal the
        interval's own (possibly infinite) endpoints."""
        if y < x:
            raise ValueError(f"mass requires x <= y, got ({x}, {y})")
        at_left = x <= self.left
        at_right = y >= self.right
        if at_left and at_right:
            return self.total
        if at_left:
            return self.L(y)
        if at_right:
            return self.R(x)
        if x == y:
            return 0.0
        d = self.F(y) - self.F(x)
        if math.isinf(d) or math.isnan(d):
            return math.inf
        scale = max(abs(self.F(x)), abs(self.F(y)))
        if d < 1e-9 * scale:
            # the cumulative difference lost relative accuracy; integrate
            # the short span directly
            d = self._int(x, y)
        return max(d, 0.0)

    # -- interpolation table ----------------------------------------------

    @cached_property
    def table(self) -> _Table:
        n = TABLE_NODES
        xi = (np.arange(n) + 1.0) / (n + 1.0)
        xs = np.atleast_1d(self.map.x(xi))
        # one fixed Kronrod panel per cell; cells are narrow enough that the
        # panel is exact to machine precision for smooth densities
        from ._kernel_fallback import KRONROD_NODES, KRONROD_WEIGHTS

        lo = xs[:-1]
        hi = xs[1:]
        c = 0.5 * (lo + hi)
        hw = 0.5 * (hi - lo)
        pts = c[:, None] + hw[:, None] * KRONROD_NODES[None, :]
        vals = quadrature.eval_density(self.cd, pts.ravel()).reshape(pts.shape)
        cells = hw * (vals @ KRONROD_WEIGHTS)
        cells = np.maximum(cells, 0.0)
        # accumulate outward from the smallest cell: a left-anchored running
        # sum would let one overflowing tail cell poison the whole table,
        # while differences taken across a mid-table base stay exact wherever
        # the density is representable
        base = int(np.argmin(np.where(np.isnan(cells), np.inf, cells)))
        cum = np.empty(len(cells) + 1)
        cum[base] = 0.0
        cum[base + 1:] = np.cumsum(cells[base:])
        cum[:base] = -np.cumsum(cells[:base][::-1])[::-1]
        from_left = None
        from_right = None
        if self.left_integrable:
            l0 = self.L(float(xs[0]))
            if math.isfinite(l0) and math.isfinite(cum[0]):
                from_left = (l0 - cum[0]) + cum
        if self.right_integrable:
            r_last = self.R(float(xs[-1]))
            if math.isfinite(r_last) and math.isfinite(cum[-1]):
                from_right = r_last + (cum[-1] - cum)
        return _Table(xi=xi, xs=xs, cum=cum, from_left=from_left,
                      from_right=from_right)

    def approx_interior(self, x, y) -> np.ndarray:
        """Approximate mass of [x, y] for interior points, via the table."""
        t = self.table
        cx = np.interp(self.map.xi(np.asarray(x)), t.xi, t.cum)
        cy = np.interp(self.map.xi(np.asarray(y)), t.xi, t.cum)
        with np.errstate(invalid="ignore"):
            rel = cy - cx
            # both cumulatives past the same overflow horizon: the span
            # between the points is itself beyond float range
            rel = np.where(np.isnan(rel) & np.isinf(cx) & np.isinf(cy), np.inf, rel)
        return np.maximum(rel, 0.0)

    def approx_from_left(self, x) -> np.ndarray:
        t = self.table
        if t.from_left is None:
            raise NumericalError(f"{self.name}: left one-sided mass is infinite")
        return np.interp(self.map.xi(x), t.xi, t.from_left)

    def approx_from_right(self, x) -> np.ndarray:
        t = self.table
        if t.from_right is None:
            raise NumericalError(f"{self.name}: right one-sided mass is infinite")
        return np.interp(self.map.xi(x), t.xi, t.from_right)

    def approx_quantile_left(self, mass) -> np.ndarray:
        """Approximate x with L(x) = mass, via the table."""
        t = self.table
        if t.from_left is None:
            raise NumericalError(f"{self.name}: left one-sided mass is infinite")
        xi = np.interp(mass, t.from_left, t.xi)
        return self.map.x(xi)

    def approx_quantile_right(self, mass) -> np.ndarray:
        t = self.table
        if t.from_right is None:
            raise NumericalError(f"{self.name}: right one-sided mass is infinite")
        rev = t.from_right[::-1]
        xi = np.interp(mass, rev, t.xi[::-1])
        return self.map.x(xi)

    # -- exact quantiles ----------------------------------------------------

    def _solve_monotone(self, fn: Callable[[float], float], target: float,
                        xi_lo: float, xi_hi: float, increasing: bool,
                        tol: float | None = None) -> float:
        """Bracketed Illinois iteration for fn(x(xi)) = target in xi."""
        f_lo = fn(self.map.x(xi_lo)) - target
        f_hi = fn(self.map.x(xi_hi)) - target
        if not increasing:
            f_lo, f_hi = -f_lo, -f_hi
        # widen the bracket if interpolation error put the root outside
        widen = 0
        while f_lo > 0.0 and xi_lo > 1e-12:
            xi_lo = max(xi_lo * 0.5, 1e-12) if widen else max(xi_lo - (xi_hi - xi_lo), 1e-12)
            f_lo = fn(self.map.x(xi_lo)) - target
            if not increasing:
                f_lo = -f_lo
            widen += 1
            if widen > 90:
                raise NumericalError(f"{self.name}: quantile bracket failed (low side)")
        widen = 0
        while f_hi < 0.0 and xi_hi < 1.0 - 1e-12:
            xi_hi = min(xi_hi + (1.0 - xi_hi) * 0.5, 1.0 - 1e-12)
            f_hi = fn(self.map.x(xi_hi)) - target
            if not increasing:
                f_hi = -f_hi
            widen += 1
            if widen > 90:
                raise NumericalError(f"{self.name}: quantile bracket failed (high side)")
        if f_lo > 0.0:
            return self.map.x(xi_lo)  # target below the representable range
        if f_hi < 0.0:
            return self.map.x(xi_hi)  # target above the representable range
        if tol is None:
            tol = 1e-9 * abs(target) + 1e-13 * max(abs(target), 1.0)
        lo, hi = xi_lo, xi_hi
        side = 0
        for _ in range(200):
            if abs(f_lo) <= tol:
                return self.map.x(lo)
            if abs(f_hi) <= tol:
                return self.map.x(hi)
            if hi - lo <= 1e-16:
                break
            denom = f_hi - f_lo
            mid = 0.5 * (lo + hi) if denom == 0.0 else hi - f_hi * (hi - lo) / denom
            if not lo < mid < hi:
                mid = 0.5 * (lo + hi)
            f_mid = fn(self.map.x(mid)) - target
            if not increasing:
                f_mid = -f_mid
            if abs(f_mid) <= tol:
                return self.map.x(mid)
            if f_mid < 0.0:
                lo, f_lo = mid, f_mid
                if side == -1:
                    f_hi *= 0.5
                side = -1
            else:
                hi, f_hi = mid, f_mid
                if side == 1:
                    f_lo *= 0.5
                side = 1
        return self.map.x(0.5 * (lo + hi))

    def quantile_left(self, mass: float, tight: bool = False,
                      tol: float | None = None) -> float:
        """Exact x with mass of [left, x] = mass.

        The default residual tolerance mixes a relative and a small absolute
        term, which is too loose when mass is many orders below the total;
        pass an explicit tol (e.g. 1e-9 * mass) in that regime."""
        if not self.left_integrable:
            raise NumericalError(f"{self.name}: left one-sided mass is infinite")
        x0 = float(np.asarray(self.approx_quantile_left(mass)))
        xi0 = self.map.xi(x0)
        lo = max(xi0 - 2.5 / TABLE_NODES, 1e-12)
        hi = min(xi0 + 2.5 / TABLE_NODES, 1.0 - 1e-12)
        fn = self.L_tight if tight else self.L
        if tol is None:
            tol = 0.4e-12 * self.total if tight and math.isfinite(self.total) else None
        return self._solve_monotone(fn, mass, lo, hi, increasing=True, tol=tol)

    def quantile_right(self, mass: float, tight: bool = False,
                       tol: float | None = None) -> float:
        """Exact y with mass of [y, right] = mass."""
        if not self.right_integrable:
            raise NumericalError(f"{self.name}: right one-sided mass is infinite")
        x0 = float(np.asarray(self.approx_quantile_right(mass)))
        xi0 = self.map.xi(x0)
        lo = max(xi0 - 2.5 / TABLE_NODES, 1e-12)
        hi = min(xi0 + 2.5 / TABLE_NODES, 1.0 - 1e-12)
        fn = self.R_tight if tight else self.R
        if tol is None:
            tol = 0.4e-12 * self.total if tight and math.isfinite(self.total) else None
        return self._solve_monotone(fn, mass, lo, hi, increasing=False, tol=tol)

    def median_point(self) -> float:
        t = self.total
        if math.isinf(t):
            raise NumericalError(f"{self.name}: median undefined, total mass infinite")
        return self.quantile_left(0.5 * t, tight=True)


def _as_expr(e: Union[str, DensityExpr]) -> DensityExpr:
    return parse(e) if isinstance(e, str) else e


class WeightedInterval:
    """Interval with weight densities u and v and parameter bindings."""

    def __init__(self, left, right, u, v, params: dict | None = None):
        left = left.value if isinstance(left, Endpoint) else float(left)
        right = right.value if isinstance(right, Endpoint) else float(right)
        if not left < right:
            raise ValidationError(f"empty interval ({left}, {right})")
        if math.isnan(left) or math.isnan(right):
            raise ValidationError("interval endpoints must not be NaN")
        self.left = left
        self.right = right
        self.u_expr = _as_expr(u)
        self.v_expr = _as_expr(v)
        self.params = dict(params or {})
        try:
            self.u_cd = compile_density(self.u_expr, self.params)
            self.v_cd = compile_density(self.v_expr, self.params)
        except KeyError as exc:
            raise ValidationError(f"unbound parameter {exc}") from exc
        self._positivity_check()
        self.uside = _MassLedger(self.u_cd, left, right, "mu")
        self._systems: dict[float, MeasureSystem] = {}

    @property
    def endpoints(self) -> tuple[Endpoint, Endpoint]:
        return Endpoint(self.left), Endpoint(self.right)

    def _positivity_check(self) -> None:
        j = np.arange(POSITIVITY_PROBES)
        xi = 0.5 * (1.0 - np.cos(math.pi * (j + 0.5) / POSITIVITY_PROBES))
        xi = np.clip(xi, 1e-9, 1.0 - 1e-9)
        pts = np.atleast_1d(_CoordMap(self.left, self.right).x(xi))
        for name, cd in (("u", self.u_cd), ("v", self.v_cd)):
            try:
                vals = quadrature.eval_density(cd, pts)
            except Exception as exc:
                raise ValidationError(f"weight {name} failed to evaluate: {exc}") from exc
            if not np.all(np.isfinite(vals)):
                bad = pts[~np.isfinite(vals)][0]
                raise ValidationError(f"weight {name} is not finite at x={bad}")
            if np.any(vals < 0.0):
                bad = pts[vals < 0.0][0]
                raise ValidationError(f"weight {name} is not positive at x={bad}")
            pos = vals > 0.0
            if not pos.any():
                raise ValidationError(f"weight {name} vanishes on the probe grid")
            # exact zeros are tolerated only as contiguous runs touching the
            # ends (density underflow toward an endpoint), never interior
            first, last = int(np.argmax(pos)), len(pos) - 1 - int(np.argmax(pos[::-1]))
            if not pos[first : last + 1].all():
                bad = pts[first : last + 1][~pos[first : last + 1]][0]
                raise ValidationError(f"weight {name} vanishes at interior x={bad}")

    def system(self, p: float) -> "MeasureSystem":
        key = float(p)
        sys = self._systems.get(key)
        if sys is None:
            sys = MeasureSystem(self, key)
            self._systems[key] = sys
        return sys


class MeasureSystem:
    """The pair (u-ledger, h-ledger) for a fixed exponent p."""

    def __init__(self, w: WeightedInterval, p: float):
        if not 1.0 < p < math.inf:
            raise ValidationError(f"p must lie in (1, inf), got {p}")
        self.w = w
        self.p = p
        self.h_cd = compose_power(w.v_cd, -1.0 / (p - 1.0))
        self.uside = w.uside
        self.hside = _MassLedger(self.h_cd, w.left, w.right, f"nuhat(p={p:g})")

    @property
    def vanishing_degenerate(self) -> bool:
        """True when a one-sided dual mass is infinite, which disables the
        matched-point route (the two-sided objectives remain meaningful)."""
        return not (self.hside.left_integrable and self.hside.right_integrable)


# ---------------------------------------------------------------------------
# module-level operations


def _ext(value: float) -> ExtendedReal:
    if math.isinf(value):
        return ExtendedReal.infinite()
    return ExtendedReal.finite(value)


def h_density(w: WeightedInterval, p: float) -> Callable:
    """The dual density h = v^(-1/(p-1)) as a vectorized callable."""
    cd = w.system(p).h_cd
    return lambda x: quadrature.eval_density(cd, x)


def mu_mass(w: WeightedInterval, x: float, y: float) -> ExtendedReal:
    return _ext(w.uside.mass(x, y))


def nuhat_mass(w: WeightedInterval, p: float, x: float, y: float) -> ExtendedReal:
    return _ext(w.system(p).hside.mass(x, y))


def _ledger_for(w: WeightedInterval, balance) -> _MassLedger:
    if balance == "mu":
        return w.uside
    if isinstance(balance, tuple) and len(balance) == 2 and balance[0] == "nuhat":
        return w.system(balance[1]).hside
    raise ValidationError(f"balance must be 'mu' or ('nuhat', p), got {balance!r}")


def matching_point(w: WeightedInterval, balance, x: float) -> float:
    """The y with mass[left, x] = mass[y, right] for the selected measure.

    Decreasing in x; raises :class:`NumericalError` when a one-sided mass is
    infinite (no solution exists)."""
    ledger = _ledger_for(w, balance)
    if not ledger.right_integrable:
        raise NumericalError(f"{ledger.name}: right one-sided mass is infinite, no solution")
    m = ledger.L_tight(x)
    if math.isinf(m):
        raise NumericalError(f"{ledger.name}: left mass at x={x} is infinite, no solution")
    y = ledger.quantile_right(m, tight=True)
    resid = abs(ledger.R_tight(y) - m)
    tol = 1e-12 * ledger.total if math.isfinite(ledger.total) else 1e-12 * (2.0 * m)
    if not (resid <= max(tol, 1e-11 * m + 1e-300)):
        raise NumericalError(
            f"{ledger.name}: matching point residual {resid:.3e} exceeds tolerance"
        )
    return y


def median(w: WeightedInterval, balance) -> float:
    return _ledger_for(w, balance).median_point()
