"""Two-sided bounds for the Hardy-type inequality with vanishing boundary.

For weights u, v on an interval (L, R) and exponents 1 < p <= q < inf, the
optimal constant A in

    ||f||_{q,mu} <= A ||f'||_{p,nu},   f(L) = f(R) = 0,

is bracketed by computable quantities built from the measure mu = u dx and
the dual measure nuhat = v^{-1/(p-1)} dx:

* ``b_lower`` (B_*): a supremum over interior pairs x < y of
  mu[x,y]^{1/q} (nuhat[L,x]^{1-p} + nuhat[y,R]^{1-p})^{-1/p}; always a lower
  bound for A.
* ``b_star`` (B*): the analogous supremum with exponents q(1-p)/p inside and
  -1/q outside; k_{q,p} B* is an upper bound for A.
* ``h_o``: a one-dimensional supremum along the nuhat-balanced matched path,
  available when nuhat has finite total mass.
* ``h_partial``: the supremum of limiting values of the B_* integrand toward
  infinite endpoints carrying infinite mu-mass (the finiteness criterion:
  the inequality holds iff h_o v h_partial is finite).

Each supremum is computed over mass coordinates with a grid + simplex
refinement, followed by exact re-evaluation of the candidates, and boundary
limits are classified with geometric-ladder probes so that a divergent
supremum is reported as an infinite classification rather than a large
number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import k_general
from .extreal import ExtendedReal, ext_max
from .measure import (
    Exponents,
    MeasureSystem,
    NumericalError,
    ValidationError,
    WeightedInterval,
)
from .search import (
    LimitProbe,
    edge_probes,
    iterated_probes,
    mass_triangle_sup,
    probe_sequence,
)

__all__ = [
    "BoundReport",
    "H_O_DISABLED",
    "objective_bstar",
    "objective_blower",
    "compute_b_star",
    "compute_b_lower",
    "compute_h_o",
    "compute_h_partial",
    "vanishing_report",
]

_SEED_XI = (0.12, 0.3, 0.5, 0.7, 0.88)

#: Marker returned by :func:`compute_h_o` when the matched-point route is
#: unavailable because a one-sided dual mass is infinite.
H_O_DISABLED = ExtendedReal.unknown(math.nan)


@dataclass(frozen=True)
class BoundReport:
    """All bound ingredients for one weighted interval and one (p, q)."""

    p: float
    q: float
    b_star: ExtendedReal
    b_lower: ExtendedReal
    h_o: ExtendedReal
    h_partial: ExtendedReal
    k: float
    lower: ExtendedReal
    upper: ExtendedReal
    upper_alt: ExtendedReal
    holds: str
    argmax: tuple[float, float] | None
    diagnostics: tuple[str, ...]


# ---------------------------------------------------------------------------
# pointwise objectives


def _blower_value(mu: float, a: float, b: float, p: float, q: float) -> float:
    # mu^{1/q} (a^{1-p} + b^{1-p})^{-1/p}; an infinite one-sided mass drops
    # out of the bracket (inf^{1-p} = 0), a zero mass kills the value
    if math.isnan(a) or math.isnan(b) or math.isnan(mu):
        return math.nan
    ta = math.inf if a == 0.0 else a ** (1.0 - p)
    tb = math.inf if b == 0.0 else b ** (1.0 - p)
    s = ta + tb
    if s == 0.0:
        return math.inf if mu > 0.0 else 0.0
    if math.isinf(s) or mu == 0.0:
        return 0.0
    if math.isinf(mu):
        return math.inf
    return mu ** (1.0 / q) * s ** (-1.0 / p)


def _bstar_value(mu: float, a: float, b: float, p: float, q: float) -> float:
    c = q * (1.0 - p) / p
    if math.isnan(a) or math.isnan(b) or math.isnan(mu):
        return math.nan
    ta = math.inf if a == 0.0 else a**c
    tb = math.inf if b == 0.0 else b**c
    s = ta + tb
    if s == 0.0:
        return math.inf if mu > 0.0 else 0.0
    if math.isinf(s) or mu == 0.0:
        return 0.0
    if math.isinf(mu):
        return math.inf
    return mu ** (1.0 / q) * s ** (-1.0 / q)


_MASS_FLOOR = 1e-300  # below this an interior one-sided mass is underflow noise


def _one_sided(sysm: MeasureSystem, x: float, y: float) -> tuple[float, float, float]:
    """(mu[x,y], nuhat[L,x], nuhat[y,R]) with endpoint and infinity handling.

    A positive one-sided mass that underflows to (near) zero at an interior
    point comes back NaN: reporting it as zero would flip the bracket term to
    infinity and silently zero the objective, corrupting boundary-limit
    classification."""
    w = sysm.w
    hs = sysm.hside
    a = 0.0 if x <= w.left else (hs.L(x) if hs.left_integrable else math.inf)
    b = 0.0 if y >= w.right else (hs.R(y) if hs.right_integrable else math.inf)
    if x > w.left and 0.0 <= a < _MASS_FLOOR:
        a = math.nan
    if y < w.right and 0.0 <= b < _MASS_FLOOR:
        b = math.nan
    return sysm.uside.mass(x, y), a, b


def _check_pair(w: WeightedInterval, x: float, y: float) -> None:
    if math.isnan(x) or math.isnan(y):
        raise ValidationError("evaluation point is NaN")
    if not (w.left <= x <= y <= w.right):
        raise ValidationError(
            f"points must satisfy {w.left} <= x <= y <= {w.right}, got ({x}, {y})"
        )


def objective_bstar(w: WeightedInterval, p: float, q: float, x: float, y: float) -> float:
    """The B* integrand at one pair x <= y."""
    Exponents(p, q)
    _check_pair(w, x, y)
    if x == y:
        return 0.0
    mu, a, b = _one_sided(w.system(p), x, y)
    return _bstar_value(mu, a, b, p, q)


def objective_blower(w: WeightedInterval, p: float, q: float, x: float, y: float) -> float:
    """The B_* integrand at one pair x <= y."""
    Exponents(p, q)
    _check_pair(w, x, y)
    if x == y:
        return 0.0
    mu, a, b = _one_sided(w.system(p), x, y)
    return _blower_value(mu, a, b, p, q)


# ---------------------------------------------------------------------------
# matched-path supremum (h_o)


@dataclass(frozen=True)
class _HODetail:
    ext: ExtendedReal
    argmax: tuple[float, float] | None
    probe: LimitProbe | None
    disabled: bool


def _quad_polish_1d(fn, s0: float, h: float, lo: float, hi: float) -> tuple[float, float]:
    """One parabola fit through (s0-h, s0, s0+h), then the vertex; returns the
    best (s, fn(s)) seen."""
    s0 = min(max(s0, lo + h), hi - h) if hi - lo > 2.0 * h else 0.5 * (lo + hi)
    cand = [s0 - h, s0, s0 + h]
    vals = [fn(s) for s in cand]
    if all(math.isfinite(v) for v in vals):
        denom = vals[0] - 2.0 * vals[1] + vals[2]
        if denom < 0.0:
            vertex = s0 + 0.5 * h * (vals[0] - vals[2]) / denom
            vertex = min(max(vertex, lo), hi)
            cand.append(vertex)
            vals.append(fn(vertex))
    i = max(range(len(cand)), key=lambda j: vals[j])
    return cand[i], vals[i]


def _h_o_detail(w: WeightedInterval, p: float, q: float) -> _HODetail:
    sysm = w.system(p)
    if sysm.vanishing_degenerate:
        return _HODetail(H_O_DISABLED, None, None, disabled=True)
    hs, us = sysm.hside, sysm.uside
    T = hs.total
    scale = 2.0 ** (-1.0 / p)
    n = 96
    sv = 0.5 * (np.arange(n) + 1.0) / n  # mass fractions in (0, 1/2]
    am = sv * T
    with np.errstate(all="ignore"):
        xs = np.asarray(hs.approx_quantile_left(am))
        ys = np.asarray(hs.approx_quantile_right(am))
        mu = np.asarray(us.approx_interior(xs, ys))
        vals = scale * mu ** (1.0 / q) * am ** ((p - 1.0) / p)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    i0 = int(np.argmax(vals))

    pair_of: dict[float, tuple[float, float]] = {}

    def integrand_at_mass(s: float) -> float:
        a = s * T
        try:
            x = hs.quantile_left(a, tol=1e-9 * a)
            y = hs.quantile_right(a, tol=1e-9 * a)
        except NumericalError:
            return -math.inf
        if y < x:  # quantiles can invert by one ulp at the median
            return 0.0
        pair_of[s] = (x, y)
        m = us.mass(x, y)
        if math.isinf(m):
            return math.inf
        return scale * m ** (1.0 / q) * a ** ((p - 1.0) / p)

    s_best, v_best = _quad_polish_1d(
        integrand_at_mass, float(sv[i0]), 0.5 / n, float(sv[0]), 0.5
    )
    argmax = pair_of.get(s_best)

    probe_pairs: dict[float, tuple[float, float]] = {}
    y_cap = hs.map.x(1.0 - 1e-12)

    def integrand_at_x(x: float) -> float:
        a = hs.L(x)
        if a <= 0.0:
            return 0.0
        y = hs.quantile_right(a, tol=1e-9 * a)
        if y >= y_cap:
            # the balancing point left the representable range; cut the
            # ladder here and classify on the clean prefix
            return math.nan
        probe_pairs[x] = (x, y)
        m = us.mass(x, y)
        if math.isinf(m):
            return math.inf
        return scale * m ** (1.0 / q) * a ** ((p - 1.0) / p)

    probe = probe_sequence(
        integrand_at_x, w.left, float(xs[0]),
        direction=f"matched path, x->{w.left:g}",
    )
    sample_best = -math.inf
    sample_pair = None
    for (px, pv) in probe.samples:
        if math.isfinite(pv) and pv > sample_best:
            sample_best = pv
            sample_pair = probe_pairs.get(px)

    components = [probe.as_extended()]
    if math.isfinite(v_best):
        components.append(ExtendedReal.finite(v_best))
    elif math.isinf(v_best) and v_best > 0:
        components.append(ExtendedReal.infinite())
    if math.isfinite(sample_best):
        components.append(ExtendedReal.finite(sample_best))
    ext = ext_max(*components)

    best_pair = argmax
    if math.isfinite(sample_best) and sample_best > (v_best if math.isfinite(v_best) else -math.inf):
        best_pair = sample_pair
    return _HODetail(ext, best_pair, probe, disabled=False)


def compute_h_o(w: WeightedInterval, p: float, q: float) -> ExtendedReal:
    """Matched-path supremum 2^{-1/p} sup mu[x, y(x)]^{1/q} nuhat[L,x]^{(p-1)/p}
    over x up to the nuhat-median, where y(x) balances the one-sided nuhat
    masses.  Returns :data:`H_O_DISABLED` when nuhat has infinite total mass."""
    Exponents(p, q)
    return _h_o_detail(w, p, q).ext


# ---------------------------------------------------------------------------
# boundary limits (h_partial)


def _objective_fn2(sysm: MeasureSystem, value_scalar, p: float, q: float):
    def fn2(x: float, y: float) -> float:
        if y <= x:
            return math.nan
        mu, a, b = _one_sided(sysm, x, y)
        return value_scalar(mu, a, b, p, q)

    return fn2


def _h_partial_detail(
    w: WeightedInterval, p: float, q: float
) -> tuple[ExtendedReal, list[LimitProbe], list[str]]:
    sysm = w.system(p)
    us = sysm.uside
    if math.isfinite(w.left) and math.isfinite(w.right):
        return ExtendedReal.zero(), [], []
    notes: list[str] = []
    fn2 = _objective_fn2(sysm, _blower_value, p, q)
    probe_left = math.isinf(w.left) and not us.left_integrable
    probe_right = math.isinf(w.right) and not us.right_integrable
    if not (probe_left or probe_right):
        return ExtendedReal.zero(), [], []
    seeds = [sysm.hside.map.x(xi) for xi in _SEED_XI]
    probes = edge_probes(fn2, w.left, w.right, seeds, probe_left, probe_right)
    if math.isinf(w.left) and math.isinf(w.right):
        iterated = iterated_probes(fn2, us.anchor)
        probes.extend(iterated)
        fin = [pr for pr in iterated if pr.classification == "finite"]
        if len(fin) == 2:
            l1, l2 = fin[0].limit, fin[1].limit
            if abs(l1 - l2) > 1e-6 * max(abs(l1), abs(l2), 1e-300):
                notes.append(
                    f"iterated limit orders disagree ({l1:.6g} vs {l2:.6g}); "
                    "taking the larger"
                )
        cls = {pr.classification for pr in iterated}
        if len(cls) > 1 and "unknown" not in cls:
            notes.append("iterated limit orders classify differently")
    for pr in probes:
        if pr.classification == "unknown":
            notes.append(f"boundary probe inconclusive along {pr.direction}")
    ext = ext_max(*[pr.as_extended() for pr in probes])
    return ext, probes, notes


def compute_h_partial(w: WeightedInterval, p: float, q: float) -> ExtendedReal:
    """Supremum of limiting values of the B_* integrand toward infinite
    endpoints with infinite adjacent mu-mass; zero when no such endpoint
    exists (in particular on bounded intervals)."""
    Exponents(p, q)
    return _h_partial_detail(w, p, q)[0]


# ---------------------------------------------------------------------------
# two-sided suprema (b_star, b_lower)


@dataclass(frozen=True)
class _SupDetail:
    ext: ExtendedReal
    argmax: tuple[float, float] | None
    notes: tuple[str, ...]


def _matrix_value(which: str, mu, a, b, p: float, q: float):
    if which == "b_star":
        c = q * (1.0 - p) / p
        br = np.power(a, c) + np.power(b, c)
        return np.power(mu, 1.0 / q) * np.power(br, -1.0 / q)
    br = np.power(a, 1.0 - p) + np.power(b, 1.0 - p)
    return np.power(mu, 1.0 / q) * np.power(br, -1.0 / p)


def _sup_detail(
    w: WeightedInterval,
    p: float,
    q: float,
    which: str,
    inject_pairs: tuple = (),
    inject_values: tuple = (),
) -> _SupDetail:
    sysm = w.system(p)
    hs, us = sysm.hside, sysm.uside
    value_scalar = _bstar_value if which == "b_star" else _blower_value
    tu = us.table

    if not sysm.vanishing_degenerate:
        T = hs.total

        def approx_matrix(S, Tm):
            svec = S[:, 0]
            tvec = Tm[0, :]
            xs = np.asarray(hs.approx_quantile_left(svec * T))
            ys = np.asarray(hs.approx_quantile_right(tvec * T))
            cu = np.interp(us.map.xi(xs), tu.xi, tu.cum)
            cy = np.interp(us.map.xi(ys), tu.xi, tu.cum)
            mu = np.maximum(cy[None, :] - cu[:, None], 0.0)
            return _matrix_value(which, mu, (svec * T)[:, None], (tvec * T)[None, :], p, q)

        def approx_scalar(s: float, t: float) -> float:
            a = s * T
            b = t * T
            x = float(np.asarray(hs.approx_quantile_left(a)))
            y = float(np.asarray(hs.approx_quantile_right(b)))
            if y <= x:
                return -math.inf
            mu = float(np.asarray(us.approx_interior(x, y)))
            return value_scalar(mu, a, b, p, q)

        def exact_fn(s: float, t: float) -> tuple[float, dict]:
            try:
                x = hs.quantile_left(s * T)
                y = hs.quantile_right(t * T)
            except NumericalError:
                return math.nan, {}
            if y < x:
                return 0.0, {"x": x, "y": y}
            mu, a, b = _one_sided(sysm, x, y)
            return value_scalar(mu, a, b, p, q), {"x": x, "y": y}

    else:
        # a one-sided dual mass is infinite: mass coordinates collapse, so
        # the grid runs in the compactified raw coordinate instead
        m = hs.map
        th = hs.table

        def approx_matrix(S, Tm):
            svec = S[:, 0]
            tvec = Tm[0, :]
            if hs.left_integrable:
                av = np.interp(svec, th.xi, th.from_left)
            else:
                av = np.full(svec.shape, math.inf)
            if hs.right_integrable:
                bv = np.interp(1.0 - tvec, th.xi, th.from_right)
            else:
                bv = np.full(tvec.shape, math.inf)
            cu = np.interp(svec, tu.xi, tu.cum)
            cy = np.interp(1.0 - tvec, tu.xi, tu.cum)
            mu = np.maximum(cy[None, :] - cu[:, None], 0.0)
            return _matrix_value(which, mu, av[:, None], bv[None, :], p, q)

        def approx_scalar(s: float, t: float) -> float:
            xi_y = 1.0 - t
            if xi_y <= s:
                return -math.inf
            a = float(np.interp(s, th.xi, th.from_left)) if hs.left_integrable else math.inf
            b = float(np.interp(xi_y, th.xi, th.from_right)) if hs.right_integrable else math.inf
            mu = float(np.interp(xi_y, tu.xi, tu.cum) - np.interp(s, tu.xi, tu.cum))
            return value_scalar(max(mu, 0.0), a, b, p, q)

        def exact_fn(s: float, t: float) -> tuple[float, dict]:
            x = m.x(s)
            y = m.x(1.0 - t)
            if y <= x:
                return 0.0, {"x": x, "y": y}
            mu, a, b = _one_sided(sysm, x, y)
            return value_scalar(mu, a, b, p, q), {"x": x, "y": y}

    sup = mass_triangle_sup(approx_matrix, approx_scalar, exact_fn)
    notes: list[str] = []
    if sup.stale:
        notes.append(f"{which}: simplex refinement did not converge; best value kept")

    point_cands: list[tuple[float, float, float]] = []
    divergent = sup.migrated
    if math.isfinite(sup.value) and sup.payload:
        point_cands.append((sup.value, sup.payload["x"], sup.payload["y"]))

    fn2 = _objective_fn2(sysm, value_scalar, p, q)
    for x, y, note in inject_pairs:
        try:
            _check_pair(w, x, y)
            v = fn2(x, y) if x < y else 0.0
        except (ValidationError, NumericalError):
            continue
        if math.isinf(v) and v > 0:
            divergent = True
            notes.append(f"{which}: diverges at injected point ({note})")
        elif math.isfinite(v):
            point_cands.append((v, x, y))

    value_cands: list[float] = []
    for v, note in inject_values:
        if math.isinf(v) and v > 0:
            divergent = True
            notes.append(f"{which}: diverges along {note}")
        elif math.isfinite(v):
            value_cands.append(v)

    probe_l = math.isinf(w.left) or not us.left_integrable or not hs.left_integrable
    probe_r = math.isinf(w.right) or not us.right_integrable or not hs.right_integrable
    probes: list[LimitProbe] = []
    if probe_l or probe_r:
        seeds = [hs.map.x(xi) for xi in _SEED_XI]
        probes = edge_probes(fn2, w.left, w.right, seeds, probe_l, probe_r)
        if math.isinf(w.left) and math.isinf(w.right):
            probes.extend(iterated_probes(fn2, us.anchor))
    for pr in probes:
        if pr.classification == "infinite":
            notes.append(f"{which}: diverges along {pr.direction}")
        elif pr.classification == "unknown":
            notes.append(f"{which}: boundary probe inconclusive along {pr.direction}")

    point_cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    components: list[ExtendedReal] = [pr.as_extended() for pr in probes]
    if point_cands:
        components.append(ExtendedReal.finite(point_cands[0][0]))
    components.extend(ExtendedReal.finite(v) for v in value_cands)
    if divergent:
        components.append(ExtendedReal.infinite())
    ext = ext_max(*components) if components else ExtendedReal.zero()

    argmax = (point_cands[0][1], point_cands[0][2]) if point_cands else None
    if (
        ext.classification == "finite"
        and point_cands
        and ext.value > point_cands[0][0] * (1.0 + 1e-12)
    ):
        notes.append(
            f"{which}: supremum approached at the boundary; argmax is the best interior point"
        )
    return _SupDetail(ext, argmax, tuple(notes))


def _h_o_injections(hd: _HODetail, star_scale: float) -> tuple[tuple, tuple]:
    """Candidate points/values that transfer the matched-path supremum into
    the two-sided objectives (the objectives evaluate to the integrand, up to
    the fixed factor, at nuhat-balanced pairs)."""
    pairs = []
    values = []
    if hd.argmax is not None:
        pairs.append((hd.argmax[0], hd.argmax[1], "matched-path argmax"))
    if hd.probe is not None and hd.probe.classification == "finite":
        values.append((star_scale * hd.probe.limit, "matched path toward the left endpoint"))
    if hd.probe is not None and hd.probe.classification == "infinite":
        values.append((math.inf, "matched path toward the left endpoint"))
    return tuple(pairs), tuple(values)


def compute_b_star(
    w: WeightedInterval, p: float, q: float
) -> tuple[ExtendedReal, tuple[float, float] | None]:
    """Global supremum of the B* integrand (with boundary limits)."""
    Exponents(p, q)
    hd = _h_o_detail(w, p, q)
    pairs, values = _h_o_injections(hd, 2.0 ** (1.0 / p - 1.0 / q))
    det = _sup_detail(w, p, q, "b_star", pairs, values)
    return det.ext, det.argmax


def compute_b_lower(
    w: WeightedInterval, p: float, q: float
) -> tuple[ExtendedReal, tuple[float, float] | None]:
    """Global supremum of the B_* integrand (with boundary limits)."""
    Exponents(p, q)
    hd = _h_o_detail(w, p, q)
    pairs, values = _h_o_injections(hd, 1.0)
    det = _sup_detail(w, p, q, "b_lower", pairs, values)
    return det.ext, det.argmax


# ---------------------------------------------------------------------------
# assembled report


def vanishing_report(w: WeightedInterval, p: float, q: float) -> BoundReport:
    """Compute every bound ingredient and the finiteness criterion."""
    Exponents(p, q)
    if q < p:
        raise ValidationError(f"vanishing bounds require p <= q, got p={p}, q={q}")

    notes: list[str] = []
    hd = _h_o_detail(w, p, q)
    if hd.disabled:
        notes.append(
            "h_o disabled: a one-sided dual mass is infinite (matched path unavailable)"
        )
    elif hd.probe is not None and hd.probe.classification == "unknown":
        notes.append("h_o: matched-path probe inconclusive at the left endpoint")
    hp_ext, _, hp_notes = _h_partial_detail(w, p, q)
    notes.extend(hp_notes)

    pairs_star, values_star = _h_o_injections(hd, 2.0 ** (1.0 / p - 1.0 / q))
    pairs_low, values_low = _h_o_injections(hd, 1.0)
    star = _sup_detail(w, p, q, "b_star", pairs_star, values_star)
    low = _sup_detail(w, p, q, "b_lower", pairs_low, values_low)
    notes.extend(star.notes)
    notes.extend(low.notes)

    k = k_general(p, q).value
    k_pp = k_general(p, p).value

    if hd.disabled:
        criterion = star.ext
        notes.append("finiteness criterion taken from b_star (h_o unavailable)")
    else:
        criterion = ext_max(hd.ext, hp_ext)
    if criterion.is_finite:
        holds = "yes"
    elif criterion.is_infinite:
        holds = "no"
    else:
        holds = "unknown"

    return BoundReport(
        p=p,
        q=q,
        b_star=star.ext,
        b_lower=low.ext,
        h_o=hd.ext,
        h_partial=hp_ext,
        k=k,
        lower=low.ext,
        upper=star.ext.scaled(k),
        upper_alt=low.ext.scaled(k_pp),
        holds=holds,
        argmax=star.argmax,
        diagnostics=tuple(notes),
    )
