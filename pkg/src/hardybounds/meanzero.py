"""Bounds for the Hardy-type inequality with the mean subtracted.

Here the test functions need not vanish at the boundary; instead f is
recentered by its average against the probability measure pi obtained by
normalizing mu, which requires mu to have finite total mass.  The optimal
constant A in

    ||f - pi(f)||_{q,mu} <= A ||f'||_{p,nu}

is bracketed by suprema dual to the vanishing-boundary ones: the bracket now
combines the one-sided mu-masses with exponents 1/(1-q) (for B_*) or
p/((1-p)q) (for B*), and the interior factor is the dual mass
nuhat[x,y]^{(p-1)/p}.  The matched path for ``h_o`` balances the one-sided
mu-masses up to the mu-median, and ``h_partial`` probes boundary limits where
a one-sided nuhat mass is infinite.

The proven upper bound k_{2,p} B* covers 1 < p <= 2 <= q only; outside that
range the report carries no upper field and says so in the diagnostics.
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
from .vanishing import _check_pair, _quad_polish_1d

__all__ = [
    "MeanZeroReport",
    "objective_bstar_mz",
    "objective_blower_mz",
    "compute_h_o_mz",
    "compute_h_partial_mz",
    "compute_mz_bounds",
]

_SEED_XI = (0.12, 0.3, 0.5, 0.7, 0.88)


@dataclass(frozen=True)
class MeanZeroReport:
    """Bound ingredients for the mean-zero inequality on one weighted interval.

    ``upper`` is populated only when ``upper_valid`` (1 < p <= 2 <= q); there
    is no alternate upper route in the mean-zero setting, so ``upper_alt`` is
    always None."""

    p: float
    q: float
    b_star: ExtendedReal
    b_lower: ExtendedReal
    h_o: ExtendedReal
    h_partial: ExtendedReal
    k: float
    lower: ExtendedReal
    upper: ExtendedReal | None
    upper_alt: None
    upper_valid: bool
    pi_total: float
    holds: str
    argmax: tuple[float, float] | None
    diagnostics: tuple[str, ...]


# ---------------------------------------------------------------------------
# pointwise objectives


def _mz_blower_value(nu: float, m_l: float, m_r: float, p: float, q: float) -> float:
    # [mL^{1/(1-q)} + mR^{1/(1-q)}]^{(1-q)/q} nu^{(p-1)/p}
    if math.isnan(m_l) or math.isnan(m_r) or math.isnan(nu):
        return math.nan
    ta = math.inf if m_l == 0.0 else m_l ** (1.0 / (1.0 - q))
    tb = math.inf if m_r == 0.0 else m_r ** (1.0 / (1.0 - q))
    s = ta + tb
    if s == 0.0:
        return math.inf if nu > 0.0 else 0.0
    if math.isinf(s) or nu == 0.0:
        return 0.0
    if math.isinf(nu):
        return math.inf
    return s ** ((1.0 - q) / q) * nu ** ((p - 1.0) / p)


def _mz_bstar_value(nu: float, m_l: float, m_r: float, p: float, q: float) -> float:
    c = p / ((1.0 - p) * q)
    if math.isnan(m_l) or math.isnan(m_r) or math.isnan(nu):
        return math.nan
    ta = math.inf if m_l == 0.0 else m_l**c
    tb = math.inf if m_r == 0.0 else m_r**c
    s = ta + tb
    if s == 0.0:
        return math.inf if nu > 0.0 else 0.0
    if math.isinf(s) or nu == 0.0:
        return 0.0
    if math.isinf(nu):
        return math.inf
    return s ** ((1.0 - p) / p) * nu ** ((p - 1.0) / p)


_MASS_FLOOR = 1e-300  # below this an interior one-sided mass is underflow noise


def _mz_one_sided(sysm: MeasureSystem, x: float, y: float) -> tuple[float, float, float]:
    """(nuhat[x,y], mu[L,x], mu[y,R]) with endpoint handling.

    A positive mu-mass that underflows at an interior point comes back NaN;
    a literal zero would flip its bracket term to infinity and silently zero
    the objective, corrupting boundary-limit classification."""
    w = sysm.w
    us = sysm.uside
    m_l = 0.0 if x <= w.left else us.L(x)
    m_r = 0.0 if y >= w.right else us.R(y)
    if x > w.left and 0.0 <= m_l < _MASS_FLOOR:
        m_l = math.nan
    if y < w.right and 0.0 <= m_r < _MASS_FLOOR:
        m_r = math.nan
    return sysm.hside.mass(x, y), m_l, m_r


def _require_finite_mu(w: WeightedInterval) -> float:
    total = w.uside.total
    if not math.isfinite(total):
        raise ValidationError(
            "mean-zero bounds require finite total mu-mass (the recentering "
            "measure is mu normalized)"
        )
    return total


def objective_bstar_mz(w: WeightedInterval, p: float, q: float, x: float, y: float) -> float:
    """The mean-zero B* integrand at one pair x <= y."""
    Exponents(p, q)
    _require_finite_mu(w)
    _check_pair(w, x, y)
    if x == y:
        return 0.0
    nu, m_l, m_r = _mz_one_sided(w.system(p), x, y)
    return _mz_bstar_value(nu, m_l, m_r, p, q)


def objective_blower_mz(w: WeightedInterval, p: float, q: float, x: float, y: float) -> float:
    """The mean-zero B_* integrand at one pair x <= y."""
    Exponents(p, q)
    _require_finite_mu(w)
    _check_pair(w, x, y)
    if x == y:
        return 0.0
    nu, m_l, m_r = _mz_one_sided(w.system(p), x, y)
    return _mz_blower_value(nu, m_l, m_r, p, q)


# ---------------------------------------------------------------------------
# matched-path supremum (mu-balanced)


@dataclass(frozen=True)
class _HODetail:
    ext: ExtendedReal
    argmax: tuple[float, float] | None
    probe: LimitProbe | None


def _h_o_mz_detail(w: WeightedInterval, p: float, q: float) -> _HODetail:
    sysm = w.system(p)
    us, hs = sysm.uside, sysm.hside
    T = us.total
    scale = 2.0 ** (1.0 / q - 1.0)
    n = 96
    sv = 0.5 * (np.arange(n) + 1.0) / n
    am = sv * T
    with np.errstate(all="ignore"):
        xs = np.asarray(us.approx_quantile_left(am))
        ys = np.asarray(us.approx_quantile_right(am))
        nu = np.asarray(hs.approx_interior(xs, ys))
        vals = scale * am ** (1.0 / q) * nu ** ((p - 1.0) / p)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    i0 = int(np.argmax(vals))

    pair_of: dict[float, tuple[float, float]] = {}

    def integrand_at_mass(s: float) -> float:
        m = s * T
        try:
            x = us.quantile_left(m, tol=1e-9 * m)
            y = us.quantile_right(m, tol=1e-9 * m)
        except NumericalError:
            return -math.inf
        if y < x:  # quantiles can invert by one ulp at the median
            return 0.0
        pair_of[s] = (x, y)
        d = hs.mass(x, y)
        if math.isinf(d):
            return math.inf
        return scale * m ** (1.0 / q) * d ** ((p - 1.0) / p)

    s_best, v_best = _quad_polish_1d(
        integrand_at_mass, float(sv[i0]), 0.5 / n, float(sv[0]), 0.5
    )
    argmax = pair_of.get(s_best)

    probe_pairs: dict[float, tuple[float, float]] = {}
    y_cap = us.map.x(1.0 - 1e-12)

    def integrand_at_x(x: float) -> float:
        m = us.L(x)
        if m <= 0.0:
            return 0.0
        y = us.quantile_right(m, tol=1e-9 * m)
        if y >= y_cap or y < x:
            return math.nan
        probe_pairs[x] = (x, y)
        d = hs.mass(x, y)
        if math.isinf(d):
            return math.inf
        return scale * m ** (1.0 / q) * d ** ((p - 1.0) / p)

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
    return _HODetail(ext, best_pair, probe)


def compute_h_o_mz(w: WeightedInterval, p: float, q: float) -> ExtendedReal:
    """Matched-path supremum 2^{1/q-1} sup mu[L,x]^{1/q} nuhat[x,y(x)]^{(p-1)/p}
    over x up to the mu-median, where y(x) balances the one-sided mu-masses."""
    Exponents(p, q)
    _require_finite_mu(w)
    return _h_o_mz_detail(w, p, q).ext


# ---------------------------------------------------------------------------
# boundary limits


def _mz_fn2(sysm: MeasureSystem, value_scalar, p: float, q: float):
    def fn2(x: float, y: float) -> float:
        if y <= x:
            return math.nan
        nu, m_l, m_r = _mz_one_sided(sysm, x, y)
        return value_scalar(nu, m_l, m_r, p, q)

    return fn2


def _h_partial_mz_detail(
    w: WeightedInterval, p: float, q: float
) -> tuple[ExtendedReal, list[LimitProbe], list[str]]:
    sysm = w.system(p)
    hs = sysm.hside
    notes: list[str] = []
    components: list[ExtendedReal] = []
    fn2 = _mz_fn2(sysm, _mz_blower_value, p, q)

    probe_left = probe_right = False
    if not hs.left_integrable:
        if math.isinf(w.left):
            probe_left = True
        else:
            components.append(ExtendedReal.unknown(math.nan))
            notes.append(
                "infinite one-sided dual mass at the finite left endpoint: "
                "boundary limit not classified"
            )
    if not hs.right_integrable:
        if math.isinf(w.right):
            probe_right = True
        else:
            components.append(ExtendedReal.unknown(math.nan))
            notes.append(
                "infinite one-sided dual mass at the finite right endpoint: "
                "boundary limit not classified"
            )
    probes: list[LimitProbe] = []
    if probe_left or probe_right:
        seeds = [hs.map.x(xi) for xi in _SEED_XI]
        probes = edge_probes(fn2, w.left, w.right, seeds, probe_left, probe_right)
        if math.isinf(w.left) and math.isinf(w.right):
            iterated = iterated_probes(fn2, sysm.uside.anchor)
            probes.extend(iterated)
            fin = [pr for pr in iterated if pr.classification == "finite"]
            if len(fin) == 2:
                l1, l2 = fin[0].limit, fin[1].limit
                if abs(l1 - l2) > 1e-6 * max(abs(l1), abs(l2), 1e-300):
                    notes.append(
                        f"iterated limit orders disagree ({l1:.6g} vs {l2:.6g}); "
                        "taking the larger"
                    )
    for pr in probes:
        if pr.classification == "unknown":
            notes.append(f"boundary probe inconclusive along {pr.direction}")
    components.extend(pr.as_extended() for pr in probes)
    if not components:
        return ExtendedReal.zero(), [], notes
    return ext_max(*components), probes, notes


def compute_h_partial_mz(w: WeightedInterval, p: float, q: float) -> ExtendedReal:
    """Supremum of limiting values of the mean-zero B_* integrand where a
    one-sided dual mass is infinite; zero when no such side exists."""
    Exponents(p, q)
    _require_finite_mu(w)
    return _h_partial_mz_detail(w, p, q)[0]


# ---------------------------------------------------------------------------
# two-sided suprema


@dataclass(frozen=True)
class _SupDetail:
    ext: ExtendedReal
    argmax: tuple[float, float] | None
    notes: tuple[str, ...]


def _mz_matrix_value(which: str, nu, m_l, m_r, p: float, q: float):
    if which == "b_star":
        c = p / ((1.0 - p) * q)
        outer = (1.0 - p) / p
    else:
        c = 1.0 / (1.0 - q)
        outer = (1.0 - q) / q
    br = np.power(m_l, c) + np.power(m_r, c)
    return np.power(br, outer) * np.power(nu, (p - 1.0) / p)


def _mz_sup_detail(
    w: WeightedInterval,
    p: float,
    q: float,
    which: str,
    inject_pairs: tuple = (),
    inject_values: tuple = (),
) -> _SupDetail:
    sysm = w.system(p)
    us, hs = sysm.uside, sysm.hside
    value_scalar = _mz_bstar_value if which == "b_star" else _mz_blower_value
    T = us.total
    th = hs.table

    def approx_matrix(S, Tm):
        svec = S[:, 0]
        tvec = Tm[0, :]
        xs = np.asarray(us.approx_quantile_left(svec * T))
        ys = np.asarray(us.approx_quantile_right(tvec * T))
        cu = np.interp(hs.map.xi(xs), th.xi, th.cum)
        cy = np.interp(hs.map.xi(ys), th.xi, th.cum)
        nu = np.maximum(cy[None, :] - cu[:, None], 0.0)
        return _mz_matrix_value(which, nu, (svec * T)[:, None], (tvec * T)[None, :], p, q)

    def approx_scalar(s: float, t: float) -> float:
        m_l = s * T
        m_r = t * T
        x = float(np.asarray(us.approx_quantile_left(m_l)))
        y = float(np.asarray(us.approx_quantile_right(m_r)))
        if y <= x:
            return -math.inf
        nu = float(np.asarray(hs.approx_interior(x, y)))
        return value_scalar(nu, m_l, m_r, p, q)

    def exact_fn(s: float, t: float) -> tuple[float, dict]:
        m_l = s * T
        m_r = t * T
        try:
            x = us.quantile_left(m_l, tol=1e-9 * m_l)
            y = us.quantile_right(m_r, tol=1e-9 * m_r)
        except NumericalError:
            return math.nan, {}
        if y < x:
            return 0.0, {"x": x, "y": y}
        nu = hs.mass(x, y)
        return value_scalar(nu, m_l, m_r, p, q), {"x": x, "y": y}

    sup = mass_triangle_sup(approx_matrix, approx_scalar, exact_fn)
    notes: list[str] = []
    if sup.stale:
        notes.append(f"{which}: simplex refinement did not converge; best value kept")

    point_cands: list[tuple[float, float, float]] = []
    divergent = sup.migrated
    if math.isfinite(sup.value) and sup.payload:
        point_cands.append((sup.value, sup.payload["x"], sup.payload["y"]))

    fn2 = _mz_fn2(sysm, value_scalar, p, q)
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

    probe_l = math.isinf(w.left) or not hs.left_integrable
    probe_r = math.isinf(w.right) or not hs.right_integrable
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


def _h_o_mz_injections(hd: _HODetail, star_scale: float) -> tuple[tuple, tuple]:
    pairs = []
    values = []
    if hd.argmax is not None:
        pairs.append((hd.argmax[0], hd.argmax[1], "matched-path argmax"))
    if hd.probe is not None and hd.probe.classification == "finite":
        values.append((star_scale * hd.probe.limit, "matched path toward the left endpoint"))
    if hd.probe is not None and hd.probe.classification == "infinite":
        values.append((math.inf, "matched path toward the left endpoint"))
    return tuple(pairs), tuple(values)


# ---------------------------------------------------------------------------
# assembled report


def compute_mz_bounds(w: WeightedInterval, p: float, q: float) -> MeanZeroReport:
    """Compute every mean-zero bound ingredient and the finiteness criterion."""
    Exponents(p, q)
    pi_total = _require_finite_mu(w)

    notes: list[str] = []
    hd = _h_o_mz_detail(w, p, q)
    if hd.probe is not None and hd.probe.classification == "unknown":
        notes.append("h_o: matched-path probe inconclusive at the left endpoint")
    hp_ext, _, hp_notes = _h_partial_mz_detail(w, p, q)
    notes.extend(hp_notes)

    pairs_star, values_star = _h_o_mz_injections(hd, 2.0 ** (1.0 / p - 1.0 / q))
    pairs_low, values_low = _h_o_mz_injections(hd, 1.0)
    star = _mz_sup_detail(w, p, q, "b_star", pairs_star, values_star)
    low = _mz_sup_detail(w, p, q, "b_lower", pairs_low, values_low)
    notes.extend(star.notes)
    notes.extend(low.notes)

    upper_valid = 1.0 < p <= 2.0 <= q
    if upper_valid:
        k = k_general(p, 2.0).value
        upper = star.ext.scaled(k)
    else:
        k = math.nan
        upper = None
        notes.append("upper bound omitted: proven only for 1 < p <= 2 <= q")

    criterion = ext_max(hd.ext, hp_ext)
    if criterion.is_finite:
        holds = "yes"
    elif criterion.is_infinite:
        holds = "no"
    else:
        holds = "unknown"

    return MeanZeroReport(
        p=p,
        q=q,
        b_star=star.ext,
        b_lower=low.ext,
        h_o=hd.ext,
        h_partial=hp_ext,
        k=k,
        lower=low.ext,
        upper=upper,
        upper_alt=None,
        upper_valid=upper_valid,
        pi_total=pi_total,
        holds=holds,
        argmax=star.argmax,
        diagnostics=tuple(notes),
    )
