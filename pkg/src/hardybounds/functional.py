"""Nash, Sobolev-type, and logarithmic Sobolev bounds.

Three inequality families built on the mean-zero machinery, all with the
Dirichlet energy ||f'||_{2,nu} on the right-hand side:

* the Nash inequality ||f - pi(f)||_{2,mu}^{2+4/gamma} <= A_N ||f'||_{2,nu}^2
  ||f||_{1,mu}^{4/gamma}, which for gamma > 2 is equivalent to the
  Sobolev-type inequality ||f - pi(f)||_{q,mu}^2 <= A_S ||f'||_{2,nu}^2 at
  q = 2 gamma / (gamma - 2); its two-sided bounds are the squares of the
  mean-zero pair at (p, q) = (2, 2 gamma/(gamma - 2)), and the finiteness
  criterion transfers unchanged;
* a non-existence test for gamma <= 2, where no Sobolev reduction exists:
  when both one-sided products mu(boundary-side) * nuhat(interior-side)
  settle to positive finite limits at the infinite endpoints, the Nash
  inequality fails outright;
* the logarithmic Sobolev inequality Ent(f^2) <= A_LS ||f'||_{2,nu}^2 with
  Ent taken against pi = mu normalized, bracketed by B_* <= A_LS <= 4 B*.
  Both B* and B_* are two-point suprema of nuhat[x,y] against a harmonic
  combination of outer pi-masses weighted by t log(1 + c/t) factors; B* uses
  the fixed scale c = e^2, while B_* splits a unit budget z + (1 - z) = 1
  between the sides at the equalizing solution z*(x, y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .extreal import ExtendedReal, ext_max
from .measure import (
    NumericalError,
    ValidationError,
    WeightedInterval,
)
from .meanzero import (
    _MASS_FLOOR,
    _mz_one_sided,
    _require_finite_mu,
    compute_mz_bounds,
)
from .search import (
    PROBE_ZERO_THRESHOLD,
    LimitProbe,
    edge_probes,
    iterated_probes,
    mass_triangle_sup,
    probe_sequence,
)
from .vanishing import _check_pair

__all__ = [
    "NashReport",
    "LogSobolevReport",
    "sobolev_bounds",
    "nash_small_gamma",
    "logsobolev_phi",
    "logsobolev_psi",
    "solve_zstar",
    "logsobolev_bounds",
]

_E2 = math.exp(2.0)
_ZSTAR_TOL = 1e-12
_SEED_XI = (0.12, 0.3, 0.5, 0.7, 0.88)


# ---------------------------------------------------------------------------
# Nash / Sobolev-type


@dataclass(frozen=True)
class NashReport:
    """Bounds for the Nash inequality via its Sobolev-type form.

    For gamma > 2 the fields are the squared mean-zero bounds at the mapped
    exponent q = 2 gamma / (gamma - 2); for gamma <= 2 no such reduction
    exists, the bound fields are unknown, and ``verdict`` comes from the
    non-existence test."""

    gamma: float
    q: float
    b_s_star: ExtendedReal
    b_s_lower: ExtendedReal
    upper: ExtendedReal
    lower: ExtendedReal
    verdict: str
    diagnostics: tuple[str, ...]


_VERDICT_FROM_HOLDS = {"yes": "holds", "no": "fails", "unknown": "unknown"}


def _small_gamma_verdict(
    w: WeightedInterval, theta: float | None
) -> tuple[str, list[str]]:
    """Non-existence test for gamma <= 2.

    At an infinite endpoint the product of the outward mu-mass with the
    inward dual mass up to theta must settle to a positive finite limit;
    when every infinite side does, the inequality fails.  Finite endpoints
    impose no condition.  Any probe that diverges, vanishes, or stays
    unsettled leaves the verdict unknown."""
    sysm = w.system(2.0)
    us, hs = sysm.uside, sysm.hside
    notes: list[str] = []
    if theta is None:
        if not math.isfinite(us.total):
            raise ValidationError(
                "mu has infinite total mass, so the default probe point "
                "(the mu-median) is undefined; pass theta explicitly"
            )
        theta = us.median_point()
    else:
        theta = float(theta)
        if math.isnan(theta) or not w.left < theta < w.right:
            raise ValidationError(
                f"theta must lie inside ({w.left}, {w.right}), got {theta}"
            )

    def product_left(x: float) -> float:
        m = us.L(x)
        if 0.0 <= m < _MASS_FLOOR:
            return math.nan
        d = hs.mass(x, theta)
        if math.isinf(d):
            return math.inf if m > 0.0 else math.nan
        return m * d

    def product_right(y: float) -> float:
        m = us.R(y)
        if 0.0 <= m < _MASS_FLOOR:
            return math.nan
        d = hs.mass(theta, y)
        if math.isinf(d):
            return math.inf if m > 0.0 else math.nan
        return m * d

    probes = []
    if math.isinf(w.left):
        probes.append(("left", probe_sequence(
            product_left, w.left, theta, direction=f"x->-inf at theta={theta:.6g}"
        )))
    if math.isinf(w.right):
        probes.append(("right", probe_sequence(
            product_right, w.right, theta, direction=f"y->inf at theta={theta:.6g}"
        )))
    if not probes:
        notes.append(
            "both endpoints are finite: the non-existence test needs an "
            "infinite endpoint to probe"
        )
        return "unknown", notes

    verdict = "fails"
    for side, pr in probes:
        settled = (
            pr.classification == "finite" and pr.limit > PROBE_ZERO_THRESHOLD
        )
        if settled:
            notes.append(
                f"{side} mass product settles to {pr.limit:.6g} along {pr.direction}"
            )
        else:
            verdict = "unknown"
            notes.append(
                f"{side} mass product classified {pr.classification} along "
                f"{pr.direction}; the test needs a positive finite limit"
            )
    return verdict, notes


def sobolev_bounds(
    w: WeightedInterval, gamma: float, theta: float | None = None
) -> NashReport:
    """Two-sided bounds for the Sobolev-type (equivalently Nash) inequality.

    For gamma > 2: run the mean-zero bounds at p = 2, q = 2 gamma/(gamma - 2)
    and square them, so B_{S*} <= A_S <= 4 B_S* with
    B_{S*} <= B_S* <= 2^{2/gamma} B_{S*}.  For gamma in (0, 2] the report
    carries the non-existence verdict and no bound values."""
    gamma = float(gamma)
    if math.isnan(gamma) or gamma <= 0.0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    if gamma <= 2.0:
        verdict, notes = _small_gamma_verdict(w, theta)
        notes.insert(0, (
            "gamma <= 2: the Sobolev-type reduction needs gamma > 2; "
            "verdict from the non-existence test"
        ))
        na = ExtendedReal.unknown(math.nan)
        return NashReport(
            gamma=gamma,
            q=math.nan,
            b_s_star=na,
            b_s_lower=na,
            upper=na,
            lower=na,
            verdict=verdict,
            diagnostics=tuple(notes),
        )
    q = 2.0 * gamma / (gamma - 2.0)
    mz = compute_mz_bounds(w, 2.0, q)
    b_s_star = mz.b_star.squared()
    b_s_lower = mz.b_lower.squared()
    return NashReport(
        gamma=gamma,
        q=q,
        b_s_star=b_s_star,
        b_s_lower=b_s_lower,
        upper=b_s_star.scaled(4.0),
        lower=b_s_lower,
        verdict=_VERDICT_FROM_HOLDS[mz.holds],
        diagnostics=mz.diagnostics,
    )


def nash_small_gamma(
    w: WeightedInterval, gamma: float, theta: float | None = None
) -> str:
    """Verdict for the Nash inequality at gamma <= 2 (dispatching larger
    gamma to the Sobolev-type route)."""
    gamma = float(gamma)
    if math.isnan(gamma) or gamma <= 0.0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    if gamma > 2.0:
        return sobolev_bounds(w, gamma, theta).verdict
    return _small_gamma_verdict(w, theta)[0]


# ---------------------------------------------------------------------------
# logarithmic Sobolev: pointwise pieces


def _xlog1p(t: float, c: float) -> float:
    """t * log(1 + c/t), extended continuously by 0 at t = 0."""
    if t == 0.0:
        return 0.0
    r = c / t
    if math.isinf(r):  # c/t overflowed; evaluate the log in split form
        return t * (math.log(c) - math.log(t))
    return t * math.log1p(r)


def _pi_outer(w: WeightedInterval, total: float, x: float, y: float) -> tuple[float, float]:
    """Outer pi-masses (pi[L, x], pi[y, R]) with endpoint conventions."""
    us = w.uside
    pl = 0.0 if x <= w.left else us.L(x) / total
    pr = 0.0 if y >= w.right else us.R(y) / total
    return pl, pr


def logsobolev_phi(w: WeightedInterval, x: float, theta: float) -> float:
    """Left entropy weight pi[L,x] * log(1 + (1 - pi[L,theta]) / pi[L,x])."""
    total = _require_finite_mu(w)
    _check_pair(w, x, theta)
    pl, _ = _pi_outer(w, total, x, w.right)
    c = 0.0 if theta >= w.right else w.uside.R(theta) / total
    return _xlog1p(pl, c)


def logsobolev_psi(w: WeightedInterval, theta: float, y: float) -> float:
    """Right entropy weight pi[y,R] * log(1 + (1 - pi[theta,R]) / pi[y,R])."""
    total = _require_finite_mu(w)
    _check_pair(w, theta, y)
    _, pr = _pi_outer(w, total, w.left, y)
    c = 0.0 if theta <= w.left else w.uside.L(theta) / total
    return _xlog1p(pr, c)


def _equalizer_side(t: float, z: float) -> float:
    """[t log(1 + z/t)]^2 (1 + z/t), the balance functional of one side."""
    r = z / t
    lg = t * math.log1p(r)
    return lg * lg * (1.0 + r)


def _zstar_masses(pl: float, pr: float, tol: float) -> float:
    """Split point z in (0, 1) equalizing the two side functionals.

    The left side is increasing in z and vanishes at 0, the right side is
    decreasing and vanishes at 1, so bisection always brackets the unique
    crossing."""
    lo, hi = 0.0, 1.0
    z = 0.5
    for _ in range(200):
        z = 0.5 * (lo + hi)
        g = _equalizer_side(pl, z) - _equalizer_side(pr, 1.0 - z)
        if g == 0.0:
            break
        if g < 0.0:
            lo = z
        else:
            hi = z
        if hi - lo <= 1e-16:
            break
    resid = abs(_equalizer_side(pl, z) - _equalizer_side(pr, 1.0 - z))
    if not resid <= tol:
        raise NumericalError(
            f"z* bisection stalled at residual {resid:.3e} (tol {tol:g}) "
            f"for pi-masses ({pl:.6g}, {pr:.6g})"
        )
    return z


def solve_zstar(w: WeightedInterval, x: float, y: float, tol: float = _ZSTAR_TOL) -> float:
    """Unique z in (0, 1) balancing the two entropy weight functionals at
    the pair (x, y); the returned point satisfies |LHS - RHS| <= tol."""
    total = _require_finite_mu(w)
    _check_pair(w, x, y)
    if not x < y:
        raise ValidationError(f"z* needs x < y, got ({x}, {y})")
    pl, pr = _pi_outer(w, total, x, y)
    if not (pl > 0.0 and pr > 0.0):
        raise ValidationError(
            f"z* needs positive outer pi-masses, got ({pl:.6g}, {pr:.6g})"
        )
    return _zstar_masses(pl, pr, tol)


# ---------------------------------------------------------------------------
# logarithmic Sobolev: the three suprema


def _ls_combine(nu: float, wl: float, wr: float) -> float:
    if math.isnan(nu) or math.isnan(wl) or math.isnan(wr):
        return math.nan
    if wl == 0.0 or wr == 0.0 or nu == 0.0:
        return 0.0
    if math.isinf(nu):
        return math.inf
    return nu * wl * wr / (wl + wr)


def _ls_value(which: str, nu: float, pl: float, pr: float) -> float:
    if math.isnan(pl) or math.isnan(pr):
        return math.nan
    if which == "b_star":
        return _ls_combine(nu, _xlog1p(pl, _E2), _xlog1p(pr, _E2))
    if which == "b_lower_median":
        if pl > 0.5 or pr > 0.5:
            return 0.0
        return _ls_combine(nu, _xlog1p(pl, 0.5), _xlog1p(pr, 0.5))
    # the full lower bound: the z*-split value, floored by the half-half
    # split so that the median-restricted supremum can never numerically
    # exceed it (both are admissible splits of the same unit budget)
    if pl <= 0.0 or pr <= 0.0:
        return 0.0
    z = _zstar_masses(pl, pr, _ZSTAR_TOL)
    at_star = _ls_combine(nu, _xlog1p(pl, z), _xlog1p(pr, 1.0 - z))
    at_half = _ls_combine(nu, _xlog1p(pl, 0.5), _xlog1p(pr, 0.5))
    return max(at_star, at_half)


def _zstar_array(pl: np.ndarray, pr: np.ndarray) -> np.ndarray:
    pl, pr = np.broadcast_arrays(pl, pr)
    lo = np.zeros(pl.shape)
    hi = np.ones(pl.shape)

    def side(t, z):
        r = z / t
        lg = t * np.log1p(r)
        return lg * lg * (1.0 + r)

    for _ in range(60):
        z = 0.5 * (lo + hi)
        g = side(pl, z) - side(pr, 1.0 - z)
        lo = np.where(g < 0.0, z, lo)
        hi = np.where(g < 0.0, hi, z)
    return 0.5 * (lo + hi)


def _ls_matrix(which: str, nu: np.ndarray, pl: np.ndarray, pr: np.ndarray) -> np.ndarray:
    if which == "b_star":
        wl = pl * np.log1p(_E2 / pl)
        wr = pr * np.log1p(_E2 / pr)
    elif which == "b_lower_median":
        wl = np.where(pl <= 0.5, pl * np.log1p(0.5 / pl), 0.0)
        wr = np.where(pr <= 0.5, pr * np.log1p(0.5 / pr), 0.0)
    else:
        z = _zstar_array(pl, pr)
        wl = pl * np.log1p(z / pl)
        wr = pr * np.log1p((1.0 - z) / pr)
    good = (wl > 0.0) & (wr > 0.0)
    vals = nu * wl * wr / np.maximum(wl + wr, 1e-300)
    return np.where(good, vals, 0.0)


@dataclass(frozen=True)
class _LsSup:
    ext: ExtendedReal
    argmax: tuple[float, float] | None
    point: tuple[float, float] | None
    notes: tuple[str, ...]


def _ls_sup_detail(
    w: WeightedInterval,
    which: str,
    inject_st: tuple[tuple[float, float], ...] = (),
) -> _LsSup:
    """One of the three entropy suprema over the mass triangle.

    Divergence can only come from an unbounded dual mass outrunning the
    vanishing entropy weights (the weights themselves are bounded), and that
    race can be as slow as logarithmic, so the sides with infinite dual mass
    get limit probes along the triangle edges in addition to the grid
    migration check."""
    sysm = w.system(2.0)
    us, hs = sysm.uside, sysm.hside
    total = us.total
    th = hs.table

    def fn2(x: float, y: float) -> float:
        if y <= x:
            return math.nan
        nu, m_l, m_r = _mz_one_sided(sysm, x, y)
        if math.isnan(m_l) or math.isnan(m_r):
            return math.nan
        return _ls_value(which, nu, m_l / total, m_r / total)

    def approx_matrix(S, Tm):
        svec = S[:, 0]
        tvec = Tm[0, :]
        xs = np.asarray(us.approx_quantile_left(svec * total))
        ys = np.asarray(us.approx_quantile_right(tvec * total))
        cu = np.interp(hs.map.xi(xs), th.xi, th.cum)
        cy = np.interp(hs.map.xi(ys), th.xi, th.cum)
        nu = np.maximum(cy[None, :] - cu[:, None], 0.0)
        return _ls_matrix(which, nu, svec[:, None], tvec[None, :])

    def approx_scalar(s: float, t: float) -> float:
        x = float(np.asarray(us.approx_quantile_left(s * total)))
        y = float(np.asarray(us.approx_quantile_right(t * total)))
        if y <= x:
            return -math.inf
        nu = float(np.asarray(hs.approx_interior(x, y)))
        return _ls_value(which, nu, s, t)

    def exact_fn(s: float, t: float) -> tuple[float, dict]:
        m_l = s * total
        m_r = t * total
        try:
            x = us.quantile_left(m_l, tol=1e-9 * m_l)
            y = us.quantile_right(m_r, tol=1e-9 * m_r)
            if y < x:
                return 0.0, {"x": x, "y": y}
            nu = hs.mass(x, y)
            return _ls_value(which, nu, s, t), {"x": x, "y": y}
        except NumericalError:
            return math.nan, {}

    sup = mass_triangle_sup(approx_matrix, approx_scalar, exact_fn)
    notes: list[str] = []
    if sup.stale:
        notes.append(f"{which}: simplex refinement did not converge; best value kept")

    divergent = sup.migrated
    if sup.migrated:
        notes.append(
            f"{which}: supremum migrated to the mass-grid edge; treated as divergent"
        )
    cands: list[tuple[float, float, float, tuple[float, float]]] = []
    if math.isfinite(sup.value) and sup.payload:
        cands.append((sup.value, sup.payload["x"], sup.payload["y"], sup.point))
    for s, t in inject_st:
        if not (0.0 < s and 0.0 < t and s + t < 1.0):
            continue
        v, payload = exact_fn(s, t)
        if math.isnan(v) or not payload:
            continue
        if math.isinf(v):
            divergent = True
            notes.append(f"{which}: diverges at an injected mass pair")
        else:
            cands.append((v, payload["x"], payload["y"], (s, t)))

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

    cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    components: list[ExtendedReal] = [pr.as_extended() for pr in probes]
    if cands:
        components.append(ExtendedReal.finite(cands[0][0]))
    if divergent:
        components.append(ExtendedReal.infinite())
    ext = ext_max(*components) if components else ExtendedReal.zero()

    argmax = (cands[0][1], cands[0][2]) if cands else None
    point = cands[0][3] if cands else None
    if (
        ext.classification == "finite"
        and cands
        and ext.value > cands[0][0] * (1.0 + 1e-12)
    ):
        notes.append(
            f"{which}: supremum approached at the boundary; argmax is the best interior point"
        )
    return _LsSup(ext, argmax, point, tuple(notes))


@dataclass(frozen=True)
class LogSobolevReport:
    """Bounds B_* <= A_LS <= 4 B* for the logarithmic Sobolev constant.

    ``b_lower_full`` is the z*-split form of B_* and ``b_lower_median`` its
    restriction to pairs straddling the pi-median with the half-half split;
    ``argmax`` locates B* and ``argmax_lower`` the full lower bound."""

    b_star: ExtendedReal
    b_lower_full: ExtendedReal
    b_lower_median: ExtendedReal
    upper: ExtendedReal
    lower: ExtendedReal
    pi_total: float
    argmax: tuple[float, float] | None
    argmax_lower: tuple[float, float] | None
    diagnostics: tuple[str, ...]


def logsobolev_bounds(w: WeightedInterval) -> LogSobolevReport:
    """Compute the entropy bound pair and the median particular case.

    The median argmax is re-evaluated inside the full supremum and the full
    argmax inside B*, so the reported values respect the pointwise ordering
    median form <= z*-form <= e^2-form by construction."""
    pi_total = _require_finite_mu(w)
    med = _ls_sup_detail(w, "b_lower_median")
    inject = (med.point,) if med.point is not None else ()
    full = _ls_sup_detail(w, "b_lower_full", inject_st=inject)
    if full.point is not None:
        inject = inject + (full.point,)
    star = _ls_sup_detail(w, "b_star", inject_st=inject)
    notes = list(med.notes) + list(full.notes) + list(star.notes)
    return LogSobolevReport(
        b_star=star.ext,
        b_lower_full=full.ext,
        b_lower_median=med.ext,
        upper=star.ext.scaled(4.0),
        lower=full.ext,
        pi_total=pi_total,
        argmax=star.argmax,
        argmax_lower=full.argmax,
        diagnostics=tuple(notes),
    )
