"""Supremum search helpers shared by the bound modules.

Three ingredients: a deterministic Nelder-Mead polish for 2-D objectives, a
classified limit probe along geometric point ladders (for boundary behavior
at infinite or singular endpoints), and small bracketing utilities.  The
actual objectives and coordinate systems live with their bound modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .extreal import ExtendedReal

__all__ = [
    "LimitProbe",
    "probe_sequence",
    "classify_tail",
    "edge_probes",
    "iterated_probes",
    "SupResult",
    "mass_triangle_sup",
    "nelder_mead",
    "golden_max",
]

PROBE_TERMS = 40
PROBE_RATIO = 2.0
PROBE_SPREAD_TOL = 1e-4
PROBE_INFINITE_THRESHOLD = 1e8
PROBE_ZERO_THRESHOLD = 1e-12
_PROBE_MIN_VALID = 8


@dataclass(frozen=True)
class LimitProbe:
    """Outcome of sampling a function along a ladder toward an endpoint.

    ``samples`` holds (point, value) pairs for the valid prefix of the
    ladder; ``classification`` is one of "zero", "finite", "infinite",
    "unknown"; for "finite" the ``limit`` field carries the settled value.
    """

    samples: tuple[tuple[float, float], ...]
    classification: str
    limit: float
    direction: str

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.samples)

    def as_extended(self) -> ExtendedReal:
        if self.classification == "infinite":
            return ExtendedReal.infinite()
        if self.classification == "zero":
            return ExtendedReal.zero()
        if self.classification == "finite":
            return ExtendedReal.finite(self.limit)
        best = max((v for v in self.values if math.isfinite(v)), default=math.nan)
        return ExtendedReal.unknown(best)


def classify_tail(values: Sequence[float]) -> tuple[str, float]:
    """Classify the limit of a sampled sequence.

    Rules: the last 8 valid terms settle the call.  Relative spread below
    ``PROBE_SPREAD_TOL`` means a finite limit (value: their mean); all of
    them below ``PROBE_ZERO_THRESHOLD`` means zero; an increasing tail
    ending above ``PROBE_INFINITE_THRESHOLD`` (or overflowing) means
    infinite; anything else is unknown.
    """
    vals = []
    for v in values:
        if math.isnan(v):
            break
        vals.append(v)
    if any(math.isinf(v) for v in vals):
        # an infinite sample is a feasible point with unbounded objective
        return "infinite", math.inf
    if len(vals) < 5:
        return "unknown", max(vals, default=math.nan)
    if len(vals) >= 8:
        tail = vals[-8:]
        top = max(tail)
        bot = min(tail)
        if top <= PROBE_ZERO_THRESHOLD:
            return "zero", 0.0
        increasing = all(b >= a * (1.0 - 1e-12) for a, b in zip(tail, tail[1:]))
        if increasing and tail[-1] > PROBE_INFINITE_THRESHOLD:
            return "infinite", math.inf
        if top > 0 and (top - bot) <= PROBE_SPREAD_TOL * top:
            return "finite", sum(tail) / len(tail)
    # a ladder truncated by representability (values become NaN past some
    # point) can still end in a machine-converged run; accept a short
    # suffix under a much tighter spread than the 8-term window above
    last5 = vals[-5:]
    top5 = max(last5)
    bot5 = min(last5)
    if top5 > 0 and (top5 - bot5) <= 1e-6 * top5:
        return "finite", sum(last5) / len(last5)
    # power-law tails along a geometric ladder show a stable step ratio r:
    # r < 1 decays to zero, r > 1 grows without bound; a drifting ratio or
    # one pinned near 1 stays unknown.  Eight samples leave seven ratios,
    # one more than the stability window needs
    if len(vals) >= _PROBE_MIN_VALID:
        recent = vals[-12:]
        if all(v > 0.0 for v in recent):
            ratios = [b / a for a, b in zip(recent, recent[1:])]
            rr = ratios[-6:]
            mean_r = math.exp(sum(math.log(r) for r in rr) / len(rr))
            stable = all(abs(r / mean_r - 1.0) < 1e-3 for r in rr)
            if stable and mean_r <= 0.999:
                return "zero", 0.0
            if stable and mean_r >= 1.001:
                return "infinite", math.inf
        # affine growth c*t + d along a geometric ladder hides the step
        # ratio behind the offset; first differences recover it.  The clean
        # asymptote may only cover the last few samples before the ladder
        # truncates, so the window is short and strict, backed by a demand
        # for substantial total growth
        ds = [b - a for a, b in zip(recent, recent[1:])]
        if all(d > 0.0 for d in ds) and recent[-1] >= 8.0 * recent[0] > 0.0:
            tail_ds = ds[-5:]
            drr = [b / a for a, b in zip(tail_ds, tail_ds[1:])]
            mean_d = math.exp(sum(math.log(r) for r in drr) / len(drr))
            if all(abs(r / mean_d - 1.0) < 1e-3 for r in drr) and mean_d >= 1.001:
                return "infinite", math.inf
    return "unknown", max(vals)


def ladder(toward: float, start: float) -> list[float]:
    """Geometric point ladder approaching ``toward`` from ``start``."""
    pts = []
    if math.isinf(toward):
        sign = 1.0 if toward > 0 else -1.0
        step = max(1.0, abs(start))
        for k in range(PROBE_TERMS):
            pts.append(start + sign * step * (PROBE_RATIO**k))
    else:
        gap = toward - start
        for k in range(1, PROBE_TERMS + 1):
            nxt = toward - gap / (PROBE_RATIO**k)
            if nxt == toward or (pts and nxt == pts[-1]):
                break
            pts.append(nxt)
    return pts


def probe_sequence(fn: Callable[[float], float], toward: float, start: float,
                   direction: str = "") -> LimitProbe:
    """Probe ``fn`` along a geometric ladder toward an endpoint.

    Evaluation failures (or NaN) truncate the ladder; classification happens
    on the valid prefix."""
    pts = ladder(toward, start)
    pairs: list[tuple[float, float]] = []
    for t in pts:
        try:
            v = float(fn(t))
        except Exception:
            break
        if math.isnan(v):
            break
        pairs.append((t, v))
        if math.isinf(v):
            break
    cls, limit = classify_tail([v for _, v in pairs])
    return LimitProbe(
        samples=tuple(pairs),
        classification=cls,
        limit=limit,
        direction=direction or (f"x->{toward:g}"),
    )


def edge_probes(
    fn2: Callable[[float, float], float],
    left: float,
    right: float,
    seeds: Sequence[float],
    probe_left: bool,
    probe_right: bool,
) -> list[LimitProbe]:
    """Probe a two-point objective toward each requested interval end.

    One coordinate is pinned at each seed while the other walks a geometric
    ladder toward the endpoint, so the probes capture limits along the edges
    of the x < y triangle."""
    probes: list[LimitProbe] = []
    if probe_right:
        for x0 in seeds:
            def fy(y: float, x0: float = x0) -> float:
                return fn2(x0, y) if y > x0 else math.nan

            probes.append(probe_sequence(
                fy, right, x0, direction=f"y->{right:g} at x={x0:.6g}"
            ))
    if probe_left:
        for y0 in seeds:
            def fx(x: float, y0: float = y0) -> float:
                return fn2(x, y0) if x < y0 else math.nan

            probes.append(probe_sequence(
                fx, left, y0, direction=f"x->{left:g} at y={y0:.6g}"
            ))
    return probes


def _make_probe(pairs: Sequence[tuple[float, float]], cls: str, lim: float,
                direction: str) -> LimitProbe:
    if cls == "infinite":
        limit = math.inf
    elif cls == "zero":
        limit = 0.0
    elif cls == "finite":
        limit = lim
    else:
        limit = math.nan
    return LimitProbe(samples=tuple(pairs), classification=cls, limit=limit,
                      direction=direction)


def iterated_probes(fn2: Callable[[float, float], float],
                    anchor: float) -> list[LimitProbe]:
    """Iterated limits of a two-point objective on a doubly infinite interval.

    Both orders are evaluated (inner limit in y toward +inf then x toward
    -inf, and symmetrically); each order reports as one probe whose samples
    are the settled inner limits."""
    offs = [PROBE_RATIO**k for k in range(PROBE_TERMS)]
    xs = [anchor - o for o in offs]
    ys = [anchor + o for o in offs]

    def safe(x: float, y: float) -> float:
        if y <= x:
            return math.nan
        try:
            return float(fn2(x, y))
        except Exception:
            return math.nan

    out: list[LimitProbe] = []
    for outer, inner, tag in (
        (xs, ys, "iterated: y->+inf then x->-inf"),
        (ys, xs, "iterated: x->-inf then y->+inf"),
    ):
        pairs: list[tuple[float, float]] = []
        settled: list[float] = []
        broke = False
        for t in outer:
            if tag.startswith("iterated: y"):
                cls, lim = classify_tail([safe(t, y) for y in inner])
            else:
                cls, lim = classify_tail([safe(x, t) for x in inner])
            if cls == "infinite":
                out.append(_make_probe(pairs + [(t, math.inf)], "infinite",
                                       math.inf, tag))
                broke = True
                break
            if cls == "unknown":
                if not math.isnan(lim):
                    pairs.append((t, lim))
                out.append(_make_probe(pairs, "unknown", math.nan, tag))
                broke = True
                break
            settled.append(lim)
            pairs.append((t, lim))
        if not broke:
            cls, lim = classify_tail(settled)
            out.append(_make_probe(pairs, cls, lim, tag))
    return out


# ---------------------------------------------------------------------------
# deterministic derivative-free maximization


def nelder_mead(
    f: Callable[[np.ndarray], float],
    x0: np.ndarray,
    scale: float,
    max_iter: int = 200,
    ftol: float = 1e-12,
) -> tuple[np.ndarray, float, bool]:
    """Maximize ``f`` from ``x0``; returns (argmax, value, converged).

    Standard reflect/expand/contract/shrink simplex in n dimensions with a
    fixed deterministic initial simplex.  Infeasible points must return
    ``-inf`` from ``f``.
    """
    n = len(x0)
    pts = [np.array(x0, dtype=float)]
    for i in range(n):
        p = np.array(x0, dtype=float)
        p[i] += scale
        pts.append(p)
    vals = [f(p) for p in pts]

    def order():
        idx = np.argsort(vals)[::-1]  # best first
        return [pts[i] for i in idx], [vals[i] for i in idx]

    converged = False
    for _ in range(max_iter):
        pts, vals = order()
        if math.isfinite(vals[0]) and math.isfinite(vals[-1]):
            if abs(vals[0] - vals[-1]) <= ftol * (abs(vals[0]) + 1e-300):
                converged = True
                break
        centroid = np.mean(pts[:-1], axis=0)
        worst = pts[-1]
        refl = centroid + (centroid - worst)
        f_refl = f(refl)
        if f_refl > vals[0]:
            expand = centroid + 2.0 * (centroid - worst)
            f_exp = f(expand)
            if f_exp > f_refl:
                pts[-1], vals[-1] = expand, f_exp
            else:
                pts[-1], vals[-1] = refl, f_refl
        elif f_refl > vals[-2]:
            pts[-1], vals[-1] = refl, f_refl
        else:
            contract = centroid + 0.5 * (worst - centroid)
            f_con = f(contract)
            if f_con > vals[-1]:
                pts[-1], vals[-1] = contract, f_con
            else:
                best = pts[0]
                for i in range(1, n + 1):
                    pts[i] = best + 0.5 * (pts[i] - best)
                    vals[i] = f(pts[i])
    pts, vals = order()
    return pts[0], vals[0], converged


GRID_N = 96
NM_STARTS = 5
MIGRATION_FACTOR = 1e8


@dataclass(frozen=True)
class SupResult:
    """Outcome of a two-dimensional supremum search over the mass triangle."""

    value: float
    point: tuple[float, float]
    payload: dict
    migrated: bool
    stale: bool
    grid_median: float


def mass_triangle_sup(
    approx_matrix: Callable[[np.ndarray, np.ndarray], np.ndarray],
    approx_scalar: Callable[[float, float], float],
    exact_fn: Callable[[float, float], tuple[float, dict]],
    n: int = GRID_N,
    nm_starts: int = NM_STARTS,
) -> SupResult:
    """Maximize an objective over mass fractions (s, t) with s, t > 0, s + t < 1.

    The coarse pass evaluates ``approx_matrix`` on an n-by-n grid of cell
    centers, then polishes with Nelder-Mead on ``approx_scalar`` from the best
    cells, and finally re-evaluates every candidate with ``exact_fn`` (which
    returns the objective together with a payload carrying the argmax in
    original coordinates).  A supremum that keeps growing into a corner of the
    triangle is flagged via ``migrated`` so the caller can treat it as a
    boundary phenomenon rather than an interior maximum.
    """
    grid = (np.arange(n, dtype=float) + 0.5) / n
    S, T = np.meshgrid(grid, grid, indexing="ij")
    with np.errstate(all="ignore"):
        vals = np.asarray(approx_matrix(S, T), dtype=float)
    vals = np.where(S + T < 1.0, vals, -np.inf)
    vals = np.where(np.isnan(vals), -np.inf, vals)

    finite = vals[np.isfinite(vals) & (vals > 0.0)]
    grid_median = float(np.median(finite)) if finite.size else 0.0

    order = np.argsort(vals, axis=None)[::-1]
    starts: list[tuple[float, float]] = []
    for flat in order[: nm_starts * 3]:
        i, j = divmod(int(flat), n)
        if not math.isfinite(vals[i, j]):
            continue
        starts.append((grid[i], grid[j]))
        if len(starts) >= nm_starts:
            break

    def clamp(s: float, t: float) -> tuple[float, float]:
        eps = 1e-9
        s = min(max(s, eps), 1.0 - 2.0 * eps)
        t = min(max(t, eps), 1.0 - s - eps)
        return s, max(t, eps)

    def penalized(pt: np.ndarray) -> float:
        s, t = float(pt[0]), float(pt[1])
        if s <= 0.0 or t <= 0.0 or s + t >= 1.0:
            return -math.inf
        return approx_scalar(s, t)

    candidates: list[tuple[float, float]] = list(starts[:1])
    any_converged = not starts
    for s0, t0 in starts:
        arg, _, conv = nelder_mead(
            penalized, np.array([s0, t0]), scale=0.5 / n, max_iter=140
        )
        any_converged = any_converged or conv
        candidates.append(clamp(float(arg[0]), float(arg[1])))

    def exact(st: tuple[float, float]) -> tuple[float, dict, tuple[float, float]]:
        val, payload = exact_fn(*st)
        if math.isnan(val):
            val = -math.inf
        return val, payload, st

    evaluated = [exact(st) for st in candidates]
    evaluated.sort(key=lambda e: (-e[0], e[1].get("x", 0.0), e[1].get("y", 0.0)))
    best_val, best_payload, best_st = evaluated[0]

    # one quadratic-fit polish on exact values: a 3x3 stencil around the
    # refined argmax, least-squares paraboloid, step to its stationary point
    h = 0.5 / n
    s0 = min(max(best_st[0], h + 1e-9), 1.0 - 2.0 * h)
    t0 = min(max(best_st[1], h + 1e-9), 1.0 - s0 - h - 1e-9)
    if math.isfinite(best_val) and t0 > h and s0 + t0 + 2.0 * h < 1.0:
        offs = (-1.0, 0.0, 1.0)
        pts = [(s0 + di * h, t0 + dj * h) for di in offs for dj in offs]
        vals9 = [exact(st) for st in pts]
        zs = np.array([e[0] for e in vals9])
        if np.all(np.isfinite(zs)):
            ds = np.array([di for di in offs for _ in offs]) * h
            dt = np.array([dj for _ in offs for dj in offs]) * h
            design = np.column_stack(
                [np.ones(9), ds, dt, ds * ds, dt * dt, ds * dt]
            )
            c = np.linalg.lstsq(design, zs, rcond=None)[0]
            hess = np.array([[2.0 * c[3], c[5]], [c[5], 2.0 * c[4]]])
            if np.linalg.det(hess) > 0.0 and hess[0, 0] < 0.0:
                step = np.linalg.solve(hess, -c[1:3])
                step = np.clip(step, -1.5 * h, 1.5 * h)
                vals9.append(exact(clamp(s0 + step[0], t0 + step[1])))
            vals9.sort(key=lambda e: (-e[0], e[1].get("x", 0.0), e[1].get("y", 0.0)))
            if vals9[0][0] > best_val:
                best_val, best_payload, best_st = vals9[0]

    margin = 1.5 / n
    s_b, t_b = best_st
    at_edge = s_b < margin or t_b < margin or s_b + t_b > 1.0 - margin
    huge = best_val > MIGRATION_FACTOR * max(grid_median, 1e-300)
    migrated = bool(at_edge and huge) or math.isinf(best_val)

    return SupResult(
        value=best_val,
        point=best_st,
        payload=best_payload,
        migrated=migrated,
        stale=not any_converged,
        grid_median=grid_median,
    )


def golden_max(f: Callable[[float], float], lo: float, hi: float,
               iters: int = 60) -> tuple[float, float]:
    """Golden-section maximization of a unimodal-ish scalar function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if b - a <= 1e-14 * (abs(a) + abs(b) + 1e-8):
            break
    if fc >= fd:
        return c, fc
    return d, fd
