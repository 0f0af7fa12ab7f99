"""Pure-numpy evaluation and quadrature engine.

Mirrors the compiled extension in ``_kernel.pyx``; selected automatically when
the extension is unavailable (or when ``HARDYBOUNDS_FORCE_FALLBACK=1``).
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .expr import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_EXP,
    OP_LOG,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SQRT,
    OP_SUB,
    OP_X,
    CompiledDensity,
    DomainError,
)

BACKEND_NAME = "fallback"

# 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
_XGK = np.array(
    [
        0.991455371120813,
        0.949107912342759,
        0.864864423359769,
        0.741531185599394,
        0.586087235467691,
        0.405845151377397,
        0.207784955007898,
        0.0,
    ]
)
_WGK = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
    ]
)
_WG = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
    ]
)

# full 15-point layout, symmetric: [-x0 .. -x6, 0, x6 .. x0]
KRONROD_NODES = np.concatenate([-_XGK[:7], [0.0], _XGK[6::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:7], [_WGK[7]], _WGK[6::-1]])
_gauss = np.zeros(15)
_gauss[1:14:2] = np.concatenate([_WG[:3], [_WG[3]], _WG[2::-1]])
GAUSS_WEIGHTS = _gauss


def eval_many(cd: CompiledDensity, xs: np.ndarray) -> np.ndarray:
    """Run the stack program over an array of points.

    Raises :class:`DomainError` at the first offending point for operations
    that leave the real domain; overflow follows IEEE (becomes inf).
    """
    xs = np.asarray(xs, dtype=float)
    flat = xs.ravel()
    stack = np.empty((cd.stack_depth, flat.size))
    sp = 0
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        for op, arg in zip(cd.ops, cd.args):
            if op == OP_CONST:
                stack[sp] = cd.consts[arg]
                sp += 1
            elif op == OP_X:
                stack[sp] = flat
                sp += 1
            elif op == OP_ADD:
                sp -= 1
                stack[sp - 1] += stack[sp]
            elif op == OP_SUB:
                sp -= 1
                stack[sp - 1] -= stack[sp]
            elif op == OP_MUL:
                sp -= 1
                stack[sp - 1] *= stack[sp]
            elif op == OP_DIV:
                sp -= 1
                bad = stack[sp] == 0.0
                if bad.any():
                    raise DomainError("division by zero", flat[int(np.argmax(bad))])
                stack[sp - 1] /= stack[sp]
            elif op == OP_POW:
                sp -= 1
                base = stack[sp - 1]
                expo = stack[sp]
                bad = (base < 0.0) & (expo != np.floor(expo))
                if bad.any():
                    raise DomainError(
                        "negative base raised to non-integer power", flat[int(np.argmax(bad))]
                    )
                # IEEE: pow(+0, negative) = +inf
                stack[sp - 1] = np.power(base, expo)
            elif op == OP_NEG:
                np.negative(stack[sp - 1], out=stack[sp - 1])
            elif op == OP_EXP:
                stack[sp - 1] = np.exp(stack[sp - 1])
            elif op == OP_LOG:
                bad = stack[sp - 1] <= 0.0
                if bad.any():
                    raise DomainError("log of non-positive value", flat[int(np.argmax(bad))])
                stack[sp - 1] = np.log(stack[sp - 1])
            elif op == OP_SQRT:
                bad = stack[sp - 1] < 0.0
                if bad.any():
                    raise DomainError("sqrt of negative value", flat[int(np.argmax(bad))])
                stack[sp - 1] = np.sqrt(stack[sp - 1])
            elif op == OP_ABS:
                np.abs(stack[sp - 1], out=stack[sp - 1])
            else:  # pragma: no cover - compile_density never emits other codes
                raise ValueError(f"bad opcode {op}")
    return stack[0].reshape(xs.shape).copy() if xs.shape else float(stack[0][0])


def _f_values(f, ts: np.ndarray, mode: int, anchor: float, scale: float) -> np.ndarray:
    """Integrand values in panel coordinates, jacobian included."""
    if mode == 0:
        xs = ts
        if isinstance(f, CompiledDensity):
            fv = eval_many(f, xs)
        else:
            fv = _call_f(f, xs)
        return fv
    one_m = 1.0 - ts
    if mode == 1:
        xs = anchor + scale * ts / one_m
    else:
        xs = anchor - scale * ts / one_m
    if isinstance(f, CompiledDensity):
        fv = eval_many(f, xs)
    else:
        fv = _call_f(f, xs)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        jac = scale / (one_m * one_m)
        out = np.where(fv == 0.0, 0.0, fv * jac)
    return out


def _call_f(f, xs: np.ndarray) -> np.ndarray:
    try:
        fv = np.asarray(f(xs), dtype=float)
        if fv.shape == xs.shape:
            return fv
    except (TypeError, ValueError):
        pass
    return np.array([float(f(x)) for x in xs])


def _panel(f, lo: float, hi: float, mode: int, anchor: float, scale: float):
    c = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    fv = _f_values(f, c + hw * KRONROD_NODES, mode, anchor, scale)
    if np.isnan(fv).any():
        bad = int(np.argmax(np.isnan(fv)))
        raise DomainError("integrand evaluated to NaN", c + hw * KRONROD_NODES[bad])
    k = hw * float(KRONROD_WEIGHTS @ fv)
    g = hw * float(GAUSS_WEIGHTS @ fv)
    if not math.isfinite(k):
        return k, math.inf
    return k, abs(k - g)


def adapt(f, a: float, b: float, mode: int, anchor: float, rel_tol: float, abs_tol: float, max_subdiv: int, scale: float = 1.0):
    """Adaptive bisection on the worst panel.

    Returns ``(value, err, status, panels)`` with status 0 converged,
    1 divergent (non-finite panel), 2 subdivision budget exhausted.
    """
    if mode != 0 and a == 0.0 and b == 1.0:
        # on the rational map a tail with decay length ell occupies a layer of
        # width ~ell/scale at t=0; geometric seed edges keep such layers
        # visible to the error estimator no matter how small they are
        geo = np.geomspace(1e-18, 0.125, 13)
        edges = np.concatenate([[0.0], geo, np.linspace(0.125, 1.0, 8)[1:]])
    else:
        edges = np.linspace(a, b, 9)
    n_seed = len(edges) - 1
    heap = []  # (-err, ...) so the worst panel pops first
    total_v = 0.0
    total_e = 0.0
    count = n_seed
    serial = 0
    for i in range(n_seed):
        v, e = _panel(f, edges[i], edges[i + 1], mode, anchor, scale)
        if not math.isfinite(v):
            return math.inf, math.inf, 1, count
        heapq.heappush(heap, (-e, serial, edges[i], edges[i + 1], v))
        serial += 1
        total_v += v
        total_e += e
    while total_e > rel_tol * abs(total_v) + abs_tol:
        if count >= max_subdiv:
            return total_v, total_e, 2, count
        neg_e, _, lo, hi, v = heapq.heappop(heap)
        if -neg_e <= 0.0:
            # worst panel already reports zero error: remaining budget is drift
            heapq.heappush(heap, (neg_e, serial, lo, hi, v))
            return total_v, 0.0, 0, count
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # the worst panel is narrower than float spacing and still carries
            # the dominant error: no further refinement can certify this
            heapq.heappush(heap, (neg_e, serial, lo, hi, v))
            return total_v, total_e, 2, count
        total_v -= v
        total_e += neg_e
        for lo2, hi2 in ((lo, mid), (mid, hi)):
            v2, e2 = _panel(f, lo2, hi2, mode, anchor, scale)
            if not math.isfinite(v2):
                return math.inf, math.inf, 1, count
            heapq.heappush(heap, (-e2, serial, lo2, hi2, v2))
            serial += 1
            total_v += v2
            total_e += e2
        count += 2
    return total_v, max(total_e, 0.0), 0, count
