"""Scalar kernels: Lambert W, the per-center closed-form coverage optimum,
golden-section search and central finite differences.

The closed form maximises, for one center and a combined multiplier
``t = nu + mu_l``,

    G(x) = N(x) * (w^d x + l^d - delta0) - t * x,   N(x) = exp(lam (r^a - w^a x))

over x in [0, 1]. With s = lam w^a and a = s (l^d - delta0) / w^d the
stationary point is

    x = (1 - a - W((t / w^d) exp(1 - lam r^a - a))) / s

and G is unimodal, so clipping to [0, 1] gives the maximiser.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .model import GameInstance

_HALLEY_MAX_ITERS = 50
_LOG_SPACE_CUTOFF = 500.0  # exp(500) is near the top of the double range
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class Clamp(str, Enum):
    LOWER = "lower"
    INTERIOR = "interior"
    UPPER = "upper"


@dataclass(frozen=True)
class ClosedFormResult:
    y_star: float
    x_star: float
    beta_interior: float
    clamped: Clamp
    degenerate: str = ""  # "", "lam_wa_zero" or "wd_zero"


# --------------------------------------------------------------------------
# Lambert W, principal branch, nonnegative arguments
# --------------------------------------------------------------------------


def _halley(w: np.ndarray, z: np.ndarray) -> np.ndarray:
    for _ in range(_HALLEY_MAX_ITERS):
        ew = np.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0.0, f / np.where(denom != 0.0, denom, 1.0), 0.0)
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(w))):
            break
    return w


def _newton_log(w: np.ndarray, log_z: np.ndarray) -> np.ndarray:
    # solves w + log(w) = log_z, the log form of w e^w = z, for large z
    for _ in range(_HALLEY_MAX_ITERS):
        f = w + np.log(w) - log_z
        step = f / (1.0 + 1.0 / w)
        w = w - step
        if np.all(np.abs(step) <= 1e-15 * w):
            break
    return w


def lambert_w0_of_exp(log_z) -> np.ndarray:
    """W0(exp(log_z)) for any real log_z (vectorised).

    Working from the logarithm keeps the kernel usable when the argument
    itself would overflow.
    """
    log_z = np.asarray(log_z, dtype=float)
    out = np.empty_like(log_z)
    big = log_z > _LOG_SPACE_CUTOFF
    if np.any(big):
        l1 = log_z[big]
        l2 = np.log(l1)
        out[big] = _newton_log(l1 - l2 + l2 / l1, l1)
    small = ~big
    if np.any(small):
        z = np.exp(log_z[small])
        out[small] = _w0_direct(z)
    return out


def _w0_direct(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    guess = np.empty_like(z)
    low = z <= math.e
    guess[low] = np.log1p(z[low])
    if np.any(~low):
        l1 = np.log(z[~low])
        l2 = np.log(l1)
        guess[~low] = l1 - l2 + l2 / l1
    w = _halley(guess, z)
    w[z == 0.0] = 0.0
    return w


def lambert_w0(z):
    """Principal branch W0(z) for z >= 0; scalar in, scalar out."""
    arr = np.asarray(z, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"lambert_w0 needs z >= 0, got {z!r}")
    if np.any(np.isinf(arr)):
        raise DomainError("lambert_w0 argument is infinite; use lambert_w0_of_exp")
    w = _w0_direct(np.atleast_1d(arr))
    return float(w[0]) if arr.ndim == 0 else w.reshape(arr.shape)


# --------------------------------------------------------------------------
# Closed-form per-center optimum
# --------------------------------------------------------------------------


def closed_form_x(wd, ld, ra, wa, lam: float, t, delta0: float):
    """Vectorised maximiser of G over [0, 1].

    Returns ``(x_star, beta_interior)``; ``beta_interior`` is the unclipped
    stationary point (``nan`` on degenerate centers, whose optimum is at a
    bound or given by a simpler formula).
    """
    wd, ld, ra, wa, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (wd, ld, ra, wa, t)))
    s = lam * wa
    beta = np.full(wd.shape, np.nan)
    x = np.empty(wd.shape)

    regular = (s > 0) & (wd > 0)
    if np.any(regular):
        sr, wr = s[regular], wd[regular]
        a = sr * (ld[regular] - delta0) / wr
        tr = t[regular]
        w = np.zeros(sr.shape)
        pos = tr > 0
        if np.any(pos):
            log_arg = np.log(tr[pos]) - np.log(wr[pos]) + 1.0 - lam * ra[regular][pos] - a[pos]
            w[pos] = lambert_w0_of_exp(log_arg)
        b = (1.0 - a - w) / sr
        beta[regular] = b
        x[regular] = np.clip(b, 0.0, 1.0)

    flat = s == 0
    if np.any(flat):
        # attack weight ignores coverage: G is linear with slope N * w^d - t
        slope = np.exp(lam * ra[flat]) * wd[flat] - t[flat]
        x[flat] = np.where(slope > 0, 1.0, 0.0)

    nodef = (s > 0) & (wd == 0)
    if np.any(nodef):
        gap = delta0 - ld[nodef]
        sn, tn, ran = s[nodef], t[nodef], ra[nodef]
        xn = np.zeros(sn.shape)
        pull = gap > 0
        # G = -gap N(x) - t x is concave; G' = s gap N(x) - t
        with np.errstate(divide="ignore"):
            root = (lam * ran - np.log(tn / (sn * np.where(pull, gap, 1.0)))) / sn
        xn[pull] = np.clip(root[pull], 0.0, 1.0)
        x[nodef] = xn
    return x, beta


def g_value_x(wd, ld, ra, wa, lam: float, t, x, delta0: float):
    """G evaluated elementwise (coverage-space per-center Lagrangian term)."""
    n_x = np.exp(lam * (np.asarray(ra) - np.asarray(wa) * x))
    return n_x * (wd * x + ld - delta0) - t * x


def closed_form_y(inst: GameInstance, j: int, nu: float, mu_l: float, delta0: float) -> ClosedFormResult:
    if nu < 0 or mu_l < 0:
        raise DomainError(f"dual multipliers must be nonnegative (nu={nu}, mu_l={mu_l})")
    wd, ld = float(inst.w_def[j]), float(inst.loss_def[j])
    ra, wa = float(inst.reward_att[j]), float(inst.w_att[j])
    x, beta = closed_form_x(wd, ld, ra, wa, inst.lam, nu + mu_l, delta0)
    x_star, b = float(x), float(beta)
    degenerate = ""
    if inst.lam * wa == 0:
        degenerate = "lam_wa_zero"
    elif wd == 0:
        degenerate = "wd_zero"
    if math.isnan(b):
        b = x_star
    if b <= 0:
        clamped = Clamp.LOWER
    elif b >= 1:
        clamped = Clamp.UPPER
    else:
        clamped = Clamp.INTERIOR
    return ClosedFormResult(
        y_star=math.exp(-inst.lam * wa * x_star),
        x_star=x_star,
        beta_interior=b,
        clamped=clamped,
        degenerate=degenerate,
    )


def stationarity_residual(inst: GameInstance, j: int, t: float, x: float, delta0: float) -> float:
    """dG/dx at x; vanishes at interior optima."""
    s = inst.lam * inst.w_att[j]
    n_x = math.exp(inst.lam * (inst.reward_att[j] - inst.w_att[j] * x))
    return float(n_x * (inst.w_def[j] - s * (inst.w_def[j] * x + inst.loss_def[j] - delta0)) - t)


# --------------------------------------------------------------------------
# Generic 1-D and gradient helpers
# --------------------------------------------------------------------------


def maximize_unimodal(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-9):
    """Golden-section maximisation of a unimodal ``f`` on [lo, hi].

    The two endpoints are compared with the final bracket midpoint, so
    monotone functions return the exact boundary.
    """
    if lo > hi:
        raise DomainError(f"empty interval [{lo}, {hi}]")
    if tol <= 0:
        raise DomainError("tol must be positive")
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    best_x, best_f = mid, f(mid)
    for edge in (float(lo), float(hi)):
        fe = f(edge)
        if fe > best_f:
            best_x, best_f = edge, fe
    return best_x, best_f


def finite_diff_grad(f: Callable[[np.ndarray], float], point: Sequence[float], h: float = 1e-5) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    grad = np.empty_like(p)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        grad[i] = (f(p + e) - f(p - e)) / (2.0 * h)
    return grad
