"""Numerically safe replacements for partial or overflow-prone operations.

Every guard is total on the reals and comes with an explicit derivative,
including a fixed convention at the (measure-zero) kink points so that
quasi-Newton optimization never sees NaN.
"""

from __future__ import annotations

import numpy as np

DIV_FLOOR = 1e-5
EXP_CAP = 10.0
LOG_FLOOR = 1e-10

# exp(q) < exp(EXP_CAP) + |q| is guaranteed below this, so clipping the
# argument at 700 (just under the float64 overflow point) is exact there.
_EXP_SAFE_ARG = 700.0


def guard_sqrt(q):
    """sqrt(|q|), defined for all reals."""
    return np.sqrt(np.abs(q))


def guard_sqrt_deriv(q):
    """d/dq sqrt(|q|) = sign(q) / (2 sqrt(|q|)); 0 at q = 0."""
    q = np.asarray(q, dtype=float)
    root = np.sqrt(np.abs(q))
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.sign(q) / (2.0 * root)
    return np.where(q == 0.0, 0.0, d)


def guard_exp(q):
    """min(exp(q), exp(10) + |q|): exact below the cap, linear above."""
    q = np.asarray(q, dtype=float)
    expv = np.exp(np.minimum(q, _EXP_SAFE_ARG))
    return np.minimum(expv, np.exp(EXP_CAP) + np.abs(q))


def guard_exp_deriv(q):
    """Derivative of the active branch: exp(q) below the cap, sign(q) above."""
    q = np.asarray(q, dtype=float)
    expv = np.exp(np.minimum(q, _EXP_SAFE_ARG))
    linear = np.exp(EXP_CAP) + np.abs(q)
    return np.where(expv <= linear, expv, np.sign(q))


def guard_div(den):
    """Clamp a denominator away from zero, preserving its sign.

    Values with |den| < 1e-5 are replaced by sign(den) * 1e-5, where the
    sign of an exact zero is taken as +1.
    """
    den = np.asarray(den, dtype=float)
    clamped = np.where(den >= 0.0, DIV_FLOOR, -DIV_FLOOR)
    return np.where(np.abs(den) >= DIV_FLOOR, den, clamped)


def guard_div_deriv(den):
    """1 outside the clamp region, 0 inside."""
    den = np.asarray(den, dtype=float)
    return np.where(np.abs(den) >= DIV_FLOOR, 1.0, 0.0)


def guard_log(q):
    """ln(max(|q|, 1e-10)), mirroring the absolute-value sqrt guard."""
    q = np.asarray(q, dtype=float)
    return np.log(np.maximum(np.abs(q), LOG_FLOOR))


def guard_log_deriv(q):
    """1/q where the |q| branch is active, 0 on the floor."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        d = 1.0 / q
    return np.where(np.abs(q) > LOG_FLOOR, d, 0.0)
