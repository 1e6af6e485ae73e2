"""
Exponent algebra, the 1D profile, comparison functions and the hodograph map
"""
import logging
from typing import Union

import numpy as np

from ..models import DomainError, GammaParams, HodographDirection

logger = logging.getLogger(__name__)

Real = Union[float, np.ndarray]

CONSTRUCTION_TOL = 1e-12


def _power(x: np.ndarray, p: float) -> np.ndarray:
    """x**p for x > 0 through exp/log; 0 where x == 0 and p > 0"""
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(p * np.log(x[pos]))
    if p < 0:
        out[x == 0] = np.inf
    return out


def _as_array(x: Real) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def _unwrap(template: Real, out: np.ndarray) -> Real:
    if np.ndim(template) == 0:
        return float(out[0])
    return out.reshape(np.shape(template))


def derive_params(gamma: float) -> GammaParams:
    """Derive alpha, c_alpha, s and c_gamma from gamma in (0, 2)"""
    gamma = float(gamma)
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in the open interval (0, 2), got {gamma}")

    alpha = 2.0 / (2.0 + gamma)
    c_alpha = float(np.exp(-alpha * np.log(alpha)))
    c_alpha_check = float(np.exp((2.0 / (gamma + 2.0)) * np.log((gamma + 2.0) / 2.0)))
    if abs(c_alpha - c_alpha_check) > CONSTRUCTION_TOL * c_alpha:
        raise DomainError(
            f"c_alpha closed forms disagree for gamma={gamma}: {c_alpha} vs {c_alpha_check}")

    return GammaParams(
        gamma=gamma,
        alpha=alpha,
        c_alpha=c_alpha,
        s=2.0 * (alpha - 1.0),
        c_gamma=(2.0 - gamma) ** 2 / 16.0,
    )


def profile(params: GammaParams, t: Real, order: int = 0) -> Real:
    """c_alpha (t+)^alpha and its first two derivatives

    Derivatives at t = 0 are the signed infinities of the one-sided limit.
    """
    if order not in (0, 1, 2):
        raise DomainError(f"profile order must be 0, 1 or 2, got {order}")
    arr = _as_array(t)
    a, c = params.alpha, params.c_alpha
    out = np.zeros_like(arr)
    pos = arr > 0

    with np.errstate(over="ignore"):
        if order == 0:
            out[pos] = c * _power(arr[pos], a)
        elif order == 1:
            out[pos] = c * a * _power(arr[pos], a - 1.0)
            out[arr == 0] = np.inf
        else:
            out[pos] = c * a * (a - 1.0) * _power(arr[pos], a - 2.0)
            out[arr == 0] = -np.inf

    if np.isinf(out[pos]).any() or np.isnan(out).any():
        raise OverflowError(f"profile of order {order} left the binary64 range")
    return _unwrap(t, out)


def profile_inverse(params: GammaParams, u_val: Real) -> Real:
    """t >= 0 with profile(t) = u_val"""
    arr = _as_array(u_val)
    if (arr < 0).any():
        raise DomainError("profile_inverse needs nonnegative values")
    out = _power(arr / params.c_alpha, 1.0 / params.alpha)
    return _unwrap(u_val, out)


def comparison_psi_u(params: GammaParams, d: Real, mu: float) -> Real:
    """c_alpha d^alpha + mu d^(2 - alpha)"""
    arr = _as_array(d)
    if (arr < 0).any():
        raise DomainError("comparison functions need d >= 0")
    a = params.alpha
    out = params.c_alpha * _power(arr, a) + mu * _power(arr, 2.0 - a)
    return _unwrap(d, out)


def comparison_psi_w(params: GammaParams, d: Real, mu: float) -> Real:
    """d + mu d^(1 - s)"""
    arr = _as_array(d)
    if (arr < 0).any():
        raise DomainError("comparison functions need d >= 0")
    out = arr + mu * _power(arr, 1.0 - params.s)
    return _unwrap(d, out)


def hodograph(params: GammaParams, u_val: Real,
              direction: HodographDirection = HodographDirection.FORWARD) -> Real:
    """Forward: w = c_alpha^(-1/alpha) u^(1/alpha). Backward: u = c_alpha w^alpha."""
    arr = _as_array(u_val)
    if (arr < 0).any():
        raise DomainError("hodograph needs nonnegative values")
    direction = HodographDirection(direction)
    if direction is HodographDirection.FORWARD:
        out = _power(arr / params.c_alpha, 1.0 / params.alpha)
    else:
        out = params.c_alpha * _power(arr, params.alpha)
    return _unwrap(u_val, out)


def rescale_factor(params: GammaParams, rescaled: bool) -> float:
    """Amplitude of J_gamma minimizers relative to E_gamma minimizers"""
    if not rescaled:
        return 1.0
    return float(np.exp(0.5 * params.alpha * np.log(params.c_gamma)))


def dead_threshold(params: GammaParams, h: float, rescaled: bool = False) -> float:
    """Profile value half a cell away from the free boundary"""
    return rescale_factor(params, rescaled) * params.c_alpha * float(np.exp(params.alpha * np.log(0.5 * h)))


def regularization_floor(params: GammaParams, h: float, rescaled: bool = False) -> float:
    """Profile value one cell away from the free boundary"""
    return rescale_factor(params, rescaled) * params.c_alpha * float(np.exp(params.alpha * np.log(h)))


def layer_potential(params: GammaParams, d: Real) -> Real:
    """Closed form of the integral of u_0^(-gamma) over [0, d]"""
    arr = _as_array(d)
    if (arr < 0).any():
        raise DomainError("layer width must be nonnegative")
    p = 2.0 * params.alpha - 1.0
    out = _power(arr, p) * _power(np.array([params.c_alpha]), -params.gamma)[0] / p
    return _unwrap(d, out)


def potential(params: GammaParams, u_val: Real) -> Real:
    """u^(-gamma) on {u > 0}, 0 on the zero set"""
    arr = _as_array(u_val)
    out = np.zeros_like(arr)
    pos = arr > 0
    out[pos] = _power(arr[pos], -params.gamma)
    return _unwrap(u_val, out)


def euler_lagrange_rhs(params: GammaParams, u_val: Real) -> Real:
    """-(gamma/2) u^(-gamma-1), defined on u > 0"""
    arr = _as_array(u_val)
    if (arr <= 0).any():
        raise DomainError("the Euler-Lagrange right-hand side is defined for u > 0")
    out = -0.5 * params.gamma * _power(arr, -params.gamma - 1.0)
    return _unwrap(u_val, out)


def multiple_residual(params: GammaParams, a: float, t: Real) -> Real:
    """Residual of a * u_0(t) in Delta u = -(gamma/2) u^(-gamma-1)

    Nonpositive (supersolution) for a >= 1, nonnegative for a <= 1.
    """
    if a <= 0:
        raise DomainError(f"multiple must be positive, got {a}")
    arr = _as_array(t)
    if (arr <= 0).any():
        raise DomainError("multiples are evaluated in {t > 0}")
    g = params.gamma
    u0 = params.c_alpha * _power(arr, params.alpha)
    factor = float(np.exp((-g - 1.0) * np.log(a))) - a
    out = 0.5 * g * _power(u0, -g - 1.0) * factor
    return _unwrap(t, out)
