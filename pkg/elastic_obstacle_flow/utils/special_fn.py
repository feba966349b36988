"""
Elliptic integrals and Jacobi elliptic functions.

Everything here takes the modulus q, not the parameter m = q**2 used by
scipy.special. Incomplete integrals are computed by adaptive Gauss-Kronrod
quadrature of their defining integrals, extended to the whole real line by

    F(x + pi, q) = F(x, q) + 2 K(q),    E(x + pi, q) = E(x, q) + 2 E(q).

The amplitude am(., q) inverts F(., q). Scalar arguments are inverted by a
safeguarded Newton iteration on the quadrature F; array arguments use the
descending arithmetic-geometric-mean recursion. Both reduce x into
[-K(q), K(q)] first, using am(x + 2K, q) = am(x, q) + pi.
"""
import math
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy import integrate

from elastic_obstacle_flow.exception.flow_exception import DomainError

ArrayLike = Union[float, np.ndarray]

_QUAD_OPTIONS = {"epsabs": 1e-15, "epsrel": 1e-14, "limit": 200}
_NEWTON_MAX_ITER = 100
_AGM_MAX_ITER = 64


def _check_modulus(q: float) -> None:
    if not (0.0 <= q < 1.0):
        raise DomainError(f"modulus q={q} outside [0, 1)")


def _first_kind_integrand(theta: float, q2: float) -> float:
    return 1.0 / math.sqrt(1.0 - q2 * math.sin(theta) ** 2)


def _second_kind_integrand(theta: float, q2: float) -> float:
    return math.sqrt(1.0 - q2 * math.sin(theta) ** 2)


def _quad(integrand, upper: float, q: float) -> float:
    if upper == 0.0:
        return 0.0
    value, _ = integrate.quad(integrand, 0.0, upper, args=(q * q,), **_QUAD_OPTIONS)
    return value


def _reduce_angle(x: float) -> Tuple[int, float]:
    # x = k*pi + r with r in [-pi/2, pi/2]
    k = math.floor(x / math.pi + 0.5)
    return k, x - k * math.pi


@lru_cache(maxsize=256)
def _complete_first(q: float) -> float:
    return _quad(_first_kind_integrand, math.pi / 2.0, q)


@lru_cache(maxsize=256)
def _complete_second(q: float) -> float:
    return _quad(_second_kind_integrand, math.pi / 2.0, q)


def ellip_F(x: float, q: float) -> float:
    """
    Incomplete elliptic integral of the first kind.

    Args:
        x: Amplitude angle, any finite real.
        q: Modulus in [0, 1); q = 1 is admitted for |x| < pi/2.

    Returns:
        The integral of (1 - q^2 sin^2)^(-1/2) over [0, x].

    Raises:
        DomainError: q outside [0, 1], or q = 1 with |x| >= pi/2.
    """
    if not math.isfinite(x):
        raise DomainError(f"amplitude x={x} must be finite")
    if q == 1.0:
        if abs(x) >= math.pi / 2.0:
            raise DomainError(f"F(x, 1) diverges for |x| >= pi/2, got x={x}")
        # inverse Gudermannian
        return math.atanh(math.sin(x))
    _check_modulus(q)
    k, r = _reduce_angle(x)
    return 2.0 * k * _complete_first(q) + math.copysign(_quad(_first_kind_integrand, abs(r), q), r)


def ellip_E_inc(x: float, q: float) -> float:
    """Incomplete elliptic integral of the second kind, the integral of (1 - q^2 sin^2)^(1/2) over [0, x]."""
    if not math.isfinite(x):
        raise DomainError(f"amplitude x={x} must be finite")
    _check_modulus(q)
    k, r = _reduce_angle(x)
    return 2.0 * k * _complete_second(q) + math.copysign(_quad(_second_kind_integrand, abs(r), q), r)


def ellip_K(q: float) -> float:
    """Complete integral K(q) = F(pi/2, q); K(1) is reported as +inf."""
    if q == 1.0:
        return math.inf
    _check_modulus(q)
    return _complete_first(float(q))


def ellip_E(q: float) -> float:
    _check_modulus(q)
    return _complete_second(float(q))


def _invert_on_quarter(target: float, q: float, quarter: float) -> float:
    """Solves F(phi, q) = target for phi in [0, pi/2], target in [0, K(q)]."""
    if target <= 0.0:
        return 0.0
    if target >= quarter:
        return math.pi / 2.0
    lo, hi = 0.0, math.pi / 2.0
    phi = target * (math.pi / 2.0) / quarter
    for _ in range(_NEWTON_MAX_ITER):
        residual = _quad(_first_kind_integrand, phi, q) - target
        if residual > 0.0:
            hi = phi
        else:
            lo = phi
        if abs(residual) <= 1e-15 * max(1.0, target):
            break
        candidate = phi - residual * math.sqrt(1.0 - (q * math.sin(phi)) ** 2)
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - phi) <= 4e-16 * max(1.0, phi):
            phi = candidate
            break
        phi = candidate
    return phi


def _am_newton(x: float, q: float) -> float:
    if q == 0.0:
        return x
    quarter = _complete_first(q)
    j = math.floor(x / (2.0 * quarter) + 0.5)
    r = x - 2.0 * quarter * j
    return j * math.pi + math.copysign(_invert_on_quarter(abs(r), q, quarter), r)


def _am_agm(x: np.ndarray, q: float) -> np.ndarray:
    if q == 0.0:
        return x.copy()
    quarter = _complete_first(q)
    j = np.floor(x / (2.0 * quarter) + 0.5)
    r = x - 2.0 * quarter * j

    a, b, c = 1.0, math.sqrt(1.0 - q * q), q
    a_seq, c_seq = [a], [c]
    for _ in range(_AGM_MAX_ITER):
        if abs(c) <= np.finfo(float).eps * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)

    levels = len(a_seq) - 1
    phi = (2.0 ** levels) * a_seq[levels] * r
    for level in range(levels, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_seq[level] / a_seq[level] * np.sin(phi)))
    return j * math.pi + phi


def am(x: ArrayLike, q: float) -> ArrayLike:
    """
    Jacobi amplitude, the inverse of F(., q); strictly increasing in x.

    Raises:
        DomainError: q outside [0, 1).
    """
    _check_modulus(q)
    if np.ndim(x) == 0:
        return _am_newton(float(x), float(q))
    return _am_agm(np.asarray(x, dtype=float), float(q))


def sn(x: ArrayLike, q: float) -> ArrayLike:
    return np.sin(am(x, q))


def cn(x: ArrayLike, q: float) -> ArrayLike:
    return np.cos(am(x, q))


def dn(x: ArrayLike, q: float) -> ArrayLike:
    return np.sqrt(1.0 - (q * sn(x, q)) ** 2)


def ellipj(x: ArrayLike, q: float) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """(sn, cn, dn, am) from a single amplitude evaluation."""
    phi = am(x, q)
    s = np.sin(phi)
    return s, np.cos(phi), np.sqrt(1.0 - (q * s) ** 2), phi
