"""
Discrete graph energies on the uniform grid x_j = j/m.

Derivatives are finite differences: d1 is central in the interior and one-sided
second order at the endpoints, d2 is the central second difference at interior
nodes only. Leaving u'' out at the endpoints encodes the natural (Navier)
boundary condition. Every integral is a composite trapezoid sum with weights
dx * [1/2, 1, ..., 1, 1/2], and every gradient is the exact adjoint of that sum.
"""
from functools import lru_cache
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from elastic_obstacle_flow.constants.numeric_constants import NumericConstants
from elastic_obstacle_flow.exception.flow_exception import DomainError, GridMismatchError, ResolutionError
from elastic_obstacle_flow.model.grid_model import EnergyBreakdown, GridFunction

Grid = Union[GridFunction, np.ndarray, Sequence[float]]


def nodal(u: Grid) -> np.ndarray:
    if isinstance(u, GridFunction):
        return u.array
    return np.asarray(u, dtype=float)


def _require(values: np.ndarray, minimum: int) -> float:
    m = len(values) - 1
    if m < minimum:
        raise ResolutionError(f"need m >= {minimum}, got m={m}")
    return 1.0 / m


def _same_grid(*arrays: np.ndarray) -> None:
    if len({len(a) for a in arrays}) != 1:
        raise GridMismatchError(f"grid functions live on different grids: {[len(a) - 1 for a in arrays]}")


def trapezoid_weights(m: int) -> np.ndarray:
    weights = np.full(m + 1, 1.0 / m)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    return weights


def _slopes(values: np.ndarray, h: float) -> np.ndarray:
    a = np.empty_like(values)
    a[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    a[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    a[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return a


def _curvatures(values: np.ndarray, h: float) -> np.ndarray:
    # zero at the endpoints
    b = np.zeros_like(values)
    b[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (h * h)
    return b


def _slopes_adjoint(s: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(s)
    c = 1.0 / (2.0 * h)
    grad[2:] += c * s[1:-1]
    grad[:-2] -= c * s[1:-1]
    grad[0] += -3.0 * c * s[0]
    grad[1] += 4.0 * c * s[0]
    grad[2] += -c * s[0]
    grad[-1] += 3.0 * c * s[-1]
    grad[-2] += -4.0 * c * s[-1]
    grad[-3] += c * s[-1]
    return grad


def _curvatures_adjoint(t: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(t)
    c = 1.0 / (h * h)
    grad[2:] += c * t[1:-1]
    grad[:-2] += c * t[1:-1]
    grad[1:-1] -= 2.0 * c * t[1:-1]
    return grad


def d1(u: Grid) -> np.ndarray:
    """First derivative at every node."""
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    return _slopes(values, h)


def d2(u: Grid) -> np.ndarray:
    """Second derivative at the interior nodes 1..m-1."""
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    return _curvatures(values, h)[1:-1]


def bending(u: Grid) -> float:
    """Trapezoid sum of (u'')^2 (1 + u'^2)^(-5/2)."""
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    a, b = _slopes(values, h), _curvatures(values, h)
    return float(np.dot(trapezoid_weights(len(values) - 1), b * b * (1.0 + a * a) ** -2.5))


def length(u: Grid) -> float:
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_LENGTH_NODES)
    a = _slopes(values, h)
    return float(np.dot(trapezoid_weights(len(values) - 1), np.sqrt(1.0 + a * a)))


def _check_lambda(lam: float) -> None:
    if not lam >= 0.0:
        raise DomainError(f"length penalization lambda must be >= 0, got {lam}")


def energy(u: Grid, lam: float) -> EnergyBreakdown:
    _check_lambda(lam)
    return EnergyBreakdown.of(bending(u), length(u), lam)


def metric_weight(u_prev: Grid) -> np.ndarray:
    """1 / sqrt(1 + (u_prev')^2), the arclength weight of the movement penalty."""
    values = nodal(u_prev)
    h = _require(values, NumericConstants.MIN_LENGTH_NODES)
    a = _slopes(values, h)
    return 1.0 / np.sqrt(1.0 + a * a)


def penalty_of_displacement(delta: Grid, u_prev: Grid, tau: float) -> float:
    """(1 / 2 tau) * trapezoid sum of delta^2 / sqrt(1 + (u_prev')^2)."""
    delta, prev = nodal(delta), nodal(u_prev)
    _same_grid(delta, prev)
    if not tau > 0.0:
        raise DomainError(f"time step tau must be positive, got {tau}")
    weights = trapezoid_weights(len(prev) - 1)
    return float(np.dot(weights, delta * delta * metric_weight(prev))) / (2.0 * tau)


def penalty(v: Grid, u_prev: Grid, tau: float) -> float:
    v, prev = nodal(v), nodal(u_prev)
    _same_grid(v, prev)
    return penalty_of_displacement(v - prev, prev, tau)


def energy_gradient(u: Grid, lam: float) -> np.ndarray:
    """Gradient of the discrete E_lambda with respect to the interior nodal values; zero at the ends."""
    _check_lambda(lam)
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    weights = trapezoid_weights(len(values) - 1)
    a, b = _slopes(values, h), _curvatures(values, h)
    s = 1.0 + a * a
    bend_weight = s ** -2.5
    slope_sens = weights * (-5.0 * a * b * b * bend_weight / s + lam * a / np.sqrt(s))
    curv_sens = weights * 2.0 * b * bend_weight
    grad = _slopes_adjoint(slope_sens, h) + _curvatures_adjoint(curv_sens, h)
    grad[0] = 0.0
    grad[-1] = 0.0
    return grad


@lru_cache(maxsize=None)
def _difference_matrices(m: int) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    # the linear maps behind _slopes and _curvatures
    h = 1.0 / m
    j = np.arange(1, m)
    rows = np.concatenate([j, j, [0, 0, 0, m, m, m]])
    cols = np.concatenate([j + 1, j - 1, [0, 1, 2, m, m - 1, m - 2]])
    data = np.concatenate([np.full(m - 1, 0.5 / h), np.full(m - 1, -0.5 / h),
                           np.array([-3.0, 4.0, -1.0, 3.0, -4.0, 1.0]) * (0.5 / h)])
    slopes = sparse.csr_matrix((data, (rows, cols)), shape=(m + 1, m + 1))

    rows = np.concatenate([j, j, j])
    cols = np.concatenate([j - 1, j, j + 1])
    data = np.concatenate([np.full(m - 1, 1.0), np.full(m - 1, -2.0), np.full(m - 1, 1.0)]) / (h * h)
    curvatures = sparse.csr_matrix((data, (rows, cols)), shape=(m + 1, m + 1))
    return slopes, curvatures


def energy_hessian(u: Grid, lam: float) -> sparse.csr_matrix:
    """
    Hessian of the discrete E_lambda in the nodal values, pentadiagonal.

    With f(a, b) = b^2 (1 + a^2)^(-5/2) + lambda (1 + a^2)^(1/2) integrated over the slopes a
    and the curvatures b, this is S^T f_aa S + S^T f_ab C + C^T f_ab S + C^T f_bb C.
    The rows and columns of the pinned ends are included; callers restrict to the interior.
    """
    _check_lambda(lam)
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    m = len(values) - 1
    weights = trapezoid_weights(m)
    a, b = _slopes(values, h), _curvatures(values, h)
    s = 1.0 + a * a
    f_aa = weights * (-5.0 * b * b * s ** -4.5 * (1.0 - 6.0 * a * a) + lam * s ** -1.5)
    f_ab = weights * (-10.0 * a * b * s ** -3.5)
    f_bb = weights * (2.0 * s ** -2.5)
    slopes, curvatures = _difference_matrices(m)
    mixed = slopes.T @ sparse.diags(f_ab) @ curvatures
    hessian = (slopes.T @ sparse.diags(f_aa) @ slopes + mixed + mixed.T
               + curvatures.T @ sparse.diags(f_bb) @ curvatures)
    return hessian.tocsr()


def grad_G(v: Grid, u_prev: Grid, tau: float, lam: float) -> np.ndarray:
    """
    Gradient of G(v) = E_lambda(v) + P(v; u_prev, tau).

    Component j is d/d eps G(v + eps e_j) at eps = 0 for the trapezoid sums above,
    for every interior node j; the pinned end components are zero.
    """
    v, prev = nodal(v), nodal(u_prev)
    _same_grid(v, prev)
    if not tau > 0.0:
        raise DomainError(f"time step tau must be positive, got {tau}")
    weights = trapezoid_weights(len(prev) - 1)
    grad = energy_gradient(v, lam) + weights * (v - prev) * metric_weight(prev) / tau
    grad[0] = 0.0
    grad[-1] = 0.0
    return grad


def objective(v: Grid, u_prev: Grid, tau: float, lam: float) -> float:
    return energy(v, lam).penalized + penalty(v, u_prev, tau)


def first_variation(u: Grid, phi: Grid, lam: float, w: Optional[Grid] = None,
                    weight_from: Optional[Grid] = None) -> float:
    """
    The first variation of E_lambda at u tested against phi, plus the velocity term when w is given:

        sum_j omega_j [ 2 u'' phi'' / |g'|^5 - 5 (u'')^2 u' phi' / |g'|^7 + lambda u' phi' / |g'|
                        + w phi / sqrt(1 + (u_ref')^2) ],   |g'| = sqrt(1 + u'^2)

    with u_ref = weight_from, defaulting to u. For pinned phi this equals
    energy_gradient(u) . phi (+ the penalty part of grad_G when w = (u - u_ref) / tau).
    """
    _check_lambda(lam)
    values, test = nodal(u), nodal(phi)
    _same_grid(values, test)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    weights = trapezoid_weights(len(values) - 1)
    a, b = _slopes(values, h), _curvatures(values, h)
    pa, pb = _slopes(test, h), _curvatures(test, h)
    s = 1.0 + a * a
    integrand = 2.0 * b * pb * s ** -2.5 - 5.0 * b * b * a * pa * s ** -3.5 + lam * a * pa / np.sqrt(s)
    if w is not None:
        velocity = nodal(w)
        _same_grid(values, velocity)
        reference = values if weight_from is None else nodal(weight_from)
        integrand = integrand + velocity * test * metric_weight(reference)
    return float(np.dot(weights, integrand))


def energy_increment(u: Grid, delta: Grid, lam: float) -> float:
    """
    E_lambda(u + delta) - E_lambda(u) without cancellation.

    The increment stays accurate when delta is far below the resolution of u,
    which is the regime of very small time steps.
    """
    _check_lambda(lam)
    values, shift = nodal(u), nodal(delta)
    _same_grid(values, shift)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    weights = trapezoid_weights(len(values) - 1)
    a, b = _slopes(values, h), _curvatures(values, h)
    da, db = _slopes(shift, h), _curvatures(shift, h)
    s0 = 1.0 + a * a
    ds = da * (2.0 * a + da)
    s1 = s0 + ds
    w1 = s1 ** -2.5
    dw = s0 ** -2.5 * np.expm1(-2.5 * np.log1p(ds / s0))
    d_bending = db * (2.0 * b + db) * w1 + b * b * dw
    d_length = ds / (np.sqrt(s1) + np.sqrt(s0))
    return float(np.dot(weights, d_bending) + lam * np.dot(weights, d_length))


def l2_norm(u: Grid) -> float:
    values = nodal(u)
    return float(np.sqrt(np.dot(trapezoid_weights(len(values) - 1), values * values)))


def h_norm(u: Grid) -> float:
    """L2 norm of the interior second differences, the H = H^2 cap H^1_0 norm."""
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    b = _curvatures(values, h)
    return float(np.sqrt(np.dot(trapezoid_weights(len(values) - 1), b * b)))


def h2_norm(u: Grid) -> float:
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    a = _slopes(values, h)
    slope_sq = float(np.dot(trapezoid_weights(len(values) - 1), a * a))
    return float(np.sqrt(l2_norm(values) ** 2 + slope_sq + h_norm(values) ** 2))


def sup_norms(u: Grid) -> Tuple[float, float]:
    """(max |u|, max |u'|) over the nodes."""
    values = nodal(u)
    return float(np.max(np.abs(values))), float(np.max(np.abs(d1(values))))


def curvature(u: Grid) -> np.ndarray:
    """Graph curvature u'' / (1 + u'^2)^(3/2) at the interior nodes."""
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    a, b = _slopes(values, h), _curvatures(values, h)
    return (b / (1.0 + a * a) ** 1.5)[1:-1]


def third_differences(u: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    One-sided third differences at every node, NaN where the stencil leaves the grid.

    Returns:
        (right, left): right_j uses nodes j..j+3, left_j uses nodes j-3..j.
    """
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    forward = (values[3:] - 3.0 * values[2:-1] + 3.0 * values[1:-2] - values[:-3]) / h ** 3
    right = np.full_like(values, np.nan)
    left = np.full_like(values, np.nan)
    right[:-3] = forward
    left[3:] = forward
    return right, left


def one_sided_third_derivatives(u: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """
    Second-order one-sided estimates of u''' at every node, NaN where the stencil leaves the grid.

    right_j uses nodes j..j+4 with weights (-5/2, 9, -12, 7, -3/2) / h^3, left_j is its mirror on
    nodes j-4..j. Both carry the same h^2 u^(5) error, so their gap on smooth data is O(h^3).
    """
    values = nodal(u)
    h = _require(values, NumericConstants.MIN_DERIVATIVE_NODES)
    h3 = h ** 3
    right = np.full_like(values, np.nan)
    left = np.full_like(values, np.nan)
    right[:-4] = (-2.5 * values[:-4] + 9.0 * values[1:-3] - 12.0 * values[2:-2] + 7.0 * values[3:-1]
                  - 1.5 * values[4:]) / h3
    left[4:] = (2.5 * values[4:] - 9.0 * values[3:-1] + 12.0 * values[2:-2] - 7.0 * values[1:-3]
                + 1.5 * values[:-4]) / h3
    return right, left


def gradient_roundoff(u: Grid) -> float:
    """Size of the rounding error in one entry of energy_gradient at u."""
    values = nodal(u)
    m = len(values) - 1
    return NumericConstants.ROUNDOFF_FACTOR * NumericConstants.EPS * max(1.0, float(np.max(np.abs(values)))) * m ** 3
