import logging
import math
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from scipy import integrate, interpolate, optimize

from elastic_obstacle_flow.constants.kinds import CriticalBranch
from elastic_obstacle_flow.constants.numeric_constants import NumericConstants
from elastic_obstacle_flow.exception.flow_exception import DomainError, NonConvergenceError, ResolutionError
from elastic_obstacle_flow.model.elastica_model import ElasticaArc
from elastic_obstacle_flow.model.grid_model import GridFunction
from elastic_obstacle_flow.utils import special_fn

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

_Q = NumericConstants.Q_RECT


@lru_cache(maxsize=None)
def _half_integral(upper_angle: float) -> float:
    # int_0^z (1 + y^2)^(-5/4) dy with y = tan(t), upper_angle = arctan(z)
    value, _ = integrate.quad(lambda t: math.sqrt(math.cos(t)), 0.0, upper_angle,
                              epsabs=1e-14, epsrel=1e-13, limit=200)
    return value


class ElasticaService:
    """
    Rectangular elastica and the obstacle thresholds built on it.

    The rectangular elastica is the unit-speed arc with curvature
    k(s) = -sqrt(2) cn(s - K, 1/sqrt(2)), K = K(1/sqrt(2)), started at the origin.
    Its cuts [0, s0], rotated and dilated so that the chord runs from (0, 0) to
    (1/2, h), give the left half of the symmetric stationary profile under a
    symmetric cone of height h.
    """

    def __init__(self):
        self.quarter = special_fn.ellip_K(_Q)
        logger.info("Initialized ElasticaService")

    # ---- rectangular elastica ----

    def rect_curvature(self, s: ArrayLike) -> ArrayLike:
        return -NumericConstants.SQRT2 * special_fn.cn(np.asarray(s, dtype=float) - self.quarter, _Q)

    def rect_angle(self, s: ArrayLike, theta0: float = 0.0) -> ArrayLike:
        """Closed-form tangent angle theta0 + int_0^s k."""
        shifted = np.asarray(s, dtype=float) - self.quarter
        return theta0 - 2.0 * np.arcsin(special_fn.sn(shifted, _Q) / NumericConstants.SQRT2) - 0.5 * math.pi

    def _arc_arrays(self, s_max: float, samples: int, theta0: float) -> Tuple[np.ndarray, ...]:
        step = s_max / (samples - 1)
        s = step * np.arange(samples, dtype=float)
        s[-1] = s_max
        k = self.rect_curvature(s)
        k_mid = self.rect_curvature(s[:-1] + 0.5 * step)

        theta = np.empty(samples)
        theta[0] = theta0
        theta[1:] = theta0 + np.cumsum(step / 6.0 * (k[:-1] + 4.0 * k_mid + k[1:]))

        # classical RK4 stages for (x, y); the angle stages only need k
        base = theta[:-1]
        stages = (base, base + 0.5 * step * k[:-1], base + 0.5 * step * k_mid, base + step * k_mid)
        dx = step / 6.0 * (np.cos(stages[0]) + 2.0 * np.cos(stages[1]) + 2.0 * np.cos(stages[2]) + np.cos(stages[3]))
        dy = step / 6.0 * (np.sin(stages[0]) + 2.0 * np.sin(stages[1]) + 2.0 * np.sin(stages[2]) + np.sin(stages[3]))
        x = np.concatenate([[0.0], np.cumsum(dx)])
        y = np.concatenate([[0.0], np.cumsum(dy)])
        return s, k, theta, x, y

    def rect_arc(self, s_max: float, samples: int, theta0: float = 0.0) -> ElasticaArc:
        """
        Integrates the rectangular elastica on [0, s_max] with a fixed-step RK4 scheme.

        Args:
            s_max: Arc length, 0 < s_max <= 2 K(1/sqrt(2)).
            samples: Number of samples including both ends, at least 2.
            theta0: Initial tangent angle.

        Raises:
            DomainError: s_max or samples out of range.
        """
        if not (0.0 < s_max <= 2.0 * self.quarter * (1.0 + 1e-12)):
            raise DomainError(f"s_max={s_max} outside (0, 2K(1/sqrt(2))] = (0, {2.0 * self.quarter}]")
        if samples < 2:
            raise DomainError(f"rect_arc needs at least 2 samples, got {samples}")
        s, k, theta, x, y = self._arc_arrays(float(s_max), int(samples), float(theta0))
        return ElasticaArc(s_grid=s.tolist(), k=k.tolist(), theta=theta.tolist(), x=x.tolist(), y=y.tolist())

    # ---- thresholds ----

    def c0(self) -> float:
        """2 * int_0^inf (1 + y^2)^(-5/4) dy."""
        return 2.0 * _half_integral(0.5 * math.pi)

    def h_star(self) -> float:
        """Height of a symmetric cone above which no pinned symmetric minimizer exists."""
        return 2.0 / self.c0()

    def clamped_objective(self, z: float) -> float:
        """(1/2) (2 + 2 (1 + z^2)^(-1/4)) / (c0 - G(z)); z = inf gives the tail limit."""
        z = float(z)
        decay = 0.0 if math.isinf(z) else (1.0 + z * z) ** -0.25
        return 0.5 * (2.0 + 2.0 * decay) / (self.c0() - _half_integral(math.atan(z)))

    def h_star_clamped(self) -> float:
        """Maximum of clamped_objective over z >= 0: coarse scan, then golden section."""
        grid = np.linspace(0.0, NumericConstants.CLAMPED_SCAN_MAX, NumericConstants.CLAMPED_SCAN_POINTS)
        values = np.array([self.clamped_objective(z) for z in grid])
        best = int(np.argmax(values))
        tail = self.clamped_objective(math.inf)
        if best == 0 or best == len(grid) - 1:
            logger.warning(f"clamped threshold maximum sits at the scan edge z={grid[best]}")
            return float(max(values[best], tail))
        result = optimize.minimize_scalar(lambda z: -self.clamped_objective(z),
                                          bracket=(grid[best - 1], grid[best], grid[best + 1]),
                                          method='golden', tol=1e-10)
        return float(max(-result.fun, values[best], tail))

    # ---- symmetric stationary profile ----

    def tip_height(self, s0: float, samples: int = NumericConstants.SHOOTING_SAMPLES) -> float:
        """Cone height reached by the cut [0, s0] once its end tangent is rotated to horizontal and its chord scaled to 1/2."""
        _, _, theta, x, y = self._arc_arrays(float(s0), samples, 0.0)
        c, s = math.cos(theta[-1]), math.sin(theta[-1])
        chord_x = c * x[-1] + s * y[-1]
        chord_y = -s * x[-1] + c * y[-1]
        return 0.5 * chord_y / chord_x

    def symmetric_stationary(self, h: float, m: int) -> GridFunction:
        """
        Symmetric stationary profile under a symmetric cone of height h.

        Shoots on the cut length s0 so that tip_height(s0) = h, maps the cut onto
        [0, 1/2] and mirrors it onto [1/2, 1].

        Raises:
            DomainError: h <= 0 or h >= h_star(); no minimizer exists above h_star().
            ResolutionError: m odd or m < 16.
            NonConvergenceError: the shooting fails to bracket or the arc is not a graph.
        """
        if m % 2 != 0 or m < NumericConstants.MIN_STATIONARY_NODES:
            raise ResolutionError(f"symmetric_stationary needs an even m >= 16, got m={m}")
        threshold = self.h_star()
        if not (0.0 < h < threshold):
            raise DomainError(f"cone height h={h} outside (0, h_*), h_*={threshold:.6f}: there exists no minimizer")

        lo = 1e-9 * self.quarter
        mismatch_lo, mismatch_hi = self.tip_height(lo) - h, self.tip_height(self.quarter) - h
        if not (mismatch_lo < 0.0 < mismatch_hi):
            raise NonConvergenceError(f"shooting on s0 failed to bracket h={h}")
        s0 = optimize.brentq(lambda cut: self.tip_height(cut) - h, lo, self.quarter, xtol=1e-14, maxiter=200)
        logger.info(f"Shooting for h={h} converged at s0={s0:.12f}")

        _, _, theta, x, y = self._arc_arrays(s0, NumericConstants.PROFILE_OVERSAMPLING * m + 1, 0.0)
        c, s = math.cos(theta[-1]), math.sin(theta[-1])
        chord = c * x + s * y
        rise = -s * x + c * y
        scale = 0.5 / chord[-1]
        xs, ys = chord * scale, rise * scale
        xs[-1] = 0.5
        if np.any(np.diff(xs) <= 0.0):
            raise NonConvergenceError(f"rotated elastica cut for h={h} is not a graph")
        spline = interpolate.CubicHermiteSpline(xs, ys, np.tan(theta - theta[-1]))

        half = m // 2
        left = spline(np.arange(half + 1, dtype=float) / m)
        left[0] = 0.0
        left[-1] = h
        return GridFunction.of(np.concatenate([left, left[-2::-1]]))

    # ---- critical points of E_lambda ----

    def classify(self, branch: CriticalBranch, alpha: float, q: float) -> Tuple[float, float]:
        """
        Amplitude A and multiplier lambda of the critical curvature A cn(alpha s + s0, q)
        (cn branch: A^2 = 4 alpha^2 q^2, lambda = 2 alpha^2 (2 q^2 - 1)) or
        A dn(alpha s + s0, q) (dn branch: A^2 = 4 alpha^2, lambda = 2 alpha^2 (2 - q^2)).
        """
        if not alpha > 0.0:
            raise DomainError(f"scaling alpha must be positive, got {alpha}")
        if not 0.0 <= q < 1.0:
            raise DomainError(f"modulus q={q} outside [0, 1)")
        if CriticalBranch(branch) == CriticalBranch.CN:
            return 2.0 * alpha * q, 2.0 * alpha ** 2 * (2.0 * q * q - 1.0)
        return 2.0 * alpha, 2.0 * alpha ** 2 * (2.0 - q * q)

    def critical_curvature(self, s: ArrayLike, branch: CriticalBranch, alpha: float, q: float,
                           phase: float = 0.0) -> ArrayLike:
        amplitude, _ = self.classify(branch, alpha, q)
        argument = alpha * np.asarray(s, dtype=float) + phase
        if CriticalBranch(branch) == CriticalBranch.CN:
            return amplitude * special_fn.cn(argument, q)
        return amplitude * special_fn.dn(argument, q)
