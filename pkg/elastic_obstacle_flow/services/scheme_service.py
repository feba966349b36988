import logging
import math
import time
import warnings
from collections import deque
from typing import Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from elastic_obstacle_flow.constants.app_constants import AppConstants
from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.constants.kinds import InterpolantKind
from elastic_obstacle_flow.constants.numeric_constants import NumericConstants
from elastic_obstacle_flow.exception.flow_exception import (DegenerateDatumError, DomainError, GridMismatchError,
                                                            InfeasibleStartError, NonConvergenceError)
from elastic_obstacle_flow.model.grid_model import GridFunction, ObstacleSpec
from elastic_obstacle_flow.model.scheme_model import (DiscreteMeasure, FlowResult, Horizon, InnerSolution,
                                                      SchemeParams, StepRecord)
from elastic_obstacle_flow.services.diagnostics_service import DiagnosticsService
from elastic_obstacle_flow.utils import energy as en
from elastic_obstacle_flow.utils.energy import Grid

logger = logging.getLogger(__name__)

Obstacle = Union[ObstacleSpec, np.ndarray]


def _obstacle_nodes(psi: Obstacle, m: int) -> np.ndarray:
    nodes = psi.on_grid(m) if isinstance(psi, ObstacleSpec) else np.asarray(psi, dtype=float)
    if len(nodes) != m + 1:
        raise GridMismatchError(f"obstacle sampled on m={len(nodes) - 1} does not match m={m}")
    return nodes


def _violations(values: np.ndarray, psi_nodes: np.ndarray, activation_tol: float) -> np.ndarray:
    slack = activation_tol * (1.0 + np.abs(psi_nodes))
    return np.flatnonzero(values[1:-1] < psi_nodes[1:-1] - slack[1:-1]) + 1


class SchemeService:
    """
    Minimizing movements for the obstacle problem of the length-penalized elastic flow.

    Step i minimizes G_i(v) = E_lambda(v) + (1 / 2 tau) int (v - u_{i-1})^2 / sqrt(1 + u_{i-1}'^2)
    over pinned grid functions with v >= psi at the interior nodes.
    """

    def __init__(self, diagnostics_service: DiagnosticsService):
        self.diagnostics_service = diagnostics_service
        logger.info("Initialized SchemeService")

    # ---- parameters ----

    @staticmethod
    def radius(M0: float, penalized_energy: float) -> float:
        """rho = max{(1 + 4 M0^2)^(5/4), sqrt(2)} * E_lambda(u0)^(1/2)."""
        return max((1.0 + 4.0 * M0 * M0) ** 1.25, NumericConstants.SQRT2) * math.sqrt(max(penalized_energy, 0.0))

    @staticmethod
    def horizon(M0: float, rho: float) -> float:
        """Largest T with sqrt(2) (1 + 4 M0^2)^(1/16) rho T^(1/8) <= M0 / 2."""
        return (M0 / (2.0 * NumericConstants.SQRT2 * (1.0 + 4.0 * M0 * M0) ** 0.0625 * rho)) ** 8

    def auto_horizon(self, u0: Grid, lam: float) -> Horizon:
        M0 = en.sup_norms(u0)[1]
        if M0 == 0.0:
            raise DegenerateDatumError("initial datum is flat (M0 = 0): T cannot be selected automatically, "
                                       "supply an explicit T")
        rho = self.radius(M0, en.energy(u0, lam).penalized)
        T = self.horizon(M0, rho)
        if not T > 0.0:
            raise DegenerateDatumError(f"automatic horizon underflows for M0={M0}, rho={rho}")
        return Horizon(M0=M0, rho=rho, T=T)

    def build_params(self, u0: Grid, lam: float, n: int, T: Union[str, float] = 'auto',
                     inner_tol: float = AppConstants.DEFAULT_INNER_TOL,
                     inner_max_iter: int = AppConstants.DEFAULT_INNER_MAX_ITER,
                     activation_tol: float = AppConstants.DEFAULT_ACTIVATION_TOL) -> SchemeParams:
        values = en.nodal(u0)
        if T == 'auto':
            horizon = self.auto_horizon(values, lam)
        else:
            M0 = en.sup_norms(values)[1]
            horizon = Horizon(M0=M0, rho=self.radius(M0, en.energy(values, lam).penalized), T=float(T))
        return SchemeParams.of(lam=lam, m=len(values) - 1, n=n, T=horizon.T, M0=horizon.M0, rho=horizon.rho,
                               inner_tol=inner_tol, inner_max_iter=inner_max_iter, activation_tol=activation_tol)

    # ---- one step ----

    def inner_minimize(self, u_prev: Grid, psi: Obstacle, tau: float, lam: float,
                       tol: float = AppConstants.DEFAULT_INNER_TOL,
                       max_iter: int = AppConstants.DEFAULT_INNER_MAX_ITER,
                       activation_tol: float = AppConstants.DEFAULT_ACTIVATION_TOL) -> InnerSolution:
        """
        Minimizes G(u_prev + delta) over the displacement delta, starting from delta = 0.

        Each iteration first tries a projected Newton step: nodes sitting on the
        obstacle with the gradient pushing into it are clamped, the Hessian is solved
        on the remaining interior nodes and the step is cut back until a monotone
        Armijo test passes. When the Newton direction is unusable the iteration falls
        back to a projected gradient step with Barzilai-Borwein length in the metric
        of the movement penalty, accepted against the largest of the last few values.
        That reference never exceeds G(u_prev), so the result does not either.

        The energy part of the objective is the cancellation-free increment
        E(u_prev + delta) - E(u_prev), so small steps stay resolved. The solve stops
        once the relative projected gradient is below tol, or below the rounding
        level of the gradient when that is larger. A solve that stops improving
        within STALL_RATIO of the rounding level also counts as converged.

        Raises:
            DomainError: tau <= 0.
            InfeasibleStartError: u_prev lies below psi.
            NonConvergenceError: the budget is exhausted or the line search stalls.
        """
        if not tau > 0.0:
            raise DomainError(f"time step tau must be positive, got {tau}")
        prev = en.nodal(u_prev)
        m = len(prev) - 1
        psi_nodes = _obstacle_nodes(psi, m)
        bad = _violations(prev, psi_nodes, activation_tol)
        if len(bad):
            raise InfeasibleStartError(f"previous iterate lies below the obstacle at nodes {bad[:10].tolist()}")

        h = 1.0 / m
        metric = en.trapezoid_weights(m) * en.metric_weight(prev) / tau
        lower = np.minimum(psi_nodes - prev, 0.0)
        lower[0] = lower[-1] = 0.0
        upper = np.full(m + 1, np.inf)
        upper[0] = upper[-1] = 0.0

        def value_of(delta: np.ndarray) -> float:
            return en.energy_increment(prev, delta, lam) + 0.5 * float(np.dot(metric, delta * delta))

        def gradient_of(delta: np.ndarray) -> np.ndarray:
            g = en.energy_gradient(prev + delta, lam) + metric * delta
            g[0] = g[-1] = 0.0
            return g

        def projected(delta: np.ndarray, g: np.ndarray) -> np.ndarray:
            pg = g.copy()
            on_bound = delta <= lower
            pg[on_bound] = np.minimum(g[on_bound], 0.0)
            pg[0] = pg[-1] = 0.0
            return pg

        def allowance(value: float) -> float:
            return NumericConstants.ARMIJO_SLACK * NumericConstants.EPS * abs(value)

        interior = np.arange(1, m)
        penalty_hessian = sparse.diags(metric)

        def newton_trial(delta: np.ndarray, value: float, g: np.ndarray) -> Optional[Tuple[np.ndarray, float]]:
            clamped = (delta[1:-1] <= lower[1:-1]) & (g[1:-1] > 0.0)
            free = interior[~clamped]
            if not len(free):
                return None
            hessian = (en.energy_hessian(prev + delta, lam) + penalty_hessian).tocsr()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter('ignore', sparse_linalg.MatrixRankWarning)
                    solved = sparse_linalg.spsolve(hessian[free][:, free].tocsc(), -g[free])
            except RuntimeError:
                return None
            direction = np.zeros(m + 1)
            direction[free] = solved
            if not (np.all(np.isfinite(direction)) and float(np.dot(g, direction)) < 0.0):
                return None

            alpha = 1.0
            for _ in range(NumericConstants.MAX_BACKTRACKS):
                trial = np.clip(delta + alpha * direction, lower, upper)
                decrease = float(np.dot(g, trial - delta))
                if not decrease < 0.0:
                    return None
                trial_value = value_of(trial)
                if trial_value <= value + NumericConstants.ARMIJO_SIGMA * decrease + allowance(value):
                    return trial, trial_value
                alpha *= 0.5
            return None

        def gradient_trial(delta: np.ndarray, g: np.ndarray, step: float,
                           reference_value: float) -> Optional[Tuple[np.ndarray, float]]:
            for _ in range(NumericConstants.MAX_BACKTRACKS):
                trial = np.clip(delta - step * g / metric, lower, upper)
                trial_value = value_of(trial)
                decrease = float(np.dot(g, trial - delta))
                if trial_value <= reference_value + NumericConstants.ARMIJO_SIGMA * decrease + allowance(reference_value):
                    return trial, trial_value
                step *= 0.5
            return None

        delta = np.zeros(m + 1)
        value = 0.0
        g = gradient_of(delta)
        reference = 1.0 + float(np.max(np.abs(g))) / h
        # below this the projected gradient is rounding noise
        floor = en.gradient_roundoff(prev) / h / reference
        target = max(tol, floor)
        step = 1.0
        iterations = 0
        recent = deque([value], maxlen=NumericConstants.NONMONOTONE_MEMORY)
        residual = float(np.max(np.abs(projected(delta, g)))) / h / reference
        best, since_best = residual, 0

        while residual > target:
            if iterations >= max_iter:
                raise NonConvergenceError(f"inner solver stopped after {max_iter} iterations "
                                          f"with relative residual {residual:.3e} > {target:.3e}")
            accepted = newton_trial(delta, value, g) or gradient_trial(delta, g, step, max(recent))
            if accepted is None:
                if residual <= NumericConstants.STALL_RATIO * floor:
                    logger.debug(f"Inner solve stalled at the rounding level, residual={residual:.3e}")
                    break
                raise NonConvergenceError(f"line search stalled at iteration {iterations} "
                                          f"with relative residual {residual:.3e} > {target:.3e}")
            trial, trial_value = accepted

            move = trial - delta
            g_next = gradient_of(trial)
            curvature = float(np.dot(move, g_next - g))
            if curvature > 0.0:
                step = float(np.clip(float(np.dot(move, metric * move)) / curvature,
                                     NumericConstants.BB_STEP_MIN, NumericConstants.BB_STEP_MAX))
            else:
                step = min(10.0 * step, NumericConstants.BB_STEP_MAX)
            delta, value, g = trial, trial_value, g_next
            recent.append(value)
            iterations += 1
            residual = float(np.max(np.abs(projected(delta, g)))) / h / reference

            if residual < best:
                best, since_best = residual, 0
            else:
                since_best += 1
            if since_best >= NumericConstants.STALL_WINDOW and residual <= NumericConstants.STALL_RATIO * floor:
                logger.debug(f"Inner solve stopped improving at the rounding level, residual={residual:.3e}")
                break

        u_next = prev + delta
        u_next[1:-1] = np.maximum(u_next[1:-1], psi_nodes[1:-1])
        u_next[0] = u_next[-1] = 0.0

        gap = (prev - psi_nodes) + delta
        slack = activation_tol * (1.0 + np.abs(psi_nodes))
        active = np.flatnonzero(gap[1:-1] <= slack[1:-1]) + 1
        atoms = np.zeros(m + 1)
        atoms[active] = np.maximum(g[active], 0.0)

        logger.debug(f"Inner solve finished after {iterations} iterations, residual={residual:.3e}, "
                     f"active={len(active)}")
        return InnerSolution(u=GridFunction.of(u_next), delta=delta.tolist(), multipliers=DiscreteMeasure.of(atoms),
                             active_set=active.tolist(), iterations=iterations, residual=residual)

    # ---- whole flow ----

    def run(self, u0: Grid, obstacle: ObstacleSpec, params: SchemeParams) -> FlowResult:
        """
        Chains inner_minimize from u0 for n steps.

        A step whose inner solve fails, or whose slope leaves the cap 2 M0, ends the
        run early; the partial result carries the failure in its status.

        Raises:
            GridMismatchError: u0 does not live on the grid of params.
            InfeasibleStartError: u0 lies below the obstacle.
        """
        started = time.perf_counter()
        values = en.nodal(u0).copy()
        if len(values) != params.m + 1:
            raise GridMismatchError(f"initial datum has m={len(values) - 1}, params expect m={params.m}")
        psi_nodes = obstacle.on_grid(params.m)
        bad = _violations(values, psi_nodes, params.activation_tol)
        if len(bad):
            raise InfeasibleStartError(f"initial datum lies below the obstacle at nodes {bad[:10].tolist()}")
        # roundoff-level contact is moved onto the obstacle
        values[1:-1] = np.maximum(values[1:-1], psi_nodes[1:-1])

        lam, tau = params.lambda_, params.tau
        logger.info(f"Starting flow: m={params.m}, n={params.n}, T={params.T:.6e}, tau={tau:.6e}, "
                    f"lambda={lam}, M0={params.M0:.6e}, rho={params.rho:.6e}")
        if params.M0 == 0.0:
            logger.warning("Initial datum is flat (M0 = 0): derivative cap audit disabled")

        slack = params.activation_tol * (1.0 + np.abs(psi_nodes))
        initial_active = (np.flatnonzero((values - psi_nodes)[1:-1] <= slack[1:-1]) + 1).tolist()
        steps = [StepRecord(index=0, t=0.0, u=GridFunction.of(values), w=GridFunction.zeros(params.m),
                            energy=en.energy(values, lam), multipliers=DiscreteMeasure.empty(params.m),
                            active_set=initial_active)]

        status, failure = FlowStatus.COMPLETED, None
        prev = values
        for i in range(1, params.n + 1):
            try:
                solution = self.inner_minimize(prev, psi_nodes, tau, lam, params.inner_tol, params.inner_max_iter,
                                               params.activation_tol)
            except NonConvergenceError as e:
                logger.error(f"Step {i} did not converge: {str(e)}", exc_info=True)
                status, failure = FlowStatus.NON_CONVERGED, f"step {i}: {e.message}"
                break

            delta = np.asarray(solution.delta)
            steps.append(StepRecord(index=i, t=i * tau, u=solution.u, w=GridFunction.of(delta / tau),
                                    energy=en.energy(solution.u, lam),
                                    energy_change=en.energy_increment(prev, delta, lam),
                                    penalty_value=en.penalty_of_displacement(delta, prev, tau),
                                    multipliers=solution.multipliers, active_set=solution.active_set,
                                    iterations=solution.iterations, residual=solution.residual))

            if params.M0 > 0.0:
                sup_du = en.sup_norms(solution.u)[1]
                if sup_du > params.cap:
                    logger.warning(f"Step {i} exceeds the derivative cap: max |u'| = {sup_du:.6e} > {params.cap:.6e}")
                    status, failure = FlowStatus.CAP_VIOLATED, f"step {i}: max |u'| = {sup_du:.6e} > cap {params.cap:.6e}"
                    break
            prev = solution.u.array

        result = FlowResult(params=params, obstacle=obstacle, psi=psi_nodes.tolist(), steps=steps, status=status,
                            failure=failure)
        result = result.model_copy(update={'summary': self.diagnostics_service.summarize(result)})
        logger.info(f"Flow finished with status {status.value} after {len(steps) - 1} steps "
                    f"in {time.perf_counter() - started:.3f}s")
        return result

    # ---- interpolants ----

    def eval_interpolant(self, result: FlowResult, kind: InterpolantKind, t: float) -> GridFunction:
        """
        Piecewise-linear (linear), right-constant (upper) or left-constant (lower)
        interpolation of the steps in time. On ((i-1) tau, i tau] upper gives u_i and
        lower gives u_{i-1}; t = 0 gives u_0 for every kind.

        Raises:
            DomainError: t outside [0, T] or beyond the last computed step.
        """
        kind = InterpolantKind(kind)
        tau, T = result.params.tau, result.params.T
        if not (0.0 <= t <= T * (1.0 + 1e-12)):
            raise DomainError(f"t={t} outside [0, T] = [0, {T}]")
        if t == 0.0:
            return result.steps[0].u

        ratio = t / tau
        nearest = int(round(ratio))
        at_node = nearest >= 1 and abs(ratio - nearest) <= 1e-9 * max(1.0, ratio)
        i = nearest if at_node else int(math.ceil(ratio))
        i = min(max(i, 1), result.params.n)
        if i >= len(result.steps):
            raise DomainError(f"t={t} lies beyond the last computed step {len(result.steps) - 1}")

        before, after = result.steps[i - 1], result.steps[i]
        if kind == InterpolantKind.UPPER:
            return after.u
        if kind == InterpolantKind.LOWER:
            return before.u
        if at_node:
            return after.u
        return GridFunction.of(before.u.array + (t - (i - 1) * tau) * after.w.array)
