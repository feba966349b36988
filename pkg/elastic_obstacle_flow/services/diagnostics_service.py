import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.constants.numeric_constants import NumericConstants
from elastic_obstacle_flow.exception.flow_exception import DomainError, ResolutionError
from elastic_obstacle_flow.model.grid_model import GridFunction, ObstacleSpec, grid_nodes
from elastic_obstacle_flow.model.report_model import (CheckResult, DissipationRow, DissipationTable, FlowSummary,
                                                      RegularityProfile, Verdict, VelocityReport, ViReport)
from elastic_obstacle_flow.model.scheme_model import FlowResult
from elastic_obstacle_flow.utils import energy as en
from elastic_obstacle_flow.utils.energy import Grid

logger = logging.getLogger(__name__)

Obstacle = Union[ObstacleSpec, np.ndarray, Sequence[float]]
Tests = Union[Mapping[str, Grid], Sequence[Grid]]

# relative slack on the a-priori bounds
_BOUND_SLACK = 1e-9


def _obstacle_nodes(psi: Obstacle, m: int) -> np.ndarray:
    if isinstance(psi, ObstacleSpec):
        return psi.on_grid(m)
    nodes = np.asarray(psi, dtype=float)
    if len(nodes) != m + 1:
        raise DomainError(f"obstacle sampled on m={len(nodes) - 1} does not match m={m}")
    return nodes


def _named(tests: Tests) -> Dict[str, Grid]:
    if isinstance(tests, Mapping):
        return dict(tests)
    return {f"test_{k}": v for k, v in enumerate(tests)}


def _activation_slack(psi_nodes: np.ndarray, tol: float) -> np.ndarray:
    return tol * (1.0 + np.abs(psi_nodes))


class DiagnosticsService:
    """
    A-posteriori checks of discrete flows and stationary profiles.

    Every report is computed from immutable inputs, so one instance can serve
    any number of runs.
    """

    def __init__(self, activation_tol: float = 1e-10):
        self.activation_tol = activation_tol
        logger.info("Initialized DiagnosticsService")

    # ---- variational inequality ----

    def vi_residual_step(self, u: Grid, w: Optional[Grid], psi: Obstacle, lam: float, tests: Tests,
                         u_prev: Optional[Grid] = None) -> ViReport:
        """
        Minimum over the tests v of the first variation at u in the direction v - u,
        including the velocity term w (v - u) / sqrt(1 + u_prev'^2) when w is given.

        Raises:
            DomainError: no tests, or a test that is not pinned or lies below psi.
        """
        values = en.nodal(u)
        m = len(values) - 1
        psi_nodes = _obstacle_nodes(psi, m)
        named = _named(tests)
        if not named:
            raise DomainError("a variational inequality check needs at least one test function")

        slack = _activation_slack(psi_nodes, self.activation_tol)
        gradient_scale = 1.0 / m + float(np.max(np.abs(en.energy_gradient(values, lam))))
        noise = en.gradient_roundoff(values)
        worst_name, worst_value, scale, roundoff = None, math.inf, 0.0, 0.0
        for name, test in named.items():
            candidate = en.nodal(test)
            if len(candidate) != m + 1:
                raise DomainError(f"test function '{name}' lives on m={len(candidate) - 1}, expected m={m}")
            if abs(candidate[0]) > NumericConstants.PIN_TOL or abs(candidate[-1]) > NumericConstants.PIN_TOL:
                raise DomainError(f"test function '{name}' is not pinned at the endpoints")
            if np.any(candidate[1:-1] < psi_nodes[1:-1] - slack[1:-1]):
                raise DomainError(f"test function '{name}' violates the obstacle")
            direction = candidate - values
            value = en.first_variation(values, direction, lam, w=w, weight_from=u_prev)
            spread = float(np.sum(np.abs(direction)))
            scale = max(scale, gradient_scale * spread)
            roundoff = max(roundoff, noise * spread)
            if value < worst_value:
                worst_name, worst_value = name, value
        return ViReport(min_residual=worst_value, worst_test=worst_name, tested_count=len(named), scale=scale,
                        roundoff=roundoff)

    def stationary_vi_residual(self, u: Grid, psi: Obstacle, lam: float, tests: Tests) -> ViReport:
        return self.vi_residual_step(u, None, psi, lam, tests)

    def standard_battery(self, u: Grid, psi: Obstacle, u_prev: Optional[Grid] = None) -> Dict[str, GridFunction]:
        """
        Feasible tests for the VI checks: the obstacle clamped to zero at the ends,
        u plus and minus hat bumps at up to eight inactive nodes, the previous
        iterate and the flat line when it is feasible.
        """
        values = en.nodal(u)
        m = len(values) - 1
        psi_nodes = _obstacle_nodes(psi, m)
        slack = _activation_slack(psi_nodes, self.activation_tol)
        tests: Dict[str, GridFunction] = {}

        clamped = psi_nodes.copy()
        clamped[0] = clamped[-1] = 0.0
        tests['obstacle'] = GridFunction.of(clamped)

        if u_prev is not None:
            tests['previous'] = GridFunction.of(en.nodal(u_prev))
        if np.all(psi_nodes[1:-1] <= slack[1:-1]):
            tests['flat'] = GridFunction.zeros(m)

        gap = values - psi_nodes
        inactive = np.flatnonzero(gap[1:-1] > slack[1:-1]) + 1
        if len(inactive):
            count = min(NumericConstants.BUMP_COUNT, len(inactive))
            picks = np.unique(inactive[np.round(np.linspace(0, len(inactive) - 1, count)).astype(int)])
            size = 1e-3 * (1.0 + float(np.max(np.abs(values))))
            for j in picks:
                bump = np.zeros(m + 1)
                bump[j] = size
                tests[f'bump+{j}'] = GridFunction.of(values + bump)
                bump[j] = min(size, 0.5 * gap[j])
                tests[f'bump-{j}'] = GridFunction.of(values - bump)
        return tests

    # ---- boundary behaviour ----

    def endpoint_curvature(self, u: Grid) -> Tuple[float, float]:
        """One-sided second-order estimates of u'' / (1 + u'^2)^(3/2) at x = 0 and x = 1."""
        values = en.nodal(u)
        m = len(values) - 1
        if m < NumericConstants.MIN_CURVATURE_NODES:
            raise ResolutionError(f"endpoint curvature needs m >= {NumericConstants.MIN_CURVATURE_NODES}, got m={m}")
        h = 1.0 / m

        def one_sided(v: np.ndarray) -> float:
            slope = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            second = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
            return float(second / (1.0 + slope * slope) ** 1.5)

        return one_sided(values), one_sided(values[::-1])

    def boundary_delta(self, psi_nodes: np.ndarray, cap: float) -> float:
        """
        Distance from the endpoints within which no node can be active: psi stays
        below 3/4 of its end value there, and |u| <= cap * dist keeps u above psi(end) / 4.
        """
        x = grid_nodes(len(psi_nodes) - 1)

        def one_side(values: np.ndarray) -> float:
            below = values < 0.75 * values[0]
            reach = 1.0 if np.all(below) else float(x[int(np.argmin(below))])
            if cap > 0.0:
                reach = min(reach, -values[0] / (4.0 * cap))
            return reach

        return min(one_side(psi_nodes), one_side(psi_nodes[::-1]))

    # ---- flow reports ----

    def coincidence_velocity_check(self, result: FlowResult) -> VelocityReport:
        per_step: List[float] = []
        seen = False
        for before, after in zip(result.steps, result.steps[1:]):
            both = sorted(set(before.active_set) & set(after.active_set))
            if both:
                seen = True
                per_step.append(float(np.max(np.abs(after.w.array[both]))))
            else:
                per_step.append(0.0)
        return VelocityReport(max_abs_w=max(per_step, default=0.0), empty=not seen, per_step=per_step)

    def dissipation_vs_energy(self, result: FlowResult) -> DissipationTable:
        rows: List[DissipationRow] = []
        drops: List[float] = []
        penalties: List[float] = []
        for step in result.steps[1:]:
            drops.append(-step.energy_change)
            penalties.append(2.0 * step.penalty_value)
            rows.append(DissipationRow(i=step.index, energy_drop=drops[-1], twice_penalty=penalties[-1],
                                       cumulative_drop=math.fsum(drops),
                                       cumulative_twice_penalty=math.fsum(penalties)))
        return DissipationTable(rows=rows, min_gap=min((r.gap for r in rows), default=0.0))

    def regularity_probe(self, u: Grid) -> RegularityProfile:
        """
        Gaps between the right and left second-order one-sided estimates of u''' at
        the nodes 8..m-8.

        Each side is also checked against itself: the spread of a node is the largest
        second difference of the one-sided estimates over the three nodes behind it on
        each side, which is what a straight-line extrapolation of that side misses.
        A node is flagged when its gap is a local maximum, exceeds ten times the median
        gap, exceeds ten times its spread and clears the roundoff floor.
        """
        values = en.nodal(u)
        m = len(values) - 1
        if m < NumericConstants.MIN_PROBE_NODES:
            raise ResolutionError(f"regularity probe needs m >= {NumericConstants.MIN_PROBE_NODES}, got m={m}")
        right, left = en.one_sided_third_derivatives(values)
        reach = NumericConstants.PROBE_REACH
        nodes = np.arange(reach, m - reach + 1)
        gaps = np.abs(right[nodes] - left[nodes])
        median = float(np.median(gaps))
        floor = (NumericConstants.ROUNDOFF_FACTOR * NumericConstants.EPS
                 * max(1.0, float(np.max(np.abs(values)))) * m ** 3)

        # bend_left[j] uses left[j-2..j], bend_right[j] uses right[j..j+2]
        bend_left = np.full(m + 1, np.nan)
        bend_right = np.full(m + 1, np.nan)
        bend_left[2:] = np.abs(left[2:] - 2.0 * left[1:-1] + left[:-2])
        bend_right[:-2] = np.abs(right[:-2] - 2.0 * right[1:-1] + right[2:])
        spread = np.max(np.stack([bend_left[nodes], bend_left[nodes - 1], bend_left[nodes - 2],
                                  bend_right[nodes], bend_right[nodes + 1], bend_right[nodes + 2]]), axis=0)

        padded = np.concatenate([[-np.inf], gaps, [-np.inf]])
        local_max = (gaps >= padded[:-2]) & (gaps > padded[2:])
        flagged = nodes[local_max & (gaps > NumericConstants.PROBE_RATIO * median) & (gaps > floor)
                        & (gaps > NumericConstants.PROBE_CONTRAST * spread)]
        return RegularityProfile(nodes=nodes.tolist(), x=(nodes / m).tolist(), gaps=gaps.tolist(),
                                 left=left[nodes].tolist(), right=right[nodes].tolist(), spread=spread.tolist(),
                                 median=median, flagged=flagged.tolist())

    def vi_report_for_run(self, result: FlowResult) -> Optional[ViReport]:
        """Worst step-level VI residual over the standard battery, relative to its tolerance."""
        psi = result.psi_array
        lam = result.params.lambda_
        worst: Optional[ViReport] = None
        worst_margin = math.inf
        for before, after in zip(result.steps, result.steps[1:]):
            tests = self.standard_battery(after.u, psi, u_prev=before.u)
            report = self.vi_residual_step(after.u, after.w, psi, lam, tests, u_prev=before.u)
            margin = report.min_residual + self._vi_allowance(result, report)
            if margin < worst_margin:
                worst, worst_margin = report, margin
        return worst

    def _vi_allowance(self, result: FlowResult, report: ViReport) -> float:
        return NumericConstants.VI_SLACK * (result.params.inner_tol * (1.0 + report.scale) + report.roundoff)

    def summarize(self, result: FlowResult) -> FlowSummary:
        p = result.params
        steps = result.steps
        psi = result.psi_array
        e0 = steps[0].energy.penalized

        increases = [b.energy.penalized - a.energy.penalized for a, b in zip(steps, steps[1:])]
        max_increase = max(increases, default=0.0)
        dissipation = math.fsum(2.0 * s.penalty_value for s in steps[1:])

        sup_du = [en.sup_norms(s.u)[1] for s in steps]
        max_sup_du = max(sup_du)
        cap_active = p.M0 > 0.0
        cap_ok = (not cap_active) or max_sup_du <= p.cap * (1.0 + _BOUND_SLACK)
        three_halves_ok = (not cap_active) or max_sup_du <= 1.5 * p.M0 * (1.0 + _BOUND_SLACK)
        if not three_halves_ok:
            logger.warning(f"max |u'| = {max_sup_du:.6e} exceeds 3/2 M0 = {1.5 * p.M0:.6e}")

        h2_bound = (1.0 + 4.0 * p.M0 ** 2) ** 1.25 * math.sqrt(max(e0, 0.0))
        h_norms = [en.h_norm(s.u) for s in steps]
        max_h_norm = max(h_norms)

        gaps = [float(np.min(s.u.array - psi)) for s in steps]
        min_gap = min(gaps)

        delta = self.boundary_delta(psi, p.cap)
        x = grid_nodes(p.m)
        boundary_ok = all(delta <= x[j] <= 1.0 - delta for s in steps for j in s.active_set)

        measure_sum = p.tau * math.fsum(s.multipliers.total ** 2 for s in steps[1:])
        h = 1.0 / p.m
        third = [float(np.sqrt(h * np.sum(np.nan_to_num(en.third_differences(s.u)[0]) ** 2))) for s in steps]
        second = [float(np.max(np.abs(en.d2(s.u)))) for s in steps]

        u0 = steps[0].u.array
        slope0 = en.d1(u0)
        drift_factor = math.sqrt(2.0) * (1.0 + 4.0 * p.M0 ** 2) ** (1.0 / 16.0) * p.rho
        holder_factor = math.sqrt(1.0 + 4.0 * p.M0 ** 2) * p.rho ** 2
        max_drift, max_holder, drift_ok, holder_ok = 0.0, 0.0, True, True
        for s in steps[1:]:
            drift = float(np.max(np.abs(en.d1(s.u) - slope0)))
            max_drift = max(max_drift, drift)
            if drift > drift_factor * s.t ** 0.125 * (1.0 + _BOUND_SLACK) + NumericConstants.EPS * (1.0 + p.M0):
                drift_ok = False
            moved = en.l2_norm(s.u.array - u0) ** 2
            allowed = holder_factor * s.t
            if allowed > 0.0:
                max_holder = max(max_holder, moved / allowed)
            if moved > allowed * (1.0 + _BOUND_SLACK) + NumericConstants.EPS:
                holder_ok = False

        ratio = self._complementarity_ratio(result)
        summary = FlowSummary(
            energy_monotone=max_increase <= NumericConstants.MONOTONE_TOL * (1.0 + e0),
            max_energy_increase=max_increase,
            dissipation_total=dissipation,
            dissipation_ok=dissipation <= 2.0 * e0 + NumericConstants.LEDGER_TOL,
            time_derivative_ok=dissipation <= p.rho ** 2 + NumericConstants.LEDGER_TOL,
            max_sup_du=max_sup_du,
            cap_ok=cap_ok,
            three_halves_ok=three_halves_ok,
            h2_bound=h2_bound,
            max_h_norm=max_h_norm,
            h2_bound_ok=max_h_norm <= h2_bound * (1.0 + _BOUND_SLACK) + NumericConstants.EPS,
            min_gap=min_gap,
            feasible=min_gap >= 0.0,
            boundary_delta=delta,
            boundary_ok=boundary_ok,
            measure_sum=measure_sum,
            max_third_l2=max(third),
            max_second_sup=max(second),
            max_slope_drift=max_drift,
            slope_drift_ok=drift_ok,
            max_holder_ratio=max_holder,
            holder_ok=holder_ok,
            complementarity_ratio=ratio,
            complementarity_ok=ratio <= NumericConstants.COMPLEMENTARITY_RATIO,
        )
        for name in ('energy_monotone', 'dissipation_ok', 'cap_ok', 'h2_bound_ok', 'feasible', 'boundary_ok',
                     'complementarity_ok'):
            if not getattr(summary, name):
                logger.warning(f"Audit {name} failed for run with m={p.m}, n={p.n}")
        return summary

    def _complementarity_ratio(self, result: FlowResult) -> float:
        psi = result.psi_array
        largest, stray = 0.0, 0.0
        for s in result.steps[1:]:
            atoms = s.multipliers.array
            if not len(atoms) or not np.any(atoms):
                continue
            largest = max(largest, float(np.max(atoms)))
            away = (s.u.array - psi) > NumericConstants.COMPLEMENTARITY_GAP
            if np.any(away):
                stray = max(stray, float(np.max(atoms[away])))
        return stray / largest if largest > 0.0 else 0.0

    def verdict(self, result: FlowResult) -> Verdict:
        """Pass/fail of every audited invariant with the measured value and its bound."""
        summary = result.summary or self.summarize(result)
        e0 = result.steps[0].energy.penalized
        p = result.params
        checks: Dict[str, CheckResult] = {
            'completed': CheckResult(passed=result.status == FlowStatus.COMPLETED, value=float(len(result.steps) - 1),
                                     bound=float(p.n), detail=result.failure),
            'energy_monotone': CheckResult(passed=summary.energy_monotone, value=summary.max_energy_increase,
                                           bound=NumericConstants.MONOTONE_TOL * (1.0 + e0)),
            'dissipation_ledger': CheckResult(passed=summary.dissipation_ok, value=summary.dissipation_total,
                                              bound=2.0 * e0 + NumericConstants.LEDGER_TOL),
            'time_derivative_bound': CheckResult(passed=summary.time_derivative_ok, value=summary.dissipation_total,
                                                 bound=p.rho ** 2 + NumericConstants.LEDGER_TOL),
            'feasibility': CheckResult(passed=summary.feasible, value=summary.min_gap, bound=0.0),
            'derivative_cap': CheckResult(passed=summary.cap_ok, value=summary.max_sup_du, bound=p.cap,
                                          detail=None if p.M0 > 0.0 else "cap audit disabled for a flat datum"),
            'h2_bound': CheckResult(passed=summary.h2_bound_ok, value=summary.max_h_norm, bound=summary.h2_bound),
            'boundary_noncoincidence': CheckResult(passed=summary.boundary_ok, value=summary.boundary_delta),
            'complementarity': CheckResult(passed=summary.complementarity_ok, value=summary.complementarity_ratio,
                                           bound=NumericConstants.COMPLEMENTARITY_RATIO),
            'slope_drift': CheckResult(passed=summary.slope_drift_ok, value=summary.max_slope_drift),
            'holder_in_time': CheckResult(passed=summary.holder_ok, value=summary.max_holder_ratio, bound=1.0),
        }

        table = self.dissipation_vs_energy(result)
        dissipation_bound = -NumericConstants.DISSIPATION_TOL * (1.0 + e0)
        checks['dissipation_structure'] = CheckResult(passed=table.min_gap >= dissipation_bound,
                                                      value=table.min_gap, bound=dissipation_bound)

        report = self.vi_report_for_run(result)
        if report is not None:
            allowance = self._vi_allowance(result, report)
            checks['variational_inequality'] = CheckResult(passed=report.min_residual >= -allowance,
                                                           value=report.min_residual, bound=-allowance,
                                                           detail=report.worst_test)

        passed = all(c.passed for c in checks.values())
        if not passed:
            failing = sorted(name for name, c in checks.items() if not c.passed)
            logger.warning(f"Verdict failed on {failing}")
        return Verdict(passed=passed, checks=checks)
