import math

import numpy as np
import pytest
from scipy import optimize

from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.constants.kinds import InterpolantKind
from elastic_obstacle_flow.exception.flow_exception import (DegenerateDatumError, DomainError, GridMismatchError,
                                                            InfeasibleStartError, NonConvergenceError)
from elastic_obstacle_flow.model.grid_model import GridFunction, ObstacleSpec
from elastic_obstacle_flow.services.diagnostics_service import DiagnosticsService
from elastic_obstacle_flow.services.elastica_service import ElasticaService
from elastic_obstacle_flow.services.scheme_service import SchemeService
from elastic_obstacle_flow.utils import energy as en


@pytest.fixture
def scheme():
    return SchemeService(DiagnosticsService())


@pytest.fixture
def small_sine():
    return GridFunction.sample(lambda x: 0.1 * np.sin(math.pi * x), 32)


@pytest.fixture
def floor():
    return ObstacleSpec.flat(-1.0)


# ----------------------------
# Parameters
# ----------------------------

def test_horizon_formula():
    expected = (1.0 / (2.0 * math.sqrt(2.0) * 5.0 ** 0.0625)) ** 8
    assert SchemeService.horizon(1.0, 1.0) == pytest.approx(expected, rel=1e-14)
    assert SchemeService.horizon(1.0, 2.0) == pytest.approx(expected / 256.0, rel=1e-12)


def test_radius_formula():
    assert SchemeService.radius(0.5, 4.0) == pytest.approx(2.0 ** 1.25 * 2.0, rel=1e-14)
    assert SchemeService.radius(0.0, 4.0) == pytest.approx(math.sqrt(2.0) * 2.0, rel=1e-14)


def test_auto_horizon_is_consistent(scheme, small_sine):
    horizon = scheme.auto_horizon(small_sine, 0.5)
    assert horizon.M0 == en.sup_norms(small_sine)[1]
    assert horizon.rho == SchemeService.radius(horizon.M0, en.energy(small_sine, 0.5).penalized)
    assert horizon.T == SchemeService.horizon(horizon.M0, horizon.rho)


def test_flat_datum_needs_explicit_horizon(scheme):
    with pytest.raises(DegenerateDatumError) as excinfo:
        scheme.build_params(GridFunction.zeros(16), 0.0, 10)
    assert "explicit T" in str(excinfo.value.message)

    params = scheme.build_params(GridFunction.zeros(16), 0.0, 10, T=0.1)
    assert params.tau == 0.1 / 10
    assert params.cap == 0.0


def test_build_params(scheme, small_sine):
    params = scheme.build_params(small_sine, 1.0, 8, T=0.004, inner_tol=1e-9)
    assert params.m == 32
    assert params.tau == 0.004 / 8
    assert params.cap == 2.0 * params.M0
    assert params.inner_tol == 1e-9


# ----------------------------
# One step
# ----------------------------

def test_flat_line_is_a_fixed_point(scheme, floor):
    solution = scheme.inner_minimize(GridFunction.zeros(16), floor, 0.01, 1.0)
    assert solution.iterations == 0
    assert not np.any(solution.u.array)
    assert solution.multipliers.total == 0.0
    assert solution.active_set == []


def tip_problem():
    psi = ObstacleSpec.symmetric_cone(0.3)
    u_prev = GridFunction.sample(lambda x: 0.3 * np.sin(math.pi * x), 32)
    return psi, u_prev, 1e-4, 0.5


def test_cone_tip_stays_active_with_positive_multiplier(scheme):
    psi, u_prev, tau, lam = tip_problem()
    solution = scheme.inner_minimize(u_prev, psi, tau, lam)
    assert solution.active_set == [16]
    assert solution.u.values[16] == 0.3
    atoms = solution.multipliers.array
    assert atoms[16] > 0.0
    assert np.count_nonzero(atoms) == 1


def test_step_matches_bound_constrained_oracle(scheme):
    psi, u_prev, tau, lam = tip_problem()
    prev = u_prev.array
    psi_nodes = psi.on_grid(32)

    def padded(interior):
        return np.concatenate([[0.0], interior, [0.0]])

    def fun(interior):
        v = padded(interior)
        return en.objective(v, prev, tau, lam), en.grad_G(v, prev, tau, lam)[1:-1]

    oracle = optimize.minimize(fun, prev[1:-1], jac=True, method='L-BFGS-B',
                               bounds=[(p, None) for p in psi_nodes[1:-1]],
                               options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 20000, 'maxcor': 30})
    solution = scheme.inner_minimize(u_prev, psi, tau, lam)
    assert np.max(np.abs(solution.u.array - padded(oracle.x))) <= 1e-6
    assert en.objective(solution.u, prev, tau, lam) <= en.objective(padded(oracle.x), prev, tau, lam) + 1e-12


def test_step_decreases_the_objective(scheme, small_sine, floor):
    solution = scheme.inner_minimize(small_sine, floor, 1e-3, 0.2)
    prev = small_sine.array
    assert en.objective(solution.u, prev, 1e-3, 0.2) <= en.energy(prev, 0.2).penalized
    assert np.allclose(solution.u.array - prev, solution.delta, atol=1e-15)


def test_free_step_converges_in_few_iterations(scheme, small_sine, floor):
    solution = scheme.inner_minimize(small_sine, floor, 1e-3, 0.2)
    assert solution.iterations <= 50
    assert solution.residual <= 1e-7
    assert solution.active_set == []


def test_contact_step_converges_in_few_iterations(scheme):
    psi, u_prev, tau, lam = tip_problem()
    solution = scheme.inner_minimize(u_prev, psi, tau, lam)
    assert solution.iterations <= 50


def test_resting_steps_stay_cheap():
    scheme = SchemeService(DiagnosticsService())
    u0 = ElasticaService().symmetric_stationary(0.4, 128)
    result = scheme.run(u0, ObstacleSpec.symmetric_cone(0.4), scheme.build_params(u0, 0.0, 50))
    assert result.status == FlowStatus.COMPLETED
    assert max(s.iterations for s in result.steps[1:]) <= 200


def test_step_rejects_bad_input(scheme):
    psi = ObstacleSpec.symmetric_cone(0.3)
    with pytest.raises(InfeasibleStartError) as excinfo:
        scheme.inner_minimize(GridFunction.zeros(16), psi, 0.01, 0.0)
    assert "below the obstacle" in str(excinfo.value.message)
    with pytest.raises(DomainError):
        scheme.inner_minimize(GridFunction.zeros(16), ObstacleSpec.flat(-1.0), 0.0, 0.0)


# ----------------------------
# Whole flow
# ----------------------------

def test_single_step_run(scheme, small_sine, floor):
    params = scheme.build_params(small_sine, 0.0, 1, T=1e-3)
    result = scheme.run(small_sine, floor, params)
    assert result.status == FlowStatus.COMPLETED
    assert len(result.steps) == 2
    assert result.steps[1].t == params.tau
    assert result.summary is not None


def test_small_sine_decays(scheme, small_sine, floor):
    params = scheme.build_params(small_sine, 0.0, 50, T=0.02)
    result = scheme.run(small_sine, floor, params)
    e0 = result.steps[0].energy.penalized
    assert result.status == FlowStatus.COMPLETED
    assert result.final.energy.penalized < 1e-2 * e0
    assert np.max(np.abs(result.final.u.array)) < 0.01
    assert result.summary.energy_monotone
    assert result.summary.dissipation_ok


def test_stationary_profile_does_not_move():
    elastica = ElasticaService()
    scheme = SchemeService(DiagnosticsService())
    u0 = elastica.symmetric_stationary(0.4, 128)
    params = scheme.build_params(u0, 0.0, 50)
    result = scheme.run(u0, ObstacleSpec.symmetric_cone(0.4), params)
    e0 = result.steps[0].energy.penalized
    assert result.status == FlowStatus.COMPLETED
    for before, after in zip(result.steps, result.steps[1:]):
        assert abs(after.energy.penalized - before.energy.penalized) <= 1e-8 * e0
        assert abs(after.energy_change) <= 1e-8 * e0
    drift = max(float(np.max(np.abs(s.u.array - u0.array))) for s in result.steps)
    assert drift <= 5.0 / 128 ** 2


def test_cone_contact_run_keeps_every_invariant(scheme):
    u0 = GridFunction.sample(lambda x: 0.35 * np.sin(math.pi * x), 32)
    psi = ObstacleSpec.symmetric_cone(0.3)
    params = scheme.build_params(u0, 0.0, 40, T=0.02)
    result = scheme.run(u0, psi, params)
    summary = result.summary
    assert result.status == FlowStatus.COMPLETED
    assert len(result.steps) == 41
    assert any(16 in s.active_set for s in result.steps[1:11])
    assert result.final.active_set == [16]
    assert result.final.u.values[16] == 0.3
    assert result.final.multipliers.array[16] > 0.0
    assert summary.energy_monotone
    assert summary.dissipation_ok
    assert summary.feasible
    assert summary.cap_ok
    assert summary.boundary_ok
    assert summary.complementarity_ok
    assert summary.h2_bound_ok

    velocity = scheme.diagnostics_service.coincidence_velocity_check(result)
    assert not velocity.empty
    assert velocity.max_abs_w <= 1e-8


def test_run_rejects_bad_input(scheme, small_sine):
    psi = ObstacleSpec.symmetric_cone(0.3)
    params = scheme.build_params(small_sine, 0.0, 2, T=1e-3)
    with pytest.raises(InfeasibleStartError):
        scheme.run(small_sine, psi, params)
    with pytest.raises(GridMismatchError):
        scheme.run(GridFunction.zeros(16), ObstacleSpec.flat(-1.0), params)


def test_budget_exhaustion_returns_partial_result(scheme, small_sine, floor):
    params = scheme.build_params(small_sine, 0.0, 5, T=0.02, inner_max_iter=1)
    result = scheme.run(small_sine, floor, params)
    assert result.status == FlowStatus.NON_CONVERGED
    assert len(result.steps) == 1
    assert "step 1" in result.failure
    with pytest.raises(NonConvergenceError):
        result.raise_for_status()


# ----------------------------
# Interpolants
# ----------------------------

@pytest.fixture
def short_run(scheme, small_sine, floor):
    return scheme.run(small_sine, floor, scheme.build_params(small_sine, 0.0, 4, T=0.002))


def test_interpolants_at_start(scheme, short_run):
    for kind in InterpolantKind:
        assert scheme.eval_interpolant(short_run, kind, 0.0) == short_run.steps[0].u


def test_interpolants_at_a_node(scheme, short_run):
    tau = short_run.params.tau
    assert scheme.eval_interpolant(short_run, InterpolantKind.UPPER, tau) == short_run.steps[1].u
    assert scheme.eval_interpolant(short_run, InterpolantKind.LOWER, tau) == short_run.steps[0].u
    assert scheme.eval_interpolant(short_run, InterpolantKind.LINEAR, tau) == short_run.steps[1].u
    assert scheme.eval_interpolant(short_run, 'upper', short_run.params.T) == short_run.steps[4].u


def test_interpolants_between_nodes(scheme, short_run):
    t = 1.5 * short_run.params.tau
    u1, u2 = short_run.steps[1].u.array, short_run.steps[2].u.array
    assert scheme.eval_interpolant(short_run, InterpolantKind.UPPER, t) == short_run.steps[2].u
    assert scheme.eval_interpolant(short_run, InterpolantKind.LOWER, t) == short_run.steps[1].u
    linear = scheme.eval_interpolant(short_run, InterpolantKind.LINEAR, t).array
    assert np.allclose(linear, 0.5 * (u1 + u2), rtol=0.0, atol=1e-14)


def test_interpolants_outside_horizon(scheme, short_run):
    with pytest.raises(DomainError):
        scheme.eval_interpolant(short_run, InterpolantKind.LINEAR, -0.1)
    with pytest.raises(DomainError) as excinfo:
        scheme.eval_interpolant(short_run, InterpolantKind.UPPER, 2.0 * short_run.params.T)
    assert "outside" in str(excinfo.value.message)
