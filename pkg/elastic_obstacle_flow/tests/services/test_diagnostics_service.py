import math

import numpy as np
import pytest

from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.exception.flow_exception import DomainError, ResolutionError
from elastic_obstacle_flow.model.grid_model import GridFunction, ObstacleSpec
from elastic_obstacle_flow.services.diagnostics_service import DiagnosticsService
from elastic_obstacle_flow.services.elastica_service import ElasticaService
from elastic_obstacle_flow.services.scheme_service import SchemeService


@pytest.fixture(scope="module")
def diagnostics():
    return DiagnosticsService()


@pytest.fixture(scope="module")
def elastica():
    return ElasticaService()


@pytest.fixture(scope="module")
def scheme(diagnostics):
    return SchemeService(diagnostics)


@pytest.fixture(scope="module")
def stationary_run(scheme, elastica):
    u0 = elastica.symmetric_stationary(0.4, 128)
    return scheme.run(u0, ObstacleSpec.symmetric_cone(0.4), scheme.build_params(u0, 0.0, 50))


@pytest.fixture(scope="module")
def free_run(scheme):
    u0 = GridFunction.sample(lambda x: 0.1 * np.sin(math.pi * x), 32)
    return scheme.run(u0, ObstacleSpec.flat(-1.0), scheme.build_params(u0, 0.0, 1, T=1e-3))


@pytest.fixture
def parabola():
    return GridFunction.sample(lambda x: x * (1.0 - x), 64)


# ----------------------------
# Variational inequality
# ----------------------------

def test_zero_direction_has_zero_residual(diagnostics, parabola):
    w = GridFunction.zeros(64)
    report = diagnostics.vi_residual_step(parabola, w, ObstacleSpec.flat(-1.0), 0.0, [parabola])
    assert report.min_residual == 0.0
    assert report.worst_test == "test_0"
    assert report.tested_count == 1


def test_flat_line_is_stationary(diagnostics):
    u = GridFunction.zeros(32)
    psi = ObstacleSpec.flat(-1.0)
    tests = diagnostics.standard_battery(u, psi)
    assert "flat" in tests
    report = diagnostics.stationary_vi_residual(u, psi, 0.0, tests)
    assert report.min_residual == 0.0


def test_parabola_is_not_stationary(diagnostics, parabola):
    psi = ObstacleSpec.flat(-1.0)
    report = diagnostics.stationary_vi_residual(parabola, psi, 0.0, diagnostics.standard_battery(parabola, psi))
    assert report.min_residual < 0.0


def test_stationary_profile_satisfies_the_inequality(diagnostics, elastica):
    m, h = 128, 0.4
    u = elastica.symmetric_stationary(h, m)
    psi = ObstacleSpec.symmetric_cone(h)
    report = diagnostics.stationary_vi_residual(u, psi, 0.0, diagnostics.standard_battery(u, psi))
    assert report.min_residual >= -50.0 / m * (1.0 + h)


def test_vi_rejects_bad_tests(diagnostics, parabola):
    psi = ObstacleSpec.symmetric_cone(0.2)
    with pytest.raises(DomainError) as excinfo:
        diagnostics.stationary_vi_residual(parabola, psi, 0.0, [])
    assert "at least one" in str(excinfo.value.message)

    unpinned = parabola.array.copy()
    unpinned[-1] = 0.5
    with pytest.raises(DomainError) as excinfo:
        diagnostics.stationary_vi_residual(parabola, psi, 0.0, {"unpinned": unpinned})
    assert "not pinned" in str(excinfo.value.message)

    with pytest.raises(DomainError) as excinfo:
        diagnostics.stationary_vi_residual(parabola, psi, 0.0, {"below": np.zeros(65)})
    assert "violates the obstacle" in str(excinfo.value.message)


def test_standard_battery_is_feasible(diagnostics, elastica):
    u = elastica.symmetric_stationary(0.4, 64)
    psi_nodes = ObstacleSpec.symmetric_cone(0.4).on_grid(64)
    tests = diagnostics.standard_battery(u, psi_nodes, u_prev=u)
    assert {"obstacle", "previous"} <= set(tests)
    assert "flat" not in tests
    assert any(name.startswith("bump+") for name in tests)
    for test in tests.values():
        assert np.all(test.array[1:-1] >= psi_nodes[1:-1])


# ----------------------------
# Boundary behaviour
# ----------------------------

def test_endpoint_curvature(diagnostics, parabola, elastica):
    assert diagnostics.endpoint_curvature(GridFunction.zeros(16)) == (0.0, 0.0)
    left, right = diagnostics.endpoint_curvature(parabola)
    assert left == pytest.approx(-1.0 / math.sqrt(2.0), abs=1e-9)
    assert right == pytest.approx(-1.0 / math.sqrt(2.0), abs=1e-9)
    left, right = diagnostics.endpoint_curvature(elastica.symmetric_stationary(0.4, 128))
    assert abs(left) <= 1e-2 and abs(right) <= 1e-2


def test_endpoint_curvature_resolution(diagnostics):
    with pytest.raises(ResolutionError):
        diagnostics.endpoint_curvature(GridFunction.zeros(5))


def test_boundary_delta(diagnostics):
    assert diagnostics.boundary_delta(ObstacleSpec.flat(-1.0).on_grid(32), 2.0) == pytest.approx(0.125)
    assert diagnostics.boundary_delta(ObstacleSpec.symmetric_cone(0.3).on_grid(100), 0.0) == 0.1


# ----------------------------
# Flow reports
# ----------------------------

def test_velocity_check_without_contact(diagnostics, free_run):
    report = diagnostics.coincidence_velocity_check(free_run)
    assert report.empty
    assert report.max_abs_w == 0.0
    assert report.per_step == [0.0]


def test_velocity_check_at_rest(diagnostics, stationary_run):
    report = diagnostics.coincidence_velocity_check(stationary_run)
    assert not report.empty
    assert report.max_abs_w == 0.0
    assert len(report.per_step) == 50


def test_dissipation_single_row(diagnostics, free_run):
    table = diagnostics.dissipation_vs_energy(free_run)
    step = free_run.steps[1]
    assert len(table.rows) == 1
    row = table.rows[0]
    assert row.energy_drop == -step.energy_change
    assert row.twice_penalty == 2.0 * step.penalty_value
    assert row.energy_drop > 0.0
    assert table.min_gap >= -1e-10 * (1.0 + free_run.steps[0].energy.penalized)


def test_dissipation_at_rest(diagnostics, stationary_run):
    e0 = stationary_run.steps[0].energy.penalized
    table = diagnostics.dissipation_vs_energy(stationary_run)
    assert len(table.rows) == 50
    assert table.rows[-1].cumulative_twice_penalty <= 1e-6 * e0
    assert abs(table.rows[-1].cumulative_drop) <= 1e-6 * e0


# ----------------------------
# Regularity probe
# ----------------------------

def test_regularity_quiet_on_smooth_profile(diagnostics):
    profile = diagnostics.regularity_probe(GridFunction.sample(lambda x: np.sin(math.pi * x), 256))
    assert profile.flagged == []
    assert profile.nodes[0] == 8 and profile.nodes[-1] == 248


def test_regularity_finds_a_planted_jump(diagnostics):
    x = np.arange(257) / 256
    jump = 6.0
    values = jump / 6.0 * np.maximum(x - 0.25, 0.0) ** 3 - jump / 6.0 * 0.75 ** 3 * x
    values[0] = values[-1] = 0.0
    profile = diagnostics.regularity_probe(values)
    assert profile.flagged == [64]
    assert profile.gaps[64 - profile.nodes[0]] == pytest.approx(jump, rel=1e-6)


@pytest.mark.parametrize("m", [64, 128, 256])
def test_regularity_flags_the_stationary_tip(diagnostics, elastica, m):
    profile = diagnostics.regularity_probe(elastica.symmetric_stationary(0.4, m))
    assert profile.flagged == [m // 2]


def test_regularity_resolution(diagnostics):
    with pytest.raises(ResolutionError):
        diagnostics.regularity_probe(GridFunction.zeros(12))


# ----------------------------
# Summary and verdict
# ----------------------------

def test_summary_of_resting_run(stationary_run):
    summary = stationary_run.summary
    assert summary.energy_monotone
    assert summary.feasible
    assert summary.boundary_ok
    assert summary.complementarity_ok
    assert summary.slope_drift_ok
    assert summary.holder_ok


def test_verdict_passes_on_resting_run(diagnostics, stationary_run):
    verdict = diagnostics.verdict(stationary_run)
    failing = [name for name, check in verdict.checks.items() if not check.passed]
    assert failing == []
    assert verdict.passed
    assert "variational_inequality" in verdict.checks


def test_verdict_reports_incomplete_run(diagnostics, free_run):
    broken = free_run.model_copy(update={'status': FlowStatus.NON_CONVERGED, 'failure': "step 1: stalled"})
    verdict = diagnostics.verdict(broken)
    assert not verdict.passed
    assert not verdict.checks['completed'].passed
    assert verdict.checks['completed'].detail == "step 1: stalled"
