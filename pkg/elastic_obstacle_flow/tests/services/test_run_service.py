import json

import numpy as np
import pytest

from elastic_obstacle_flow.constants.app_constants import AppConstants
from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.exception.flow_exception import ConfigurationError
from elastic_obstacle_flow.model.config_model import RunConfig
from elastic_obstacle_flow.services.bundle_service import BundleService
from elastic_obstacle_flow.services.diagnostics_service import DiagnosticsService
from elastic_obstacle_flow.services.elastica_service import ElasticaService
from elastic_obstacle_flow.services.run_service import RunService
from elastic_obstacle_flow.services.scheme_service import SchemeService


@pytest.fixture
def run_service():
    return RunService(SchemeService(DiagnosticsService()), ElasticaService(), BundleService(snapshot_stride=1))


def make_config(**changes):
    data = {"m": 16, "n": 2, "T": 1e-3, "obstacle": {"kind": "symmetric_cone", "height": -0.5},
            "u0": {"kind": "sine", "amplitude": 0.1}}
    data.update(changes)
    return RunConfig.from_dict(data)


# ----------------------------
# Initial data
# ----------------------------

def test_sine_datum(run_service):
    config = make_config(u0={"kind": "sine", "amplitude": 0.2, "mode": 2})
    u0 = run_service.initial_datum(config, config.obstacle.toSpec())
    assert u0.m == 16
    assert u0.values[4] == pytest.approx(0.2, abs=1e-15)
    assert u0.values[0] == 0.0 and u0.values[-1] == 0.0


def test_table_datum(run_service):
    config = make_config(u0={"kind": "table", "table": [[0.0, 0.0], [0.5, 0.2], [1.0, 0.0]]})
    u0 = run_service.initial_datum(config, config.obstacle.toSpec())
    assert u0.values[8] == 0.2
    assert u0.values[4] == pytest.approx(0.1, abs=1e-15)


def test_stationary_datum_takes_the_cone_height(run_service):
    config = make_config(obstacle={"kind": "symmetric_cone", "height": 0.4}, u0={"kind": "stationary"})
    u0 = run_service.initial_datum(config, config.obstacle.toSpec())
    assert u0.values[8] == 0.4


def test_stationary_datum_needs_a_height(run_service):
    config = make_config(obstacle={"kind": "sampled", "table": [[0.0, -1.0], [1.0, -1.0]]},
                         u0={"kind": "stationary"})
    with pytest.raises(ConfigurationError) as excinfo:
        run_service.initial_datum(config, config.obstacle.toSpec())
    assert "cone height" in str(excinfo.value.message)


def test_flat_datum(run_service):
    config = make_config(u0={"kind": "flat"})
    assert not np.any(run_service.initial_datum(config, config.obstacle.toSpec()).array)


# ----------------------------
# Execution
# ----------------------------

def test_execute_writes_bundle(run_service, tmp_path):
    result, out = run_service.execute(make_config(), tmp_path / "run")
    assert result.status == FlowStatus.COMPLETED
    assert out == tmp_path / "run"
    assert (out / AppConstants.LEDGER_FILE).exists()
    assert (out / "profile_00001.csv").exists()
    manifest = json.loads((out / AppConstants.MANIFEST_FILE).read_text())
    assert manifest[AppConstants.CONFIG]["output_dir"] == str(out)


def test_execute_reraises_flow_errors(run_service, tmp_path):
    with pytest.raises(ConfigurationError):
        run_service.execute(make_config(obstacle={"kind": "sampled", "table": [[0.0, -1.0], [1.0, -1.0]]},
                                        u0={"kind": "stationary"}), tmp_path / "run")
    assert not (tmp_path / "run").exists()
