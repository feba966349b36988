import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from elastic_obstacle_flow import __version__
from elastic_obstacle_flow.constants.app_constants import AppConstants
from elastic_obstacle_flow.exception.flow_exception import ConfigurationError
from elastic_obstacle_flow.model.elastica_model import ElasticaArc
from elastic_obstacle_flow.model.grid_model import GridFunction
from elastic_obstacle_flow.model.report_model import Verdict
from elastic_obstacle_flow.model.scheme_model import FlowResult
from elastic_obstacle_flow.utils import energy as en

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def safe_json_serializer(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return AppConstants.INT_FORMAT % int(value)
    if isinstance(value, (int, np.integer)):
        return AppConstants.INT_FORMAT % value
    return AppConstants.FLOAT_FORMAT % float(value)


class BundleService:
    """Flat-file artifacts of runs and reference objects: CSV tables and JSON documents."""

    def __init__(self, snapshot_stride: int = AppConstants.DEFAULT_SNAPSHOT_STRIDE):
        self.snapshot_stride = snapshot_stride
        logger.info("Initialized BundleService")

    # ---- tables ----

    def write_table(self, path: PathLike, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Writes a CSV with a header; floats use the fixed %.16e format, ints %d."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
        return path

    def read_table(self, path: PathLike) -> Dict[str, List[float]]:
        with Path(path).open(newline='') as handle:
            reader = csv.DictReader(handle)
            columns: Dict[str, List[float]] = {name: [] for name in reader.fieldnames or []}
            for row in reader:
                for name, value in row.items():
                    columns[name].append(float(value))
        return columns

    def ledger_rows(self, result: FlowResult) -> List[List[Any]]:
        rows = []
        dissipation: List[float] = []
        for step in result.steps[1:]:
            dissipation.append(2.0 * step.penalty_value)
            rows.append([step.index, step.t, step.energy.bending, step.energy.length, step.energy.penalized,
                         step.penalty_value, math.fsum(dissipation), en.sup_norms(step.u)[1],
                         len(step.active_set), step.multipliers.total])
        return rows

    def snapshot_indices(self, result: FlowResult) -> List[int]:
        last = len(result.steps) - 1
        return sorted(set(range(0, last + 1, self.snapshot_stride)) | {last})

    def write_profile(self, path: PathLike, u: GridFunction) -> Path:
        return self.write_table(path, AppConstants.PROFILE_COLUMNS, zip(u.nodes, u.values))

    def write_arc(self, path: PathLike, arc: ElasticaArc) -> Path:
        return self.write_table(path, AppConstants.ARC_COLUMNS, arc.columns().tolist())

    # ---- documents ----

    def write_json(self, path: PathLike, document: Dict[str, Any]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(document, indent=2, sort_keys=True, default=safe_json_serializer) + '\n')
        return path

    def read_json(self, path: PathLike) -> Dict[str, Any]:
        try:
            return json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read {path}: {str(e)}")

    # ---- run bundles ----

    def write_run(self, out_dir: PathLike, result: FlowResult, config: Optional[Dict[str, Any]] = None,
                  wall_time: float = 0.0) -> Path:
        """
        Writes ledger.csv, the profile snapshots, manifest.json and result.json into out_dir.

        Returns:
            Path: the bundle directory
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.write_table(out / AppConstants.LEDGER_FILE, AppConstants.LEDGER_COLUMNS, self.ledger_rows(result))

        x = result.steps[0].u.nodes
        for index in self.snapshot_indices(result):
            step = result.steps[index]
            rows = zip(x, step.u.values, result.psi, step.multipliers.atoms)
            self.write_table(out / AppConstants.SNAPSHOT_TEMPLATE.format(index=index),
                             AppConstants.SNAPSHOT_COLUMNS, rows)

        manifest = {
            AppConstants.PARAMS: result.params.model_dump(mode='json', by_alias=True),
            AppConstants.CONFIG: config,
            AppConstants.VERSION: __version__,
            AppConstants.WALL_TIME: wall_time,
            AppConstants.STATUS: result.status.value,
            AppConstants.SUMMARY: result.summary.model_dump(mode='json') if result.summary else None,
        }
        self.write_json(out / AppConstants.MANIFEST_FILE, manifest)
        self.write_json(out / AppConstants.RESULT_FILE, result.toItem())
        logger.info(f"Wrote run bundle to {out}")
        return out

    def load_result(self, bundle: PathLike) -> FlowResult:
        """Loads result.json from a bundle directory, or the given JSON file."""
        path = Path(bundle)
        if path.is_dir():
            path = path / AppConstants.RESULT_FILE
        if not path.exists():
            raise ConfigurationError(f"no flow result at {path}")
        try:
            return FlowResult.toEntity(self.read_json(path))
        except ValueError as e:
            raise ConfigurationError(f"invalid flow result {path}: {str(e)}")

    def write_verdict(self, bundle: PathLike, verdict: Verdict) -> Path:
        path = Path(bundle)
        target = (path if path.is_dir() else path.parent) / AppConstants.VERDICT_FILE
        return self.write_json(target, verdict.model_dump(mode='json'))
