import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from elastic_obstacle_flow.constants.app_constants import AppConstants
from elastic_obstacle_flow.constants.kinds import DatumKind, ObstacleKind
from elastic_obstacle_flow.exception.flow_exception import ConfigurationError
from elastic_obstacle_flow.model.grid_model import ObstacleSpec


class ObstacleConfig(BaseModel):
    """Obstacle descriptor of a run config: a symmetric cone or a sampled table."""
    model_config = ConfigDict(frozen=True)

    kind: ObstacleKind = Field(..., description="symmetric_cone or sampled")
    height: Optional[float] = Field(None, description="Cone height at x = 1/2")
    base: float = Field(-1.0, description="Cone value at both endpoints")
    table: Optional[List[Tuple[float, float]]] = Field(None, description="(x, psi) pairs for a sampled obstacle")

    @model_validator(mode='after')
    def _check_psi_condition(self) -> 'ObstacleConfig':
        # psi(0) < 0 and psi(1) < 0 is checked by ObstacleSpec
        try:
            self.toSpec()
        except ValidationError as e:
            raise ValueError("; ".join(error['msg'] for error in e.errors()))
        return self

    def toSpec(self) -> ObstacleSpec:
        return ObstacleSpec(kind=self.kind, height=self.height, base=self.base, table=self.table)


class InitialDatumConfig(BaseModel):
    """
    Initial datum descriptor:
        sine: amplitude * sin(pi * mode * x)
        table: (x, u) pairs interpolated linearly onto the grid
        stationary: the symmetric stationary profile for the cone height
        flat: u = 0
    """
    model_config = ConfigDict(frozen=True)

    kind: DatumKind = Field(..., description="sine, table, stationary or flat")
    amplitude: float = Field(0.1, description="Amplitude of a sine datum")
    mode: int = Field(1, ge=1, description="Frequency of a sine datum")
    table: Optional[List[Tuple[float, float]]] = Field(None, description="(x, u) pairs for a table datum")
    height: Optional[float] = Field(None, description="Cone height for a stationary datum, defaults to the obstacle's")

    @model_validator(mode='after')
    def _check_datum(self) -> 'InitialDatumConfig':
        if self.kind == DatumKind.TABLE:
            if not self.table or len(self.table) < 2:
                raise ValueError("a table datum needs at least two (x, u) pairs")
            xs = [x for x, _ in self.table]
            if xs[0] != 0.0 or xs[-1] != 1.0 or any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("table datum abscissae must increase strictly from 0 to 1")
        return self


class RunConfig(BaseModel):
    """A run: scheme parameters, obstacle, initial datum and output settings."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(0.0, ge=0.0, alias="lambda", description="Length penalization weight")
    m: int = Field(..., ge=4, description="Spatial resolution")
    n: int = Field(..., ge=1, description="Number of time steps")
    T: Union[Literal['auto'], float] = Field('auto', description="Horizon, or 'auto' for the a-priori choice")
    obstacle: ObstacleConfig
    u0: InitialDatumConfig
    inner_tol: float = Field(AppConstants.DEFAULT_INNER_TOL, gt=0.0)
    inner_max_iter: int = Field(AppConstants.DEFAULT_INNER_MAX_ITER, ge=1)
    activation_tol: float = Field(AppConstants.DEFAULT_ACTIVATION_TOL, gt=0.0)
    output_dir: str = Field(AppConstants.DEFAULT_OUTPUT_DIR, description="Directory receiving the run artifacts")
    snapshot_stride: int = Field(AppConstants.DEFAULT_SNAPSHOT_STRIDE, description="Every k-th step is dumped")

    @field_validator('T')
    @classmethod
    def _check_horizon(cls, value: Union[str, float]) -> Union[str, float]:
        if value != 'auto' and not value > 0.0:
            raise ValueError(f"T must be 'auto' or positive, got {value}")
        return value

    @model_validator(mode='after')
    def _check_run(self) -> 'RunConfig':
        if self.snapshot_stride < 1:
            raise ValueError(f"snapshot stride must be >= 1, got {self.snapshot_stride}")
        if self.obstacle.kind == ObstacleKind.SYMMETRIC_CONE and self.m % 2 != 0:
            raise ValueError(f"a symmetric cone needs an even m so that x = 1/2 is a node, got m={self.m}")
        return self

    @staticmethod
    def from_dict(data: Dict[str, Any], defaults: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        """Validates data on top of defaults; values in data win."""
        merged = {**(defaults or {}), **data}
        try:
            return RunConfig.model_validate(merged)
        except ValidationError as e:
            raise ConfigurationError(f"invalid run config: {str(e)}")

    @staticmethod
    def from_file(path: Union[str, Path], defaults: Optional[Dict[str, Any]] = None) -> 'RunConfig':
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot read run config {path}: {str(e)}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"run config {path} must hold a JSON object")
        return RunConfig.from_dict(data, defaults)

    def with_overrides(self, **overrides: Any) -> 'RunConfig':
        """Applies CLI flags; None leaves a field untouched, obstacle_height replaces the cone height."""
        data = self.model_dump(by_alias=True)
        height = overrides.pop('obstacle_height', None)
        if height is not None:
            data['obstacle'] = {**data['obstacle'], 'height': height}
        if overrides.get('lambda_') is not None:
            data['lambda'] = overrides.pop('lambda_')
        data.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(data)

    def toItem(self) -> Dict[str, Any]:
        return self.model_dump(mode='json', by_alias=True)
