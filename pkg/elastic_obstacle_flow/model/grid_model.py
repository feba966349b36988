import math
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from elastic_obstacle_flow.constants.kinds import ObstacleKind
from elastic_obstacle_flow.constants.numeric_constants import NumericConstants


def grid_nodes(m: int) -> np.ndarray:
    """Nodes x_j = j/m; exact at 0, 1/2 (m even) and 1."""
    return np.arange(m + 1, dtype=float) / m


class GridFunction(BaseModel):
    """Nodal values u_0..u_m of a pinned graph on the uniform partition of [0, 1]."""
    model_config = ConfigDict(frozen=True)

    m: int = Field(..., ge=1, description="Number of grid intervals, spacing 1/m")
    values: List[float] = Field(..., description="Nodal values u_0..u_m, pinned at both ends")

    @field_validator('values')
    @classmethod
    def _pin_endpoints(cls, values: List[float]) -> List[float]:
        if len(values) < 2:
            raise ValueError("a grid function needs at least two nodes")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("grid function values must be finite")
        if abs(values[0]) > NumericConstants.PIN_TOL or abs(values[-1]) > NumericConstants.PIN_TOL:
            raise ValueError(f"endpoints must be pinned at 0, got u_0={values[0]}, u_m={values[-1]}")
        values = list(values)
        values[0] = 0.0
        values[-1] = 0.0
        return values

    @model_validator(mode='after')
    def _check_length(self) -> 'GridFunction':
        if len(self.values) != self.m + 1:
            raise ValueError(f"expected {self.m + 1} values for m={self.m}, got {len(self.values)}")
        return self

    @property
    def spacing(self) -> float:
        return 1.0 / self.m

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.m)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @staticmethod
    def of(values: Union[np.ndarray, List[float]]) -> 'GridFunction':
        values = np.asarray(values, dtype=float)
        return GridFunction(m=len(values) - 1, values=values.tolist())

    @staticmethod
    def zeros(m: int) -> 'GridFunction':
        return GridFunction(m=m, values=[0.0] * (m + 1))

    @staticmethod
    def sample(fn: Callable[[np.ndarray], np.ndarray], m: int) -> 'GridFunction':
        """Samples fn at the nodes and pins the endpoints."""
        values = np.asarray(fn(grid_nodes(m)), dtype=float)
        values[0] = 0.0
        values[-1] = 0.0
        return GridFunction.of(values)


class ObstacleSpec(BaseModel):
    """
    The obstacle psi on [0, 1].

    A symmetric cone is affine on [0, 1/2] from psi(0) = base up to psi(1/2) = height
    and mirrored onto [1/2, 1]. A sampled obstacle interpolates a table linearly.
    Either way psi(0) < 0 and psi(1) < 0.
    """
    model_config = ConfigDict(frozen=True)

    kind: ObstacleKind = Field(..., description="symmetric_cone or sampled")
    height: Optional[float] = Field(None, description="Cone value at x = 1/2")
    base: float = Field(-1.0, description="Cone value at both endpoints")
    table: Optional[List[Tuple[float, float]]] = Field(None, description="Sampled (x, psi(x)) pairs")

    @model_validator(mode='after')
    def _check_obstacle(self) -> 'ObstacleSpec':
        if self.kind == ObstacleKind.SYMMETRIC_CONE:
            if self.height is None or not math.isfinite(self.height):
                raise ValueError("a symmetric cone needs a finite height")
        else:
            if not self.table or len(self.table) < 2:
                raise ValueError("a sampled obstacle needs at least two (x, psi) pairs")
            xs = [x for x, _ in self.table]
            if xs[0] != 0.0 or xs[-1] != 1.0:
                raise ValueError("a sampled obstacle table must start at x=0 and end at x=1")
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise ValueError("sampled obstacle abscissae must be strictly increasing")
            if not all(math.isfinite(p) for _, p in self.table):
                raise ValueError("sampled obstacle values must be finite")
        left, right = self.endpoint_values()
        if not (left < 0.0 and right < 0.0):
            raise ValueError(
                f"obstacle must satisfy psi(0) < 0 and psi(1) < 0, got psi(0)={left}, psi(1)={right}")
        return self

    def endpoint_values(self) -> Tuple[float, float]:
        if self.kind == ObstacleKind.SYMMETRIC_CONE:
            return self.base, self.base
        return self.table[0][1], self.table[-1][1]

    def evaluate(self, x: Union[float, np.ndarray]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == ObstacleKind.SYMMETRIC_CONE:
            # exact at the tip x = 1/2
            return self.height - 2.0 * (self.height - self.base) * np.abs(x - 0.5)
        xs, ps = zip(*self.table)
        return np.interp(x, xs, ps)

    def on_grid(self, m: int) -> np.ndarray:
        return self.evaluate(grid_nodes(m))

    @staticmethod
    def symmetric_cone(height: float, base: float = -1.0) -> 'ObstacleSpec':
        return ObstacleSpec(kind=ObstacleKind.SYMMETRIC_CONE, height=height, base=base)

    @staticmethod
    def sampled(table: List[Tuple[float, float]]) -> 'ObstacleSpec':
        return ObstacleSpec(kind=ObstacleKind.SAMPLED, table=[(float(x), float(p)) for x, p in table])

    @staticmethod
    def flat(level: float) -> 'ObstacleSpec':
        return ObstacleSpec.sampled([(0.0, level), (1.0, level)])


class EnergyBreakdown(BaseModel):
    """Bending, length and penalized energy E_lambda = B + lambda * L of a graph."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    bending: float = Field(..., ge=0.0, description="Bending energy B")
    length: float = Field(..., description="Curve length L")
    penalized: float = Field(..., description="B + lambda * L")
    lambda_: float = Field(..., ge=0.0, alias="lambda", description="Length penalization weight")

    @staticmethod
    def of(bending: float, length: float, lam: float) -> 'EnergyBreakdown':
        return EnergyBreakdown(bending=bending, length=length, penalized=bending + lam * length, lambda_=lam)
