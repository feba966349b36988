import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.exception.flow_exception import CapViolationError, NonConvergenceError
from elastic_obstacle_flow.model.grid_model import EnergyBreakdown, GridFunction, ObstacleSpec
from elastic_obstacle_flow.model.report_model import FlowSummary


class Horizon(BaseModel):
    """Quantities fixed by the initial datum: M0 = max|u0'|, the radius rho and the horizon T."""
    M0: float = Field(..., ge=0.0)
    rho: float = Field(..., ge=0.0)
    T: float = Field(..., gt=0.0)


class SchemeParams(BaseModel):
    """Parameters of one minimizing-movements run."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(..., ge=0.0, alias="lambda", description="Length penalization weight")
    m: int = Field(..., ge=4, description="Spatial resolution")
    n: int = Field(..., ge=1, description="Number of time steps")
    T: float = Field(..., gt=0.0, description="Time horizon")
    tau: float = Field(..., gt=0.0, description="Time step T/n")
    M0: float = Field(..., ge=0.0, description="max |u0'| over the nodes")
    rho: float = Field(..., ge=0.0, description="A-priori H^2 radius")
    cap: float = Field(..., ge=0.0, description="Derivative cap 2 M0")
    inner_tol: float = Field(..., gt=0.0, description="Relative projected-gradient tolerance")
    inner_max_iter: int = Field(..., ge=1, description="Inner iteration budget")
    activation_tol: float = Field(..., gt=0.0, description="Relative gap below which a node is active")

    @model_validator(mode='after')
    def _check_params(self) -> 'SchemeParams':
        if self.tau != self.T / self.n:
            raise ValueError(f"tau must equal T/n exactly, got tau={self.tau}, T/n={self.T / self.n}")
        if self.cap != 2.0 * self.M0:
            raise ValueError(f"cap must equal 2*M0, got cap={self.cap}, M0={self.M0}")
        return self

    @staticmethod
    def of(lam: float, m: int, n: int, T: float, M0: float, rho: float, inner_tol: float,
           inner_max_iter: int, activation_tol: float) -> 'SchemeParams':
        return SchemeParams(lambda_=lam, m=m, n=n, T=T, tau=T / n, M0=M0, rho=rho, cap=2.0 * M0,
                            inner_tol=inner_tol, inner_max_iter=inner_max_iter, activation_tol=activation_tol)


class DiscreteMeasure(BaseModel):
    """Nonnegative nodal atoms; atom j is the mass tested against the hat function at node j."""
    model_config = ConfigDict(frozen=True)

    atoms: List[float] = Field(..., description="Per-node nonnegative weights")
    total: float = Field(..., ge=0.0, description="Sum of atoms")

    @model_validator(mode='after')
    def _check_atoms(self) -> 'DiscreteMeasure':
        if any(a < 0.0 or not math.isfinite(a) for a in self.atoms):
            raise ValueError("measure atoms must be finite and nonnegative")
        if abs(self.total - math.fsum(self.atoms)) > 1e-12 * (1.0 + abs(self.total)):
            raise ValueError("measure total must equal the sum of its atoms")
        return self

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=float)

    @staticmethod
    def of(atoms: np.ndarray) -> 'DiscreteMeasure':
        atoms = [float(a) for a in atoms]
        return DiscreteMeasure(atoms=atoms, total=math.fsum(atoms))

    @staticmethod
    def empty(m: int) -> 'DiscreteMeasure':
        return DiscreteMeasure(atoms=[0.0] * (m + 1), total=0.0)


class InnerSolution(BaseModel):
    """Minimizer of one step problem, with its displacement and contact multipliers."""
    model_config = ConfigDict(frozen=True)

    u: GridFunction
    delta: List[float] = Field(..., description="Displacement u_next - u_prev, computed directly")
    multipliers: DiscreteMeasure
    active_set: List[int]
    iterations: int
    residual: float = Field(..., description="Final relative projected-gradient norm")


class StepRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int = Field(..., ge=0)
    t: float = Field(..., ge=0.0)
    u: GridFunction = Field(..., description="The minimizer u_i")
    w: GridFunction = Field(..., description="Difference quotient (u_i - u_{i-1}) / tau")
    energy: EnergyBreakdown
    energy_change: float = Field(0.0, description="E(u_i) - E(u_{i-1}) without cancellation")
    penalty_value: float = Field(0.0, ge=0.0)
    multipliers: DiscreteMeasure
    active_set: List[int] = Field(default_factory=list)
    iterations: int = 0
    residual: float = 0.0


class FlowResult(BaseModel):
    """A whole run; steps[0] is the initial datum."""
    model_config = ConfigDict(frozen=True)

    params: SchemeParams
    obstacle: ObstacleSpec
    psi: List[float] = Field(..., description="Obstacle sampled at the nodes")
    steps: List[StepRecord]
    status: FlowStatus = FlowStatus.COMPLETED
    failure: Optional[str] = None
    summary: Optional[FlowSummary] = None

    @model_validator(mode='after')
    def _check_steps(self) -> 'FlowResult':
        if not self.steps:
            raise ValueError("a flow result holds at least the initial datum")
        if self.status == FlowStatus.COMPLETED and len(self.steps) != self.params.n + 1:
            raise ValueError(f"a completed run has n+1={self.params.n + 1} steps, got {len(self.steps)}")
        return self

    @property
    def final(self) -> StepRecord:
        return self.steps[-1]

    @property
    def psi_array(self) -> np.ndarray:
        return np.asarray(self.psi, dtype=float)

    def raise_for_status(self) -> None:
        if self.status == FlowStatus.NON_CONVERGED:
            raise NonConvergenceError(self.failure or "inner solver did not converge")
        if self.status == FlowStatus.CAP_VIOLATED:
            raise CapViolationError(self.failure or "derivative cap exceeded")

    def toItem(self) -> Dict[str, Any]:
        return self.model_dump(mode='json', by_alias=True)

    @classmethod
    def toEntity(cls, item: Dict[str, Any]) -> 'FlowResult':
        return cls.model_validate(item)
