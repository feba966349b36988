from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class ViReport(BaseModel):
    """Most negative value of the tested variational inequality over a battery of test functions."""
    min_residual: float
    worst_test: str = Field(..., description="Identifier of the test function attaining min_residual")
    tested_count: int = Field(..., ge=1)
    scale: float = Field(0.0, ge=0.0, description="Magnitude against which min_residual is judged")
    roundoff: float = Field(0.0, ge=0.0, description="Rounding level of the tested values")


class DissipationRow(BaseModel):
    i: int
    energy_drop: float = Field(..., description="E(u_{i-1}) - E(u_i)")
    twice_penalty: float = Field(..., description="2 P_i(u_i)")
    cumulative_drop: float
    cumulative_twice_penalty: float

    @property
    def gap(self) -> float:
        return self.energy_drop - self.twice_penalty


class DissipationTable(BaseModel):
    rows: List[DissipationRow]
    min_gap: float = Field(..., description="Smallest per-step energy_drop - twice_penalty")


class VelocityReport(BaseModel):
    """max |w_i| over nodes active at both step i-1 and step i."""
    max_abs_w: float = 0.0
    empty: bool = Field(True, description="No node was active at two consecutive steps")
    per_step: List[float] = Field(default_factory=list)


class RegularityProfile(BaseModel):
    """One-sided third-derivative gaps |u'''(x+) - u'''(x-)| at the examined nodes."""
    nodes: List[int]
    x: List[float]
    gaps: List[float]
    left: List[float]
    right: List[float]
    spread: List[float] = Field(default_factory=list, description="Largest one-sided second difference near the node")
    median: float
    flagged: List[int] = Field(default_factory=list, description="Node indices with a detected jump")


class FlowSummary(BaseModel):
    """Audits of a run against the a-priori estimates of the scheme."""
    energy_monotone: bool
    max_energy_increase: float
    dissipation_total: float = Field(..., description="sum_i 2 P_i, the discrete int int (d_t u)^2 / |g'|")
    dissipation_ok: bool
    time_derivative_ok: bool = Field(..., description="sum_i 2 P_i <= rho^2")
    max_sup_du: float
    cap_ok: bool
    three_halves_ok: bool = Field(..., description="max_i |u_i'| <= 3/2 M0")
    h2_bound: float
    max_h_norm: float
    h2_bound_ok: bool
    min_gap: float = Field(..., description="min over steps and nodes of u - psi")
    feasible: bool
    boundary_delta: float
    boundary_ok: bool
    measure_sum: float = Field(..., description="tau * sum_i mu_i(I)^2")
    max_third_l2: float
    max_second_sup: float
    max_slope_drift: float
    slope_drift_ok: bool
    max_holder_ratio: float = Field(..., description="max_i ||u_i - u_0||_{L2}^2 / (sqrt(1 + 4 M0^2) t_i rho^2)")
    holder_ok: bool
    complementarity_ratio: float
    complementarity_ok: bool


class CheckResult(BaseModel):
    passed: bool
    value: float
    bound: Optional[float] = None
    detail: Optional[str] = None


class Verdict(BaseModel):
    passed: bool
    checks: Dict[str, CheckResult]
