from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ElasticaArc(BaseModel):
    """Arclength samples of a unit-speed planar arc starting at the origin."""
    model_config = ConfigDict(frozen=True)

    s_grid: List[float] = Field(..., description="Nondecreasing arclength samples starting at 0")
    k: List[float] = Field(..., description="Curvature at each sample")
    theta: List[float] = Field(..., description="Tangent angle in radians at each sample")
    x: List[float] = Field(..., description="Abscissa of each sample")
    y: List[float] = Field(..., description="Ordinate of each sample")

    @model_validator(mode='after')
    def _check_samples(self) -> 'ElasticaArc':
        sizes = {len(self.s_grid), len(self.k), len(self.theta), len(self.x), len(self.y)}
        if len(sizes) != 1:
            raise ValueError("arc sample columns must have equal length")
        if self.s_grid[0] != 0.0 or any(b < a for a, b in zip(self.s_grid, self.s_grid[1:])):
            raise ValueError("arclength samples must start at 0 and be nondecreasing")
        return self

    @property
    def points(self) -> List[Tuple[float, float]]:
        return list(zip(self.x, self.y))

    def columns(self) -> np.ndarray:
        """Samples as an array with columns s, k, theta, x, y."""
        return np.column_stack([self.s_grid, self.k, self.theta, self.x, self.y])
