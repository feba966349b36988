import os
from typing import Any, Dict

from dotenv import load_dotenv
from pydantic import BaseModel, Field

from elastic_obstacle_flow.constants.app_constants import AppConstants

load_dotenv()


class Settings(BaseModel):
    """Environment defaults; a run config or a CLI flag overrides each of them."""
    log_level: str = Field(AppConstants.DEFAULT_LOG_LEVEL)
    output_dir: str = Field(AppConstants.DEFAULT_OUTPUT_DIR)
    inner_tol: float = Field(AppConstants.DEFAULT_INNER_TOL, gt=0.0)
    inner_max_iter: int = Field(AppConstants.DEFAULT_INNER_MAX_ITER, ge=1)
    activation_tol: float = Field(AppConstants.DEFAULT_ACTIVATION_TOL, gt=0.0)

    def run_defaults(self) -> Dict[str, Any]:
        return {
            'output_dir': self.output_dir,
            'inner_tol': self.inner_tol,
            'inner_max_iter': self.inner_max_iter,
            'activation_tol': self.activation_tol,
        }


__settings = None


def get_settings() -> Settings:
    global __settings
    if __settings is None:
        __settings = Settings(
            log_level=os.getenv(AppConstants.ENV_LOG_LEVEL, AppConstants.DEFAULT_LOG_LEVEL),
            output_dir=os.getenv(AppConstants.ENV_OUTPUT_DIR, AppConstants.DEFAULT_OUTPUT_DIR),
            inner_tol=os.getenv(AppConstants.ENV_INNER_TOL, AppConstants.DEFAULT_INNER_TOL),
            inner_max_iter=os.getenv(AppConstants.ENV_INNER_MAX_ITER, AppConstants.DEFAULT_INNER_MAX_ITER),
            activation_tol=os.getenv(AppConstants.ENV_ACTIVATION_TOL, AppConstants.DEFAULT_ACTIVATION_TOL),
        )
    return __settings
