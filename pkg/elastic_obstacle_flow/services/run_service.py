import logging
import math
import time
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from elastic_obstacle_flow.constants.kinds import DatumKind, ObstacleKind
from elastic_obstacle_flow.exception.flow_exception import ConfigurationError, FlowException
from elastic_obstacle_flow.model.config_model import RunConfig
from elastic_obstacle_flow.model.grid_model import GridFunction, ObstacleSpec
from elastic_obstacle_flow.model.scheme_model import FlowResult
from elastic_obstacle_flow.services.bundle_service import BundleService
from elastic_obstacle_flow.services.elastica_service import ElasticaService
from elastic_obstacle_flow.services.scheme_service import SchemeService

logger = logging.getLogger(__name__)


class RunService:
    """Turns a RunConfig into a flow and its artifact bundle."""

    def __init__(self, scheme_service: SchemeService, elastica_service: ElasticaService,
                 bundle_service: BundleService):
        self.scheme_service = scheme_service
        self.elastica_service = elastica_service
        self.bundle_service = bundle_service
        logger.info("Initialized RunService")

    def initial_datum(self, config: RunConfig, obstacle: ObstacleSpec) -> GridFunction:
        datum = config.u0
        m = config.m
        if datum.kind == DatumKind.SINE:
            return GridFunction.sample(lambda x: datum.amplitude * np.sin(math.pi * datum.mode * x), m)
        if datum.kind == DatumKind.TABLE:
            xs, us = zip(*datum.table)
            return GridFunction.sample(lambda x: np.interp(x, xs, us), m)
        if datum.kind == DatumKind.STATIONARY:
            height = datum.height if datum.height is not None else obstacle.height
            if height is None:
                raise ConfigurationError("a stationary datum needs a cone height")
            return self.elastica_service.symmetric_stationary(height, m)
        return GridFunction.zeros(m)

    def execute(self, config: RunConfig, out_dir: Optional[Path] = None) -> Tuple[FlowResult, Path]:
        """
        Builds the obstacle, the initial datum and the parameters, runs the flow
        and writes the bundle.

        Returns:
            (result, bundle directory)
        """
        started = time.perf_counter()
        if out_dir is not None:
            config = config.with_overrides(output_dir=str(out_dir))
        out = Path(config.output_dir)
        try:
            obstacle = config.obstacle.toSpec()
            u0 = self.initial_datum(config, obstacle)
            params = self.scheme_service.build_params(u0, config.lambda_, config.n, config.T,
                                                      inner_tol=config.inner_tol,
                                                      inner_max_iter=config.inner_max_iter,
                                                      activation_tol=config.activation_tol)
            result = self.scheme_service.run(u0, obstacle, params)
        except FlowException as e:
            logger.error(f"Run failed: {str(e)}", exc_info=True)
            raise

        wall_time = time.perf_counter() - started
        self.bundle_service.write_run(out, result, config=config.toItem(), wall_time=wall_time)
        if obstacle.kind == ObstacleKind.SYMMETRIC_CONE:
            logger.info(f"Cone height {obstacle.height}, final tip value {result.final.u.values[config.m // 2]:.12f}")
        return result, out
