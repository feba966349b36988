"""
Command-line surface: run flows from JSON configs, compute thresholds and
reference profiles, and check saved runs.

Exit codes: 0 pass, 2 validation error, 3 solver non-convergence,
4 derivative-cap or invariant violation.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

import typer

from elastic_obstacle_flow.constants.flow_status import FlowStatus
from elastic_obstacle_flow.dependencies.service_provider import (get_bundle_service, get_diagnostics_service,
                                                                 get_elastica_service, get_run_service)
from elastic_obstacle_flow.dependencies.settings_provider import get_settings
from elastic_obstacle_flow.exception.flow_exception import (CapViolationError, ConfigurationError, FlowException,
                                                            InvariantViolationError, NonConvergenceError)
from elastic_obstacle_flow.model.config_model import RunConfig

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="elastic-obstacle-flow",
    help="Minimizing movements for the obstacle problem of the elastic flow of graphs",
    add_completion=False,
)

_STATUS_CODES = {
    FlowStatus.COMPLETED: 0,
    FlowStatus.NON_CONVERGED: NonConvergenceError.exit_code,
    FlowStatus.CAP_VIOLATED: CapViolationError.exit_code,
}


def _emit(document: Dict[str, Any]) -> None:
    typer.echo(json.dumps(document, sort_keys=True))


def _fail(e: FlowException) -> None:
    _emit(e.to_dict())
    raise typer.Exit(code=e.exit_code)


def _horizon(value: Optional[str]) -> Optional[Any]:
    if value is None or value == 'auto':
        return value
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(f"--T must be 'auto' or a number, got {value!r}")


@app.callback()
def main(
    log_level: Annotated[Optional[str], typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")] = None,
):
    level = (log_level or get_settings().log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@app.command()
def run(
    configs: Annotated[List[Path], typer.Argument(help="One or more run config JSON files")],
    lam: Annotated[Optional[float], typer.Option("--lambda", help="Length penalization weight")] = None,
    m: Annotated[Optional[int], typer.Option("--m", help="Spatial resolution")] = None,
    n: Annotated[Optional[int], typer.Option("--n", help="Number of time steps")] = None,
    horizon: Annotated[Optional[str], typer.Option("--T", help="Horizon, or 'auto'")] = None,
    obstacle_height: Annotated[Optional[float], typer.Option("--obstacle-height", help="Cone height")] = None,
    out: Annotated[Optional[Path], typer.Option("--out", help="Output directory")] = None,
    workers: Annotated[int, typer.Option("--workers", min=1, help="Configs run in parallel")] = 1,
):
    """Run the flow for each config and write ledger, snapshots and manifest."""
    settings = get_settings()
    try:
        loaded = []
        for path in configs:
            target = out
            if out is not None and len(configs) > 1:
                target = out / path.stem
            config = RunConfig.from_file(path, defaults=settings.run_defaults())
            config = config.with_overrides(lambda_=lam, m=m, n=n, T=_horizon(horizon),
                                           obstacle_height=obstacle_height,
                                           output_dir=None if target is None else str(target))
            loaded.append((path, config))
    except FlowException as e:
        _fail(e)

    def execute(item):
        path, config = item
        try:
            result, bundle = get_run_service(config.snapshot_stride).execute(config)
            return {"config": str(path), "out": str(bundle), "status": result.status.value,
                    "steps": len(result.steps) - 1, "failure": result.failure,
                    "exit_code": _STATUS_CODES[result.status]}
        except FlowException as e:
            return {"config": str(path), **e.to_dict()}

    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(execute, loaded))

    for report in reports:
        _emit(report)
    code = max(report["exit_code"] for report in reports)
    if code:
        raise typer.Exit(code=code)


@app.command()
def thresholds():
    """Print c0, h_star and h_star_clamped as JSON."""
    elastica = get_elastica_service()
    _emit({"c0": elastica.c0(), "h_star": elastica.h_star(), "h_star_clamped": elastica.h_star_clamped()})


@app.command()
def stationary(
    h: Annotated[float, typer.Argument(help="Cone height, 0 < h < h_star")],
    m: Annotated[int, typer.Argument(help="Even resolution, at least 16")],
    out: Annotated[Path, typer.Option("--out", help="Profile CSV")] = Path("stationary.csv"),
):
    """Write the symmetric stationary profile under a cone of height h."""
    try:
        profile = get_elastica_service().symmetric_stationary(h, m)
    except FlowException as e:
        _fail(e)
    get_bundle_service().write_profile(out, profile)
    _emit({"out": str(out), "m": m, "h": h, "tip": profile.values[m // 2]})


@app.command()
def elastica(
    s_max: Annotated[Optional[float], typer.Option("--s-max", help="Arc length, defaults to 2K(1/sqrt(2))")] = None,
    samples: Annotated[int, typer.Option("--samples", help="Samples including both ends")] = 512,
    theta0: Annotated[float, typer.Option("--theta0", help="Initial tangent angle")] = 0.0,
    out: Annotated[Path, typer.Option("--out", help="Arc CSV")] = Path("elastica.csv"),
):
    """Write the rectangular elastica as s, k, theta, x, y samples."""
    service = get_elastica_service()
    try:
        arc = service.rect_arc(2.0 * service.quarter if s_max is None else s_max, samples, theta0)
    except FlowException as e:
        _fail(e)
    get_bundle_service().write_arc(out, arc)
    _emit({"out": str(out), "rows": samples, "turning": arc.theta[-1] - arc.theta[0]})


@app.command()
def check(
    bundle: Annotated[Path, typer.Argument(help="Run directory or result.json")],
):
    """Audit a saved run and write verdict.json next to it."""
    bundles = get_bundle_service()
    try:
        result = bundles.load_result(bundle)
        verdict = get_diagnostics_service().verdict(result)
    except FlowException as e:
        _fail(e)
    path = bundles.write_verdict(bundle, verdict)
    _emit({"verdict": str(path), **verdict.model_dump(mode='json')})
    if not verdict.passed:
        failing = sorted(name for name, c in verdict.checks.items() if not c.passed)
        logger.error(f"Check failed on {failing}")
        raise typer.Exit(code=InvariantViolationError.exit_code)


if __name__ == "__main__":
    app()
