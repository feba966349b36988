from elastic_obstacle_flow.dependencies.settings_provider import get_settings
from elastic_obstacle_flow.services.bundle_service import BundleService
from elastic_obstacle_flow.services.diagnostics_service import DiagnosticsService
from elastic_obstacle_flow.services.elastica_service import ElasticaService
from elastic_obstacle_flow.services.run_service import RunService
from elastic_obstacle_flow.services.scheme_service import SchemeService

__elastica_service = None
__diagnostics_service = None
__scheme_service = None
__bundle_service = None
__run_service = None


def get_elastica_service() -> ElasticaService:
    """Dependency provider for ElasticaService (singleton)"""
    global __elastica_service
    if __elastica_service is None:
        __elastica_service = ElasticaService()
    return __elastica_service


def get_diagnostics_service() -> DiagnosticsService:
    global __diagnostics_service
    if __diagnostics_service is None:
        __diagnostics_service = DiagnosticsService(activation_tol=get_settings().activation_tol)
    return __diagnostics_service


def get_scheme_service() -> SchemeService:
    global __scheme_service
    if __scheme_service is None:
        __scheme_service = SchemeService(diagnostics_service=get_diagnostics_service())
    return __scheme_service


def get_bundle_service(snapshot_stride: int = None) -> BundleService:
    """Shared BundleService, or a fresh one when a run asks for its own snapshot stride."""
    global __bundle_service
    if snapshot_stride is not None:
        return BundleService(snapshot_stride=snapshot_stride)
    if __bundle_service is None:
        __bundle_service = BundleService()
    return __bundle_service


def get_run_service(snapshot_stride: int = None) -> RunService:
    global __run_service
    if snapshot_stride is not None:
        return RunService(scheme_service=get_scheme_service(), elastica_service=get_elastica_service(),
                          bundle_service=get_bundle_service(snapshot_stride))
    if __run_service is None:
        __run_service = RunService(scheme_service=get_scheme_service(), elastica_service=get_elastica_service(),
                                   bundle_service=get_bundle_service())
    return __run_service
