"""Services for monotonicity tests, reconstructions and experiments.

This package contains service classes that orchestrate the handlers:
Loewner tests, pixelwise reconstructions, scenario pipelines, numerical
studies, and file export.
"""

from src.services.experiment_service import ExperimentService
from src.services.export_service import ExportService
from src.services.monotonicity_service import MonotonicityService
from src.services.reconstruction_service import ReconstructionService
from src.services.scenario_service import ScenarioService

__all__ = [
    "MonotonicityService",
    "ReconstructionService",
    "ScenarioService",
    "ExperimentService",
    "ExportService",
]
