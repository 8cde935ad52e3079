"""Pytest configuration and fixtures.

This module provides shared fixtures and configuration
for the test suite.
"""

import sys
from pathlib import Path

import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.core.config import Settings
from src.handlers.fem_handler import FemHandler
from src.handlers.material_handler import MaterialHandler
from src.handlers.mesh_handler import MeshHandler
from src.handlers.ndmap_handler import NdMapHandler
from src.models.dto import MaterialState
from src.models.schemas import RegionSpec, Scenario
from src.services.scenario_service import ScenarioService
from tests.fixtures.factories import ScenarioFactory


@pytest.fixture(scope="session")
def test_settings() -> Settings:
    """Get test settings."""
    return Settings(log_level="WARNING", threads=1)


@pytest.fixture
def mesh_handler() -> MeshHandler:
    return MeshHandler()


@pytest.fixture
def material_handler() -> MaterialHandler:
    return MaterialHandler()


@pytest.fixture
def fem(test_settings: Settings) -> FemHandler:
    """FEM handler with a fresh solve counter."""
    return FemHandler(test_settings)


@pytest.fixture
def nd(fem: FemHandler, test_settings: Settings) -> NdMapHandler:
    return NdMapHandler(fem, test_settings)


@pytest.fixture
def scenarios(nd: NdMapHandler, test_settings: Settings) -> ScenarioService:
    return ScenarioService(test_settings, nd)


@pytest.fixture
def make_mesh(mesh_handler: MeshHandler):
    """Build a labeled unit-square mesh with bottom Dirichlet side."""

    def build(n: int, specs: list[RegionSpec] | None = None, dirichlet=("bottom",)):
        mesh = mesh_handler.build_unit_square_mesh(n, dirichlet)
        return mesh_handler.label_regions(mesh, specs or [])

    return build


@pytest.fixture
def make_field(material_handler: MaterialHandler):
    """Build a field on a labeled mesh from ``{region_id: MaterialState}``."""

    def build(mesh, states: dict[str, MaterialState] | None = None, background=(1.0, 1.0)):
        return material_handler.make_lame_field(mesh, background, states or {})

    return build


@pytest.fixture
def make_scenario():
    """Validated scenario from factory defaults and keyword overrides."""

    def build(**kwargs) -> Scenario:
        return Scenario.model_validate(ScenarioFactory(**kwargs))

    return build


@pytest.fixture
def rigid_spec() -> RegionSpec:
    return RegionSpec.model_validate(
        {"id": "rigid", "kind": "rigid", "shape": {"type": "disc", "center": [0.5, 0.6], "radius": 0.18}}
    )


@pytest.fixture
def cavity_spec() -> RegionSpec:
    return RegionSpec.model_validate(
        {
            "id": "cavity",
            "kind": "cavity",
            "shape": {"type": "rect", "corner_lo": [0.35, 0.45], "corner_hi": [0.65, 0.7]},
        }
    )

