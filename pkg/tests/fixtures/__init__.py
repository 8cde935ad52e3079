"""Test fixtures package."""

from tests.fixtures.factories import (
    CavityInclusionFactory,
    InclusionFactory,
    RigidInclusionFactory,
    ScenarioFactory,
)

__all__ = [
    "ScenarioFactory",
    "InclusionFactory",
    "RigidInclusionFactory",
    "CavityInclusionFactory",
]
