"""Handlers package for meshes, materials, forward solves and ND maps."""

from src.handlers.fem_handler import FemHandler
from src.handlers.material_handler import MaterialHandler
from src.handlers.mesh_handler import MeshHandler
from src.handlers.ndmap_handler import NdMapHandler

__all__ = [
    "MeshHandler",
    "MaterialHandler",
    "FemHandler",
    "NdMapHandler",
]
