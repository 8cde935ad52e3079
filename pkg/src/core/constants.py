"""Application constants and fixed values.

This module contains all constant values used throughout the application.
"""

from typing import Final

# =============================================================================
# Configuration Constants
# =============================================================================
CONFIG_VERSION: Final[int] = 1

# =============================================================================
# Mesh Constants
# =============================================================================
MIN_SUBDIVISIONS: Final[int] = 2
BACKGROUND_REGION: Final[str] = "background"
AREA_TOLERANCE: Final[float] = 1e-12

# =============================================================================
# Study Constants
# =============================================================================
DEFAULT_EPS_LADDER: Final[tuple[float, ...]] = (
    1e-1,
    3e-2,
    1e-2,
    3e-3,
    1e-3,
    3e-4,
    1e-4,
)
DEFAULT_T_LADDER: Final[tuple[float, ...]] = (1e-2, 5e-3)
MIN_LADDER_POINTS: Final[int] = 4
MIN_LADDER_DECADES: Final[float] = 2.0
CONVERGENCE_MIN_SLOPE: Final[float] = 0.45
CONVERGENCE_MAX_RESIDUAL: Final[float] = 0.1
SIGMA_RELATIVE: Final[float] = 1e-10

# =============================================================================
# Loewner Test Constants
# =============================================================================
TAU_CALIBRATION_FACTOR: Final[float] = 2.0

# =============================================================================
# Serialization Constants
# =============================================================================
NDMATRIX_FORMAT: Final[str] = "ndmatrix/1"
LOAD_BASIS_KIND: Final[str] = "edge-indicator/1"
PGM_MAXVAL: Final[int] = 255
PGM_PIXEL_SCALE: Final[int] = 8

# =============================================================================
# Output File Names
# =============================================================================
MANIFEST_FILE: Final[str] = "manifest.json"
ND_MATRIX_FILE: Final[str] = "nd_matrix.txt"
INDICATOR_CSV_FILE: Final[str] = "indicators.csv"
INDICATOR_PGM_FILE: Final[str] = "indicators.pgm"
MASK_PGM_FILE: Final[str] = "mask.pgm"
STUDY_CSV_FILE: Final[str] = "study.csv"
STUDY_TEXT_FILE: Final[str] = "study.txt"
LOCALIZE_CSV_FILE: Final[str] = "localize.csv"
LOCALIZE_TEXT_FILE: Final[str] = "localize.txt"
TAU_FILE: Final[str] = "tau.json"
DISPLACEMENT_FILE: Final[str] = "displacement.csv"
MESH_DUMP_FILE: Final[str] = "mesh.txt"

# =============================================================================
# Exit Codes
# =============================================================================
EXIT_OK: Final[int] = 0
EXIT_VALIDATION: Final[int] = 1
EXIT_NUMERICAL: Final[int] = 2
