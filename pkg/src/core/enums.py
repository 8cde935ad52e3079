"""Enumeration types for the application.

This module contains all enum classes used throughout the application.
"""

from enum import Enum


class BoundarySide(str, Enum):
    """Sides of the unit square.

    Attributes:
        BOTTOM: The side x2 = 0.
        TOP: The side x2 = 1.
        LEFT: The side x1 = 0.
        RIGHT: The side x1 = 1.
    """

    BOTTOM = "bottom"
    TOP = "top"
    LEFT = "left"
    RIGHT = "right"


class BoundaryTag(str, Enum):
    """Boundary condition carried by a boundary edge.

    Attributes:
        DIRICHLET: Zero displacement.
        NEUMANN: Prescribed traction.
    """

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class InclusionKind(str, Enum):
    """Material state of an element or region.

    Attributes:
        FINITE: Finite positive Lame parameters.
        CAVITY: Vanishing Lame parameters (perfectly elastic).
        RIGID: Infinite Lame parameters (infinitely stiff).
    """

    FINITE = "finite"
    CAVITY = "cavity"
    RIGID = "rigid"


class OperatorMode(str, Enum):
    """Test operator variant for inner tests.

    Attributes:
        FULL: Perturbed ND map from a forward solve.
        LINEARIZED: Background ND map plus Frechet derivative.
    """

    FULL = "full"
    LINEARIZED = "linearized"


class InclusionSign(str, Enum):
    """Sign of definite inclusions for inner reconstruction.

    Attributes:
        POSITIVE: Rigid (stiffer) inclusions.
        NEGATIVE: Cavity (softer) inclusions.
    """

    POSITIVE = "positive"
    NEGATIVE = "negative"


class OuterInequality(str, Enum):
    """Which half of a two-sided outer test is consulted.

    Attributes:
        BOTH: Both inequalities.
        LOWER: Only ``measured >= lower operator`` (positive inclusions).
        UPPER: Only ``upper operator >= measured`` (negative inclusions).
        AUTO: Derived from the signs present in the phantom.
    """

    BOTH = "both"
    LOWER = "lower"
    UPPER = "upper"
    AUTO = "auto"


class ExtremeMode(str, Enum):
    """How extreme test operators are computed.

    Attributes:
        EXACT: Constrained solve (cavity removal, rigid condensation).
        TRUNCATED: Finite truncation of the extreme parameters.
    """

    EXACT = "exact"
    TRUNCATED = "truncated"


class ChannelMode(str, Enum):
    """Access channels used to build outer test sets.

    Attributes:
        NEAREST: One channel towards the nearest side.
        ALL: Four channels, one per side.
    """

    NEAREST = "nearest"
    ALL = "all"


class Direction(str, Enum):
    """Channel directions from a pixel to the clipped-domain edge.

    Declaration order breaks ties between channels of equal length.
    """

    LEFT = "left"
    RIGHT = "right"
    DOWN = "down"
    UP = "up"


class CalibrationFamily(str, Enum):
    """Test families a threshold can be calibrated for.

    Attributes:
        OUTER: Extreme outer test.
        INNER: Inner tests.
        LINEARIZED_OUTER: Linearized outer test.
    """

    OUTER = "outer"
    INNER = "inner"
    LINEARIZED_OUTER = "linearized_outer"


class Command(str, Enum):
    """CLI commands.

    Attributes:
        FORWARD: Solve one configured traction.
        ND: Write the measured ND matrix.
        RECONSTRUCT_OUTER: Outer reconstruction.
        RECONSTRUCT_INNER: Inner reconstruction.
        RECONSTRUCT_LINEARIZED: Linearized outer reconstruction.
        CONVERGENCE: Truncation convergence study.
        LOCALIZE: Localized potentials demonstrator.
        CALIBRATE: Threshold calibration.
    """

    FORWARD = "forward"
    ND = "nd"
    RECONSTRUCT_OUTER = "reconstruct-outer"
    RECONSTRUCT_INNER = "reconstruct-inner"
    RECONSTRUCT_LINEARIZED = "reconstruct-linearized"
    CONVERGENCE = "convergence"
    LOCALIZE = "localize"
    CALIBRATE = "calibrate"
