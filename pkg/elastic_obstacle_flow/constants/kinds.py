from enum import Enum


class ObstacleKind(str, Enum):
    SYMMETRIC_CONE = "symmetric_cone"
    SAMPLED = "sampled"


class DatumKind(str, Enum):
    SINE = "sine"
    TABLE = "table"
    STATIONARY = "stationary"
    FLAT = "flat"


class InterpolantKind(str, Enum):
    """Time interpolations of the discrete steps."""
    LINEAR = "linear"
    # right-constant: u_i on ((i-1)tau, i tau]
    UPPER = "upper"
    # left-constant: u_{i-1} on ((i-1)tau, i tau]
    LOWER = "lower"


class CriticalBranch(str, Enum):
    CN = "cn"
    DN = "dn"
