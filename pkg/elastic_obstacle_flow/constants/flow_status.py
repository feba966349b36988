from enum import Enum


class FlowStatus(str, Enum):
    """Outcome of a minimizing-movements run."""
    COMPLETED = "COMPLETED"
    NON_CONVERGED = "NON_CONVERGED"
    CAP_VIOLATED = "CAP_VIOLATED"
