"""Generalized operator norms by enumeration over covering nets."""

__version__ = "0.1.0"

from .algorithms import (  # noqa: E402
    EstimateReport,
    hsep_basic,
    hsep_multipartite,
    hsep_sparse,
    injective_norm,
    s1_to_banach,
)
from .feascheck import FeasibilityResult, SolverConfig, Status, check_feasible  # noqa: E402
from .model import (  # noqa: E402
    BanachDescriptor,
    EBChannel,
    GeneralDecomposition,
    MultipartiteLOCC,
    Node,
    OneWayLOCC,
    banach_constants,
    validate,
)

__all__ = [
    "BanachDescriptor",
    "EBChannel",
    "EstimateReport",
    "FeasibilityResult",
    "GeneralDecomposition",
    "MultipartiteLOCC",
    "Node",
    "OneWayLOCC",
    "SolverConfig",
    "Status",
    "banach_constants",
    "check_feasible",
    "hsep_basic",
    "hsep_multipartite",
    "hsep_sparse",
    "injective_norm",
    "s1_to_banach",
    "validate",
]
