"""Finite models of capacities: iterated-norm and potential capacities, joins,
Hausdorff premeasures, a truncated covering game, and a property suite."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CapacityLabError,
    ConfigError,
    DegenerateCell,
    Infeasible,
    InvalidInstance,
    InvalidPath,
    NoConvergence,
    SingularKernel,
    SpaceTooLarge,
    SupportViolation,
    TooLarge,
    UseGreedy,
)
from .handles import SubmeasureHandle  # noqa: E402
from .space import PointSet, ProductTreeSpace, TreeMetric  # noqa: E402
from .steprans import DerivedCapacity, MaxNorm, NormTower, TableNorm, WeightedP  # noqa: E402

__all__ = [
    "CapacityLabError",
    "ConfigError",
    "DegenerateCell",
    "DerivedCapacity",
    "Infeasible",
    "InvalidInstance",
    "InvalidPath",
    "MaxNorm",
    "NoConvergence",
    "NormTower",
    "PointSet",
    "ProductTreeSpace",
    "SingularKernel",
    "SpaceTooLarge",
    "SubmeasureHandle",
    "SupportViolation",
    "TableNorm",
    "TooLarge",
    "TreeMetric",
    "UseGreedy",
    "WeightedP",
]
