"""Selective Rips filtrations, persistent homology and loop localization on finite geodesic spaces."""

from srips.complex import (
    FilteredSimplex,
    Filtration,
    FiltrationParams,
    ScaleMap,
    build_filtration,
    cluster_value,
    filtration_value,
)
from srips.errors import (
    CombinatorialBudget,
    DisconnectedGraph,
    IllDefined,
    MemoryBudget,
    NoAttribution,
    OutOfRange,
    SripsError,
)
from srips.metric import (
    FiniteMetric,
    PointCloud,
    WindingContext,
    build_geodesic_metric,
    exact_circle_metric,
    exact_cylinder_metric,
    poisson_thin,
    sample_cut_sphere,
)
from srips.persistence import (
    Bar,
    Chain,
    PersistenceDiagram,
    bars_in_window,
    boundary,
    implicit_reduce,
    reduce,
)

__version__ = "0.1.0"

__all__ = [
    "Bar",
    "Chain",
    "CombinatorialBudget",
    "DisconnectedGraph",
    "FilteredSimplex",
    "Filtration",
    "FiltrationParams",
    "FiniteMetric",
    "IllDefined",
    "MemoryBudget",
    "NoAttribution",
    "OutOfRange",
    "PersistenceDiagram",
    "PointCloud",
    "ScaleMap",
    "SripsError",
    "WindingContext",
    "bars_in_window",
    "boundary",
    "build_filtration",
    "build_geodesic_metric",
    "cluster_value",
    "exact_circle_metric",
    "exact_cylinder_metric",
    "filtration_value",
    "implicit_reduce",
    "poisson_thin",
    "reduce",
    "sample_cut_sphere",
]
