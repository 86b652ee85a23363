"""Percolation of directed SINR graphs: sampling, components, critical points and bounds."""

__version__ = "0.1.0"

from .components import (
    TYPES,
    ComponentReport,
    GiantStats,
    component_labels,
    component_report,
    giant_stats,
    in_component,
    out_component,
)
from .graph import MAX_RULE, MIN_RULE, SinrGraph, UndirectedView, build_directed, derive_undirected
from .model import (
    BinaryPower,
    BinaryRadius,
    ConstantPower,
    ConstantRadius,
    ModelError,
    PowerLawRadius,
    ShiftedPowerLaw,
    SinrParams,
    TableAttenuation,
    UniformPower,
    validate_model,
)
from .sampling import Configuration, Region, sample_configuration

__all__ = [
    "TYPES", "ComponentReport", "GiantStats", "component_labels", "component_report", "giant_stats",
    "in_component", "out_component", "MAX_RULE", "MIN_RULE", "SinrGraph", "UndirectedView",
    "build_directed", "derive_undirected", "BinaryPower", "BinaryRadius", "ConstantPower",
    "ConstantRadius", "ModelError", "PowerLawRadius", "ShiftedPowerLaw", "SinrParams",
    "TableAttenuation", "UniformPower", "validate_model", "Configuration", "Region",
    "sample_configuration", "__version__",
]
