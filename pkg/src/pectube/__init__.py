"""Pulsed eddy-current forward model for coaxial probes in layered tubes."""

from .errors import PectubeError
from .forward_model import (
    CoilSpec,
    ProbeAssembly,
    TruncatedDomain,
    air_inductance,
    voltage_integral,
    voltage_sum,
)
from .layered_medium import AIR, MU0, Layer, LayerStack, reflection
from .transient import (
    DominantMode,
    InversionOptions,
    TransientResult,
    dominant_mode,
    thinning_scenarios,
    transient_voltage,
    transition_time,
)

__version__ = "0.1.0"

__all__ = [
    "AIR",
    "MU0",
    "CoilSpec",
    "DominantMode",
    "InversionOptions",
    "Layer",
    "LayerStack",
    "PectubeError",
    "ProbeAssembly",
    "TransientResult",
    "TruncatedDomain",
    "air_inductance",
    "dominant_mode",
    "reflection",
    "thinning_scenarios",
    "transient_voltage",
    "transition_time",
    "voltage_integral",
    "voltage_sum",
]
