"""Reference probe and double-tube configuration (two 10 mm walls).

Lengths in meters.  Regions 1 and 3 of the stack are air; 2 and 4 are the
tube walls.
"""

from __future__ import annotations

from .forward_model import CoilSpec, ProbeAssembly, TruncatedDomain, default_h, place_coils
from .layered_medium import AIR, Layer, LayerStack

__all__ = [
    "TUBE_RADII",
    "SIGMA",
    "MATERIALS",
    "TX_RADII",
    "TX_LENGTH",
    "TX_TURNS",
    "RX_RADII",
    "RX_LENGTH",
    "RX_TURNS",
    "GAP",
    "table1_stack",
    "table1_assembly",
    "table1_domain",
]

TUBE_RADII = (0.070, 0.060, 0.050, 0.040)
SIGMA = 3.0e6
MATERIALS = {"carbon": 100.0, "stainless": 1.0}

TX_RADII = (0.020, 0.030)
TX_LENGTH = 0.040
TX_TURNS = 1600
RX_RADII = (0.020, 0.030)
RX_LENGTH = 0.010
RX_TURNS = 10000
GAP = 0.010


def table1_stack(material: str = "carbon") -> LayerStack:
    """Two tubes of the named material (``"carbon"`` or ``"stainless"``)."""
    try:
        mu_r = MATERIALS[material]
    except KeyError:
        raise KeyError(f"unknown material {material!r}; choose from {sorted(MATERIALS)}") from None
    wall = Layer(SIGMA, mu_r)
    return LayerStack([AIR, wall, AIR, wall], TUBE_RADII)


def table1_assembly(h: float, drive_amplitude: float = 1.0) -> ProbeAssembly:
    """Transmitter and receiver centred in a domain of length ``h``."""
    z1t, z2t, z1r, z2r = place_coils(h, TX_LENGTH, RX_LENGTH, GAP)
    tx = CoilSpec(*TX_RADII, z1t, z2t, TX_TURNS)
    rx = CoilSpec(*RX_RADII, z1r, z2r, RX_TURNS)
    return ProbeAssembly(tx, rx, drive_amplitude)


def table1_domain(material: str = "carbon", h: float | None = None,
                  n_modes: int = 50) -> TruncatedDomain:
    """Domain with the default truncation rule unless ``h`` is given."""
    if h is None:
        tx = CoilSpec(*TX_RADII, 1.0, 1.0 + TX_LENGTH, TX_TURNS)
        h = default_h(table1_stack(material), tx)
    return TruncatedDomain(h, n_modes)
