"""Structural scattering of 1-bit reconfigurable intelligent surfaces.

Two RIS channel models (phase-shift and mutual-impedance), their optimizers,
and a coupled-dipole surrogate that evaluates configurations as angular
scattering maps.
"""
__version__ = "0.1.0"

from .geometry import ArrayLayout, PlaneWaveDirection  # noqa: E402
from .impedance import DipoleSpec, ImpedanceSet, LoadModel  # noqa: E402
from .scenario import ScenarioConfig, parse_scenario  # noqa: E402

__all__ = ["ArrayLayout", "PlaneWaveDirection", "DipoleSpec", "ImpedanceSet", "LoadModel",
           "ScenarioConfig", "parse_scenario", "__version__"]
