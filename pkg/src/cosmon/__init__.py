"""Mode solutions of the wave equation on a rotating cosmic string background.

Ray tracing, real-order Bessel functions, radial mode ODEs, the forward
solve with a complex absorber, and a windowed-Fourier phase-space proxy.
"""

from .background import BackgroundParams, ModeParams, PhasePoint
from .grid import GridSpec, SpacetimeField
from .prng import SplitMix64
from .solver import AbsorberSpec, ForwardSolver, solve_forward
from .wavefront import PhaseEnergy, phase_energy

__version__ = "0.1.0"

__all__ = [
    "AbsorberSpec",
    "BackgroundParams",
    "ForwardSolver",
    "GridSpec",
    "ModeParams",
    "PhaseEnergy",
    "PhasePoint",
    "SpacetimeField",
    "SplitMix64",
    "phase_energy",
    "solve_forward",
]
