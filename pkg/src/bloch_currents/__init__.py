"""Phase-space probability currents for finite spins.

Spin states evolve under quadratic Hamiltonians with optional collective
damping. They are mapped to s-ordered distributions on the sphere
(s = -1 Husimi, 0 Wigner, +1 Glauber-Sudarshan), and the currents that
carry those distributions are formed and analysed.
"""

from .currents import CurrentField, classical_velocity, divergence, dissipative_current, kerr_current, total_current
from .currents import unitary_current
from .dynamics import DissipationParams, QuadraticHamiltonian, evolve, kerr, lindblad_rhs, lmg, propagate
from .flow_analysis import integral_flow, stagnation_points, tunnelling_flow, unitary_overlap
from .flow_analysis import winding_number
from .phasespace_map import coherent_symbol, default_grid, kernel, overlap, reconstruct, symbol
from .scenarios import ScenarioConfig, calibrate_lmg, preset
from .semiclassics import hamilton_flow, twa_propagate
from .sphere import SphereGrid, SymbolField
from .spin_algebra import SpinIrrep, angular_momentum, clebsch_gordan, coherent_state, tensor_operator

__version__ = "0.1.0"

__all__ = [
    "CurrentField",
    "DissipationParams",
    "QuadraticHamiltonian",
    "ScenarioConfig",
    "SphereGrid",
    "SpinIrrep",
    "SymbolField",
    "angular_momentum",
    "calibrate_lmg",
    "classical_velocity",
    "clebsch_gordan",
    "coherent_state",
    "coherent_symbol",
    "default_grid",
    "dissipative_current",
    "divergence",
    "evolve",
    "hamilton_flow",
    "integral_flow",
    "kerr",
    "kerr_current",
    "kernel",
    "lindblad_rhs",
    "lmg",
    "overlap",
    "preset",
    "propagate",
    "reconstruct",
    "stagnation_points",
    "symbol",
    "tensor_operator",
    "total_current",
    "tunnelling_flow",
    "twa_propagate",
    "unitary_current",
    "unitary_overlap",
    "winding_number",
]
