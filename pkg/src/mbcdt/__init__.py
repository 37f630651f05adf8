"""Selective coherent destruction of tunneling in the driven two-site
Bose-Hubbard model and its waveguide-array realization."""

__version__ = "0.1.0"

from .averaging import bessel_j0, bessel_j1, cdt_amplitude, effective_couplings, j0_root
from .errors import (
    CDTError,
    ConfigurationError,
    ExtrapolationWarning,
    NoBoundModeError,
    NumericalFailure,
    ResolutionWarning,
    SearchFailure,
)
from .evolve import Trajectory, imbalance, integrate
from .floquet import FloquetResult, find_crossing, monodromy, quasi_energies
from .lattice import LatticeModel, ModelParams, build_lattice

__all__ = [
    "CDTError",
    "ConfigurationError",
    "ExtrapolationWarning",
    "FloquetResult",
    "LatticeModel",
    "ModelParams",
    "NoBoundModeError",
    "NumericalFailure",
    "ResolutionWarning",
    "SearchFailure",
    "Trajectory",
    "bessel_j0",
    "bessel_j1",
    "build_lattice",
    "cdt_amplitude",
    "effective_couplings",
    "find_crossing",
    "imbalance",
    "integrate",
    "j0_root",
    "monodromy",
    "quasi_energies",
]
