"""Steady states, currents and counting statistics of boundary-driven quantum chains."""

__version__ = "0.1.0"

from .analysis import TransportFit, fit_exponent, rectification
from .baths import BathSpec, SpectralDensity
from .generators import Counter, GeneratorBundle, add_dephasing, build_gme, build_lme, build_redfield
from .liouville import bond_currents, evolve, liouvillian, spectrum, steady_state
from .model import HamiltonianSpec, PotentialSpec, build_hamiltonian

__all__ = [
    "__version__",
    "BathSpec",
    "Counter",
    "GeneratorBundle",
    "HamiltonianSpec",
    "PotentialSpec",
    "SpectralDensity",
    "TransportFit",
    "add_dephasing",
    "bond_currents",
    "build_gme",
    "build_hamiltonian",
    "build_lme",
    "build_redfield",
    "evolve",
    "fit_exponent",
    "liouvillian",
    "rectification",
    "spectrum",
    "steady_state",
]
