"""Numerical laboratory for stochastic kinetic equations on a periodic (x, v) grid."""
from .errors import ConfigurationError, DomainError, FilterDegeneracyError, InstabilityError
from .grid import Field, PhaseGrid, SpectralField, from_spectral, lp_norm, make_grid, to_spectral
from .semigroup import apply_semigroup, generator_residual, kernel_density, transport

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DomainError",
    "FilterDegeneracyError",
    "InstabilityError",
    "Field",
    "PhaseGrid",
    "SpectralField",
    "from_spectral",
    "lp_norm",
    "make_grid",
    "to_spectral",
    "apply_semigroup",
    "generator_residual",
    "kernel_density",
    "transport",
]
