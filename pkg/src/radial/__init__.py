"""
Radial solver for spherically layered media.

Separates the conductivity / Helmholtz / Schrodinger equation into
spherical harmonics and solves each radial problem through interface
transmission systems.
"""

from .solver import (
    DNSpectrum,
    RadialSolution,
    dn_spectrum,
    free_dn_spectrum,
    free_dn_value,
    radial_solve,
)
from .eigen import dirichlet_eigenvalues, eigenvalues_below, neumann_eigenvalues
from .sweeps import (
    HiddenFlux,
    TrappedScan,
    check_quantum_preconditions,
    cloak_convergence_sweep,
    hidden_bc_flux,
    hidden_flux_sweep,
    interior_energy_ratio,
    interior_source_sweep,
    quantum_dn_convergence,
    run_work_items,
    trapped_state_scan,
)

__all__ = [
    "DNSpectrum",
    "RadialSolution",
    "dn_spectrum",
    "free_dn_spectrum",
    "free_dn_value",
    "radial_solve",
    "dirichlet_eigenvalues",
    "eigenvalues_below",
    "neumann_eigenvalues",
    "HiddenFlux",
    "TrappedScan",
    "check_quantum_preconditions",
    "cloak_convergence_sweep",
    "hidden_bc_flux",
    "hidden_flux_sweep",
    "interior_energy_ratio",
    "interior_source_sweep",
    "quantum_dn_convergence",
    "run_work_items",
    "trapped_state_scan",
]
