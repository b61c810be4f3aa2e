"""Particle model with logarithmic entropy and power-law attraction.

Positions are 1-D numpy arrays, strictly increasing with zero mean.
"""

from ._core import (
    DomainError,
    NumericalFailure,
    Params,
    PreconditionError,
    TimeScaling,
    c_of_mu,
    c_of_n,
    classify_initial,
    convergence_report,
    energy_g,
    energy_gradient,
    entropy_u,
    gamma0_mass_threshold,
    gaussian_mu,
    global_existence_threshold,
    interaction_w,
    lambda_min,
    phase_plane_sweep,
    phi,
    phi_rate_terms,
    reduced_to_state,
    rescale,
    simulate,
    state_to_reduced,
    symmetric_critical_point,
    velocity,
    virial_rhs,
)

__all__ = [name for name in dir() if not name.startswith("_")]
