"""Free-particle and sticky-particle solutions of one-dimensional pressureless gas dynamics."""

from .errors import (AuditFailure, ConfigError, ConvergenceError, DomainError, GeometryError,
                     PressurelessError, VacuumError)
from .fields import Grid, LineMeasure, Piece, PiecewiseFunction, RiemannData, SmoothData, mollify, preset
from .kernel import KernelParams, PhaseDensity, fp_solution, integral_term, rho_sigma, u_hat_sigma
from .riemann import riemann_fp, rho_eps_sigma_closed, u_eps_sigma_closed
from .blowup import analyse
from .sticky import jump_trajectory_constant, post_blowup_evolution, sticky_particle_oracle
from .hugoniot import audit_fp, audit_sticky, entropy_audit
from .sde import McConfig, estimate_fields, simulate
from .flux import FluxMap, preset_flux, transform_problem

__version__ = "0.1.0"

__all__ = [
    "AuditFailure", "ConfigError", "ConvergenceError", "DomainError", "GeometryError",
    "PressurelessError", "VacuumError", "Grid", "LineMeasure", "Piece", "PiecewiseFunction",
    "RiemannData", "SmoothData", "mollify", "preset", "KernelParams", "PhaseDensity",
    "fp_solution", "integral_term", "rho_sigma", "u_hat_sigma", "riemann_fp",
    "rho_eps_sigma_closed", "u_eps_sigma_closed", "analyse", "jump_trajectory_constant",
    "post_blowup_evolution", "sticky_particle_oracle", "audit_fp", "audit_sticky", "entropy_audit",
    "McConfig", "estimate_fields", "simulate", "FluxMap", "preset_flux", "transform_problem",
]
