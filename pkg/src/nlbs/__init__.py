"""Hedge costs of a large trader in an illiquid market.

The model is the nonlinear Black-Scholes equation

    u_t + (sigma^2 S^2 / 2) u_SS / (1 - rho S u_SS)^2 = 0.

Modules
-------
model        parameters, payoffs, grids and the PDE residual
closed_form  explicit invariant solutions, symmetry group, asymptotics, Greeks
fd           fully implicit and explicit finite differences, linear reference
validation   named checks producing machine-readable reports
cli          scenario files in, CSV out
"""

__version__ = "0.1.0"

from .closed_form import (ClosedFormParams, GroupElement, apply_group, asymptotic_large_S,
                          asymptotic_small_S, greeks, invariant_u, invariant_y, trivial_u)
from .errors import (DegenerateFamily, DomainError, NLBSError, NoConvergence, ScenarioError,
                     SingularDenominator, SingularJacobian, UnknownCheck)
from .fd import (SolverConfig, assemble_layer_residual, explicit_solve_backward,
                 implicit_solve_backward, linear_bs_price, linear_fd_solve)
from .model import (BullSpread, Call, ClosedFormSnapshot, GridSpec, MarketParams, SolutionField,
                    Strangle, degenerate_surface, payoff_value, pde_residual, rho_rescale)
from .newton import NewtonOptions, newton_solve

__all__ = [
    "BullSpread", "Call", "ClosedFormParams", "ClosedFormSnapshot", "DegenerateFamily", "DomainError",
    "GridSpec", "GroupElement", "MarketParams", "NLBSError", "NewtonOptions", "NoConvergence",
    "ScenarioError", "SingularDenominator", "SingularJacobian", "SolutionField", "SolverConfig",
    "Strangle", "UnknownCheck", "apply_group", "assemble_layer_residual", "asymptotic_large_S",
    "asymptotic_small_S", "degenerate_surface", "explicit_solve_backward", "greeks",
    "implicit_solve_backward", "invariant_u", "invariant_y", "linear_bs_price", "linear_fd_solve",
    "newton_solve", "payoff_value", "pde_residual", "rho_rescale", "trivial_u",
]
