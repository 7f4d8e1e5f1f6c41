"""Hamilton-Jacobi equations on the flat torus: monotone finite-difference
and semi-Lagrangian schemes, exact and fine-grid oracles, and an error /
convergence-rate verification harness."""

from .grid import (
    GridFunction,
    TorusGrid,
    backward_diff,
    forward_diff,
    interpolate,
    make_grid,
    periodize,
    sample,
)
from .hamiltonians import (
    Hamiltonian,
    InitialDatum,
    Potential,
    cosine_datum,
    cosine_potential,
    quadratic_hamiltonian,
    smoothed_norm_hamiltonian,
    tent_datum,
)
from .numhamil import (
    CflBound,
    NumericalHamiltonian,
    cfl_bound,
    lax_friedrichs,
    separable_1d,
    suggest_alpha,
    verify_monotone_update,
)
from .fd import FdParams, FdTrajectory, fd_params_for_time, fd_solve, fd_step, time_interpolate
from .sl import ControlField, SlParams, SlValueTable, optimality_residual, sl_solve, sl_step
from .oracle import HopfLaxProblem, brute_force_dp, hopf_lax_eval, hopf_lax_grid, reference_solve
from .analysis import (
    ErrorReport,
    fd_gap_l1,
    hessian_tv_estimate,
    interpolation_check,
    lipschitz_estimate,
    lp_error,
    rate_fit,
    semiconcavity_estimate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
