"""Dark solitons of the nonlocal Gross-Pitaevskii equation in one dimension."""

from .errors import *  # noqa: F401,F403
from .kernels import KernelSpec, Kernel, build_kernel, contact_kernel, check_hypotheses, landau_speed
from .spectral import Grid, Field
from .gray import GrayProfile, SolverOptions, SolveReport, explicit_local_profile, solve_gray, continue_family

__version__ = "0.1.0"
