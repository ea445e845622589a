"""Modified Patankar integrators for production-destruction systems, with
Lyapunov and overshoot time-step bounds on the linear two-species test problem."""

__version__ = "0.1.0"

from .pds import PdsSystem, TestProblem, as_pds, exact_solution, linear_pds, steady_state
from .schemes import SchemeConfig, StepContext, integrate, register_extension, step
from .stability import closed_form, jacobian_R, lyapunov_dt0, mpdec_recurrence
from .subtimesteps import NodeFamily, nodes, theta_matrix
from .oscillation import numerical_dt0, overshoots, verify_theorem1

__all__ = [
    "NodeFamily",
    "PdsSystem",
    "SchemeConfig",
    "StepContext",
    "TestProblem",
    "as_pds",
    "closed_form",
    "exact_solution",
    "integrate",
    "jacobian_R",
    "linear_pds",
    "lyapunov_dt0",
    "mpdec_recurrence",
    "nodes",
    "numerical_dt0",
    "overshoots",
    "register_extension",
    "step",
    "steady_state",
    "theta_matrix",
    "verify_theorem1",
]
