"""Krasovskii-passivity controller synthesis and simulation toolkit."""

__version__ = "0.1.0"

from .assumptions import (
    AssumptionReport,
    CheckConfig,
    annihilator,
    check_a1,
    check_a2,
    check_a3,
    check_all,
)
from .control import (
    ControllerGains,
    ControllerRealization,
    Setpoint,
    alpha,
    beta,
    make_realization,
    make_setpoint,
    output_y,
    potential_gamma,
    potential_via_path,
    potential_via_polyline,
    solve_equilibrium_input,
    stabilizing_vdot,
    u_dot,
    xdot,
)
from .core import Box, ControlAffineModel, g_time_derivative, numeric_drift_jacobian
from .errors import (
    AssumptionError,
    EvaluationError,
    InfeasibleSetpointError,
    IntegrabilityError,
    IntegrationBlowupError,
    KrasovError,
    ScenarioError,
    SimulationAborted,
    SingularInputError,
)
from .simulate import (
    AuditReport,
    SimulationConfig,
    SimulationTrace,
    TraceRecord,
    VariationalState,
    audit_epsilon,
    passivity_audit,
    simulate_closed_loop,
    simulate_prolonged,
    step_rk4,
)

__all__ = [
    "__version__",
    "Box",
    "ControlAffineModel",
    "numeric_drift_jacobian",
    "g_time_derivative",
    "annihilator",
    "check_a1",
    "check_a2",
    "check_a3",
    "check_all",
    "CheckConfig",
    "AssumptionReport",
    "ControllerGains",
    "ControllerRealization",
    "Setpoint",
    "make_setpoint",
    "make_realization",
    "xdot",
    "alpha",
    "beta",
    "output_y",
    "u_dot",
    "potential_gamma",
    "potential_via_path",
    "potential_via_polyline",
    "solve_equilibrium_input",
    "stabilizing_vdot",
    "SimulationConfig",
    "SimulationTrace",
    "TraceRecord",
    "VariationalState",
    "step_rk4",
    "simulate_closed_loop",
    "simulate_prolonged",
    "passivity_audit",
    "audit_epsilon",
    "AuditReport",
    "KrasovError",
    "EvaluationError",
    "SingularInputError",
    "IntegrabilityError",
    "InfeasibleSetpointError",
    "AssumptionError",
    "IntegrationBlowupError",
    "SimulationAborted",
    "ScenarioError",
]
