"""Excitation control of a single machine on an infinite bus.

Backstepping and direct-feedback-linearizing controllers, a conventional
AVR + PSS baseline, a deterministic RK4 simulator and the analyses used to
compare them.
"""

from .analysis import (
    CctResult,
    LyapunovReport,
    Metrics,
    cct_search,
    compute_metrics,
    linearization_residual,
    robustness_margin,
    solve_lyapunov,
)
from .controllers import BsflGains, CpssParams, DflGains
from .engine import (
    ControllerKind,
    Event,
    EventKind,
    Scenario,
    SimOutcome,
    TimeSeries,
    fault_scenario,
    load_step_scenario,
    run_scenario,
)
from .model import (
    EquilibriumError,
    MachineParams,
    NetworkMode,
    OperatingPoint,
    compute_coefficients,
    compute_equilibrium,
)

__version__ = "0.1.0"
