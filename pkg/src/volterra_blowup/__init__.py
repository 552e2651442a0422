"""Numerical toolkit for nonlinear memory equations of Volterra type.

Solves x'(t) = h(t) + integral of w(t-s) f(x(s)) ds, classifies
finite-time blow-up by the Osgood integral test, estimates blow-up
times from geometric crossing records, and verifies the sharp rate laws
FB(x(t))/(T - t) -> sqrt(2 w(0)) and FU(x(t))/t -> sqrt(2 w(0)).
"""

from .errors import (
    ConfigError,
    DivergentAcceleration,
    DomainError,
    InsufficientCrossings,
    QuadratureError,
    UndecidedError,
    VolterraError,
)
from .nonlinearity import (
    FunctionalTable,
    GrowthMap,
    NonlinearitySpec,
    OsgoodClass,
    OsgoodVerdict,
    check_osgood_equivalence,
    classify_osgood,
    custom,
    log_linear,
    nonlinearity_from_id,
    power_plus_one,
    pure_power,
    test_preserves_superexponential,
    test_superexponential,
)
from .kernels import (
    ForcingSpec,
    KernelSpec,
    custom_forcing,
    custom_kernel,
    forcing_from_id,
    inverse_gamma,
    kernel_from_id,
    power_decay,
    power_growth,
    rate_scale,
    stretched_exp,
    t_exp_decay,
    zero_forcing,
)
from .solver import (
    Aborted,
    BlowUpDetected,
    ReachedHorizon,
    SolverConfig,
    Trajectory,
    convolution_term,
    estimate_blowup_time,
    residual_check,
    solve,
)
from .comparison import (
    DelayProblem,
    solve_aux_ivp,
    solve_delay,
    solve_delay_kernel,
    solve_second_order,
)
from .asymptotics import (
    PerturbationClass,
    RateDiagnostic,
    RateVerdict,
    aitken_extrapolate,
    blowup_rate_diagnostic,
    growth_rate_diagnostic,
    perturbation_criterion,
)
from .scenarios import Scenario, load_scenario, save_scenario

__version__ = "0.1.0"
