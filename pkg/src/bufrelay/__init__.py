"""Buffer-aided half-duplex relaying with adaptive link selection.

Closed-form throughput/delay analytics, threshold and power-allocation
solvers, and a slot-level Monte-Carlo simulator that cross-validates them.
"""

from .channel import FadingModel, LinkSnapshot, custom, pdf_at, rayleigh, sample
from .closed_form import (
    DelayMoments,
    arrival_rate,
    delay_moments,
    delay_upper_bound,
    drop_probability_bound,
    pa_residuals,
    tau_conv1_rayleigh,
    tau_conv2_rayleigh,
    tau_max,
    threshold_residual,
)
from .policies import (
    DecisionFunction,
    PolicySpec,
    allocate_power,
    conventional_schedule,
    identity,
    l_thresholds,
    log_capacity,
    select_fixed_power,
    select_queue_limited,
    select_with_power,
)
from .relay_buffer import RelayBuffer, mean_delay_little
from .simulator import Metrics, SimConfig, run, run_conventional_finite
from .solvers import (
    SolverResult,
    solve_lambda_rho,
    solve_rho_for_delay,
    solve_rho_for_load,
    solve_rho_opt,
    tau_conv2_pa_rayleigh,
)
from .special_functions import (
    ConvergenceError,
    QuadratureSpec,
    exp_integral_e1,
    integrate_semi_infinite,
    lambert_w,
)

__version__ = "0.1.0"
