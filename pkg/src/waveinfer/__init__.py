"""Simulation and parameter inference for damped second-order linear SPDEs.

The truncated model is a system of N independent second-order modes

    du_n = v_n dt
    dv_n = (-b kappa_n u_n - 2 a v_n) dt + noise,

coupled only through the noise covariance. The package provides closed-form
per-mode propagators for the oscillatory, overdamped and critical damping
regimes, the invariant-measure covariance and its trace, two minimum-contrast
estimator families for (a, b) built from time-averaged energy functionals,
their asymptotic variances, and a seeded Monte Carlo harness with a CLI.
"""

from .model import (
    ConfigError,
    Model,
    builtin_preset,
    load_config,
    model_from_config,
    trace_q,
)
from .semigroup import (
    Regime,
    classify_mode,
    expm_oracle,
    mode_generator,
    mode_propagator,
    r_matrices,
    v_inner,
)
from .covariance import (
    asymptotic_variances,
    clt_trace,
    diagonal_variance_shortcut,
    q_infinity_apply,
    q_infinity_dense,
    q_infinity_quadrature_oracle,
    trace_q_infinity,
)
from .estimate import (
    EstimateSet,
    estimate_all,
    estimate_hat,
    estimate_tilde,
    running_estimates,
)
from .simulate import (
    NoiseFactor,
    NumericError,
    PathStatistics,
    exact_transition,
    ito_identity_residual,
    noise_factor,
    simulate_path,
)
from .harness import (
    McReport,
    normality_test,
    report_from_json,
    report_to_json,
    run_monte_carlo,
    summarize,
    write_samples_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Model",
    "builtin_preset",
    "load_config",
    "model_from_config",
    "trace_q",
    "Regime",
    "classify_mode",
    "expm_oracle",
    "mode_generator",
    "mode_propagator",
    "r_matrices",
    "v_inner",
    "asymptotic_variances",
    "clt_trace",
    "diagonal_variance_shortcut",
    "q_infinity_apply",
    "q_infinity_dense",
    "q_infinity_quadrature_oracle",
    "trace_q_infinity",
    "EstimateSet",
    "estimate_all",
    "estimate_hat",
    "estimate_tilde",
    "running_estimates",
    "NoiseFactor",
    "NumericError",
    "PathStatistics",
    "exact_transition",
    "ito_identity_residual",
    "noise_factor",
    "simulate_path",
    "McReport",
    "normality_test",
    "report_from_json",
    "report_to_json",
    "run_monte_carlo",
    "summarize",
    "write_samples_csv",
]
