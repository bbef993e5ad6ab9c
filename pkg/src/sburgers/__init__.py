"""Spectral Galerkin simulation and verification toolkit for a stochastic
Burgers equation with Brownian and compensated Poisson jump forcing."""

__version__ = "0.1.0"

from .spectral import (
    SpectralField,
    GridFunction,
    zero_field,
    basis_field,
    random_field,
    norm_h,
    norm_v,
    inner_h,
    burgers_nonlinearity,
    evaluate,
    project,
    heat_semigroup,
)
from .noise import (
    GaussianSpec,
    JumpSpec,
    ExponentialMarks,
    DeterministicMarks,
    ConstantDirection,
    SaturatedDirection,
    hypothesis_constants,
)
from .integrator import (
    SimConfig,
    Trajectory,
    simulate,
    ensemble,
    derive_seed,
    BlowUpError,
)
from .lyapunov import (
    DriftConstants,
    psi,
    grad_psi,
    hess_psi_apply,
    drift_condition_check,
    exp_martingale_path,
    exp_integral_moment,
)
from .ergodics import (
    Observable,
    mode_coefficient,
    observable_dictionary,
    occupation_measure,
    invariant_estimate,
    sigma_squared,
    ergodic_decay,
    hitting_times,
    deviation_tail_probe,
)
from .harness import (
    ConfigError,
    RunConfig,
    load_config,
    parse_config,
    config_hash,
    run_simulate,
    run_verify,
    run_estimate,
)

__all__ = [
    "__version__",
    "SpectralField",
    "GridFunction",
    "zero_field",
    "basis_field",
    "random_field",
    "norm_h",
    "norm_v",
    "inner_h",
    "burgers_nonlinearity",
    "evaluate",
    "project",
    "heat_semigroup",
    "GaussianSpec",
    "JumpSpec",
    "ExponentialMarks",
    "DeterministicMarks",
    "ConstantDirection",
    "SaturatedDirection",
    "hypothesis_constants",
    "SimConfig",
    "Trajectory",
    "simulate",
    "ensemble",
    "derive_seed",
    "BlowUpError",
    "DriftConstants",
    "psi",
    "grad_psi",
    "hess_psi_apply",
    "drift_condition_check",
    "exp_martingale_path",
    "exp_integral_moment",
    "Observable",
    "mode_coefficient",
    "observable_dictionary",
    "occupation_measure",
    "invariant_estimate",
    "sigma_squared",
    "ergodic_decay",
    "hitting_times",
    "deviation_tail_probe",
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "config_hash",
    "run_simulate",
    "run_verify",
    "run_estimate",
]
