"""Spectral simulation and diagnostics for the defocusing NLS with a 1D confining potential.

The state lives on a tensor grid: a Dirichlet-truncated interval in the confined
direction ``x`` and a periodic box in the transverse directions ``y``.
"""

from .errors import (
    BlowUpError,
    ConfigurationError,
    ConvergenceError,
    HorizonError,
    InequalityViolation,
    NLSWarning,
    NumericalError,
)
from .potential import PotentialKind, PotentialSpec, eval_potential, lower_bound_constant
from .eigenbasis import (
    EigenBasis,
    XGrid,
    analyze_x,
    apply_sqrt_M,
    build_eigenbasis,
    linear_phase_x,
    synthesize_x,
)
from .field import (
    Field,
    NormReport,
    Representation,
    YGrid,
    gaussian_field,
    lebesgue_norm,
    mixed_norm_LkyLinfx,
    norms,
    to_physical,
    to_spectral,
)
from .propagator import (
    SimConfig,
    TrajectoryRecord,
    evolve,
    linear_step,
    nonlinear_step,
    strang_step,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "ConfigurationError",
    "ConvergenceError",
    "EigenBasis",
    "Field",
    "HorizonError",
    "InequalityViolation",
    "NLSWarning",
    "NormReport",
    "NumericalError",
    "PotentialKind",
    "PotentialSpec",
    "Representation",
    "SimConfig",
    "TrajectoryRecord",
    "XGrid",
    "YGrid",
    "analyze_x",
    "apply_sqrt_M",
    "build_eigenbasis",
    "eval_potential",
    "evolve",
    "gaussian_field",
    "lebesgue_norm",
    "linear_phase_x",
    "linear_step",
    "lower_bound_constant",
    "mixed_norm_LkyLinfx",
    "nonlinear_step",
    "norms",
    "strang_step",
    "synthesize_x",
    "to_physical",
    "to_spectral",
]
