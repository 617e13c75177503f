"""Numerical laboratory for the traveling waves of
    n_t - gamma (n^gamma n_x)_x = n (1 - n^gamma)
and their stiff-pressure (Hele-Shaw) limit."""

__version__ = "0.1.0"

from .core import (BracketError, ConfigError, DomainError, GridSpec, MesaError, NumericalError,  # noqa: E402
                   ParameterError, RangeError, SampledFunction, SolverError, StabilityError,
                   WaveParams, critical_speed)
from .tw_profile import Profile, ProfileTable, solve_profile  # noqa: E402
from .landmarks import Landmarks, locate_landmarks  # noqa: E402
from .weights import WeightTable, build_weights  # noqa: E402
from .spectral import GapEstimate, estimate_gap  # noqa: E402

__all__ = ["__version__", "BracketError", "ConfigError", "DomainError", "GridSpec", "MesaError",
           "NumericalError", "ParameterError", "RangeError", "SampledFunction", "SolverError",
           "StabilityError", "WaveParams", "critical_speed", "Profile", "ProfileTable",
           "solve_profile", "Landmarks", "locate_landmarks", "WeightTable", "build_weights",
           "GapEstimate", "estimate_gap"]
