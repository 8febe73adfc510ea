"""Stick-slip transport of parts up a vertically vibrating surface.

The subpackages cover the hybrid stick-slip simulator (``dynamics``), surface
acceleration profiles (``waveforms``), closed-form transport limits and
sweeps (``analysis``) and friction calibration from tracked traces
(``fitting``). ``python -m vibrolift`` and the ``vibrolift`` console script
expose the same workflows on the command line.
"""

from .analysis import (FeasibilityReport, NondimensionalPoint, SweepResult, f_n_max,
                       feasibility_report, optimal_f_n, sweep, v_ave_closed_form)
from .dynamics import (ContactMode, FrictionPair, SystemState, Trajectory, TransportConfig,
                       horizontal_equivalent, net_slip, simulate, simulate_from_surface_trace,
                       steady_state_velocity, step)
from .errors import (DivergenceError, InfeasibleError, NotConvergedError, ValidationError,
                     VibroliftError)
from .fitting import (ExperimentTrace, FitResult, FrictionEstimator, fit, load_trace,
                      synthesize_trace, trial_error)
from .waveforms import (Waveform, optimal_waveform, sampled_waveform, sawtooth_waveform,
                        zero_waveform)

__version__ = "0.1.0"

__all__ = [
    "ContactMode", "DivergenceError", "ExperimentTrace", "FeasibilityReport", "FitResult",
    "FrictionEstimator", "FrictionPair", "InfeasibleError", "NondimensionalPoint",
    "NotConvergedError", "SweepResult", "SystemState", "Trajectory", "TransportConfig",
    "ValidationError", "VibroliftError", "Waveform", "f_n_max", "feasibility_report", "fit",
    "horizontal_equivalent", "load_trace", "net_slip", "optimal_f_n", "optimal_waveform",
    "sampled_waveform", "sawtooth_waveform", "simulate", "simulate_from_surface_trace",
    "steady_state_velocity", "step", "sweep", "synthesize_trace", "trial_error",
    "v_ave_closed_form", "zero_waveform",
]
