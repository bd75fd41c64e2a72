"""Fractional-order hybrid integrator-gain systems.

Fractional operators, the switching filter, its describing function, the
generalized architectures and a PID loop around a double integrator.
"""

from .architectures import (ArchitectureA, ArchitectureB, DoubleIntegrator,
                            FractionalLowPass, PIDController, PidParams,
                            build_pid, plant_step)
from .base import (FilterChain, Gain, LinearFilter, ParallelSum, SignalFilter,
                   TimeSeries, check_dt, check_signal)
from .describing import (DfQuery, FrequencyResponsePoint, GammaIntermediates,
                         GammaSolveError, df_classic, df_fractional,
                         df_harmonic_n, gamma_classic, gamma_fractional,
                         gamma_intermediates, piecewise_output, switching_angle)
from .fractional import (DEFAULT_CAPACITY, HistoryBuffer, RationalFracFilter,
                         design_fractional_lowpass, design_rational_frac_filter,
                         frac_diff, frac_diff_series, frac_int, gl_weights,
                         sinusoid_frac_rule)
from .higs import (FractionalHIGS, HigsMode, HigsParams, HigsState, SwitchEvent,
                   Trigger, classic_higs_response, higs_response, higs_step,
                   initial_state)
from .simulation import (HarmonicSpectrum, NoSteadyStateError, SimConfig,
                         SimulationError, StepMetrics, estimate_df,
                         harmonic_spectrum, linear_loop_oracle,
                         simulate_closed_loop, simulate_open_loop, step_metrics)

__version__ = "0.1.0"
