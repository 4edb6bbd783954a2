"""Simulator and analysis toolkit for the critical-field shift of a thin
superconducting film that forms one mirror of a vacuum cavity.

The package models the in-plane critical field of the paired
film/cavity system, synthesizes the fixed-field R(T) measurement
protocol with realistic instrument noise, recovers transition
temperatures and delta(H) curves, and runs the Monte Carlo study that
decides whether the predicted sub-millikelvin shift is detectable.
"""

from .analysis import (AnalysisResult, ConvergenceReport, DeltaCurve,
                       DerivativeCurve, DifferenceCurve, FitResult,
                       analyze_dataset, build_delta_curve, derivative_curve,
                       difference_curve, fit_transition,
                       linearity_and_convergence_report,
                       weighted_mean_difference)
from .config import RunConfig, default_run_config, load_run_config
from .errors import (CalibrationError, CavityShiftError, ConfigError,
                     DomainError, FitError, InputError, SolverError)
from .instrument import (InstrumentConfig, SampleGeometry, coil_field,
                         measure_profile, measure_resistance, noise_stream,
                         quantize_current, transition_resistance)
from .model import (EnergyBreakdown, ModelParams, calibrate_defaults,
                    casimir_shift, cavity_delta, condensation_energy,
                    critical_field, delta_derivative, delta_difference,
                    energy_breakdown, film_delta, magnetic_energy)
from .protocol import (SweepPlan, TransitionCurve, acquire_curve, plan_sweep,
                       read_run, run_paired_experiment, write_run)
from .sensitivity import (ContrastStudy, SensitivityReport, calibrate_noise,
                          derivative_contrast_study, run_sensitivity)

__version__ = "0.1.0"
