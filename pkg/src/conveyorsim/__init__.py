"""conveyorsim: hyperfine-qubit coherence in a movable standing-wave dipole trap.

Simulates and analyzes Ramsey/spin-echo experiments on the cesium clock
transition in an optical conveyor belt: closed-form dephasing lineshapes,
shot-level Monte-Carlo experiments, Allan-variance-limited echo visibility,
classical transport heating, and least-squares parameter extraction.
"""

from .errors import ConfigError, NumericError, ScenarioError
from .units import convert_units, parse_quantity
from .trap import PhysConstants, TrapConfig, DerivedTrapParams, derive_trap_params, mean_lightshift
from .bloch import (BlochVector, PulseParams, PulseSequence, Pulse, FreeEvolution,
                    TransportSegment, MixingWindow, GROUND, apply_pulse, free_evolve,
                    relax_T1, run_sequence, ramsey_sequence, echo_sequence)
from .dephasing import (LightShiftDistribution, EnsembleSpec, lightshift_pdf,
                        sample_energy, sample_lightshift, ramsey_envelope,
                        exact_envelope, ramsey_signal, echo_signal)
from .noise import (NoiseRecord, AllanCurve, VisibilityModel, allan_variance,
                    allan_deviation, allan_deviation_curve, synthesize_beat_record,
                    sample_detuning_jump, echo_visibility, detuning_sigma)
from .transport import (AccelProfile, AtomPhaseState, make_accel_profile,
                        integrate_trajectory, heating_stats, adiabatic_ramp,
                        survival_fraction, orbit_states, orbit_period, atom_state)
from .shots import (DetectionModel, MixingLaserConfig, TransportConfig, PointingNoise,
                    SweepSpec, ExperimentConfig, DataSet, rng_stream, run_experiment,
                    run_visibility_series, mixing_collapse)
from .fitting import (FitResult, fit_ramsey, fit_echo, fit_visibility_decay,
                      estimate_fringe_frequency, ramsey_model, echo_model)

__version__ = "0.1.0"
