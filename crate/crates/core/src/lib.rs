//! Single-qubit quantum sensing simulator.
//!
//! Builds pulse sequences (Ramsey, Hahn echo, CPMG, Uhrig), runs them
//! against deterministic or stochastic detuning signals with exact
//! two-level propagators, simulates projection-noise readout, and provides
//! the filter-function and sensitivity analysis that goes with them.
//!
//! ```
//! use spinsense::{ramsey, run_once, Signal};
//!
//! let p = run_once(&ramsey(1e-6).unwrap(), &Signal::constant(1e6)).unwrap();
//! assert!((p - 0.5 * (1.0 + 1.0f64.cos())).abs() < 1e-12);
//! ```

// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod noise;
pub mod qubit;
pub mod rng;
pub mod sequence;
pub mod signal;
pub mod units;

pub use analysis::{
    entanglement_comparison, optimal_tau, phase_variance, predicted_population, reconstruct_spectrum,
    sensitivity_ac, sensitivity_dc, static_envelope, SensorSpec, SensitivityReport,
};
pub use engine::{
    coherence_decay_curve, estimate_detuning, measure_field, odmr_scan, run_experiment, run_once, Experiment,
    ExperimentResult, ReadoutConfig, SequenceSource, Sweep, SweepVariable,
};
pub use error::{Error, Result};
pub use noise::{psd, sample_trajectory, SignalModel, SinusoidPhase};
pub use qubit::{Axis, BlochVector, DensityMatrix, Propagator, PureState};
pub use sequence::dsl::{format_sequence, parse_sequence};
pub use sequence::{
    cpmg, filter_spectrum, hahn, phase_from_signal, ramsey, sensitivity_function, uhrig, FilterSpectrum,
    PulseSequence, SensitivityFunction, SequenceFamily,
};
pub use signal::Signal;
