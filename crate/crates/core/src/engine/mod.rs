//! Sequence execution, Monte-Carlo averaging over noise realizations and
//! projection-noise readout.
//!
//! Time origin: t = 0 is the end of the first π/2 pulse, matching the
//! sensitivity function. Signals that stop short of a pulse edge are
//! extended with their boundary value.
//!
//! Random streams are derived from the readout seed by index path:
//! `[point, 0, realization]` for noise and `[point, 1]` for readout draws.

mod estimation;
mod result;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::noise::SignalModel;
use crate::qubit::{Propagator, PureState};
use crate::rng::{pairwise_mean, stream};
use crate::sequence::{Event, PulseKind, PulseSequence, SequenceFamily};
use crate::signal::Signal;
use crate::units::{parse_angular, parse_time};

pub use estimation::{
    coherence_decay_curve, estimate_detuning, estimate_field, measure_field, odmr_scan, DecayPoint,
    DetuningEstimate, FieldEstimate, FieldMeasurement,
};
pub use result::{fingerprint, ExperimentResult, Metadata, PointResult, SeedRegistry};

/// Noise realizations per sweep point unless configured otherwise.
pub const DEFAULT_REALIZATIONS: usize = 1000;

/// Measurement statistics. `m0` is the number of repetitions that together
/// carry the information of one ideal projective readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutConfig {
    pub repetitions: u64,
    pub sensors: u64,
    pub m0: f64,
    pub contrast: f64,
    pub seed: u64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            repetitions: 1000,
            sensors: 1,
            m0: 1.0,
            contrast: 1.0,
            seed: 0,
        }
    }
}

impl ReadoutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::param("repetitions", "must be at least 1"));
        }
        if self.sensors == 0 {
            return Err(Error::param("sensors", "must be at least 1"));
        }
        if !(self.m0 >= 1.0 && self.m0.is_finite()) {
            return Err(Error::param("m0", format!("must be >= 1, got {}", self.m0)));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::param("contrast", format!("must lie in (0, 1], got {}", self.contrast)));
        }
        Ok(())
    }

    /// Number of effective binary readouts, M·N/M₀ rounded, at least one.
    pub fn draws(&self) -> u64 {
        ((self.repetitions as f64 * self.sensors as f64 / self.m0).round() as u64).max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutOutcome {
    pub p_hat: f64,
    pub std_error: f64,
    pub draws: u64,
    pub successes: u64,
}

/// Draws K = M·N/M₀ binary outcomes with success probability
/// p' = ½ + c(p − ½) and maps the observed fraction back through the
/// contrast.
///
/// The standard error uses the smoothed fraction (k + ½)/(K + 1), so it is
/// positive even when every draw agrees.
pub fn simulate_readout<R: Rng + ?Sized>(p: f64, config: &ReadoutConfig, rng: &mut R) -> ReadoutOutcome {
    let k = config.draws();
    let c = config.contrast;
    let shifted = (0.5 + c * (p.clamp(0.0, 1.0) - 0.5)).clamp(0.0, 1.0);
    let successes = Binomial::new(k, shifted)
        .expect("probability clamped to [0, 1]")
        .sample(rng);
    let fraction = successes as f64 / k as f64;
    let p_hat = (0.5 + (fraction - 0.5) / c).clamp(0.0, 1.0);
    let q = (successes as f64 + 0.5) / (k as f64 + 1.0);
    let std_error = (q * (1.0 - q) / k as f64).sqrt() / c;
    ReadoutOutcome {
        p_hat,
        std_error,
        draws: k,
        successes,
    }
}

/// ∫ₐᵇ Δ(t) dt, holding the boundary value outside a finite record.
fn phase_over(signal: &Signal, a: f64, b: f64) -> f64 {
    let Some(end) = signal.end_time() else {
        return signal.integral(a, b);
    };
    let mut phi = 0.0;
    if a < 0.0 {
        phi += (b.min(0.0) - a) * signal.value(0.0);
    }
    let (lo, hi) = (a.max(0.0), b.min(end));
    if hi > lo {
        phi += signal.integral(lo, hi);
    }
    if b > end {
        phi += (b - a.max(end)) * signal.value(end);
    }
    phi
}

/// Final |1⟩ population after running `seq` from |0⟩ under one realization.
///
/// Ideal pulses are instantaneous rotations. A finite pulse of length d is
/// a driven evolution with Rabi frequency angle/d at the signal's mean
/// detuning over the pulse. Delays accumulate the phase ∫Δ dt.
pub fn run_once(seq: &PulseSequence, signal: &Signal) -> Result<f64> {
    let free_time = seq.total_time();
    signal.ensure_covers(free_time)?;
    let events = seq.events();
    let origin = events
        .iter()
        .position(|e| matches!(e, Event::Pulse(p) if p.kind == PulseKind::PiHalf))
        .map_or(0.0, |i| events[..=i].iter().map(Event::duration).sum());

    let mut state = PureState::ground();
    let mut t = -origin;
    for event in events {
        let d = event.duration();
        let u = match event {
            Event::Delay(_) => Propagator::phase(phase_over(signal, t, t + d)),
            Event::Pulse(p) if d == 0.0 => Propagator::about(p.axis.into(), p.kind.angle()),
            Event::Pulse(p) => {
                let mean = phase_over(signal, t, t + d) / d;
                Propagator::driven(p.axis.into(), p.kind.angle() / d, mean, d)
            }
        };
        state = u.apply(&state);
        t += d;
    }
    Ok(state.amp1().norm_sqr().clamp(0.0, 1.0))
}

/// Where the sequence for each sweep point comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SequenceSource {
    /// A builder family and its time parameter (τ for CPMG, T for Uhrig,
    /// the free-evolution time otherwise).
    Builder { family: SequenceFamily, time: f64 },
    /// A fixed sequence; time sweeps rescale its delays.
    Explicit { sequence: PulseSequence },
}

impl SequenceSource {
    pub fn label(&self) -> String {
        match self {
            SequenceSource::Builder { family, .. } => family.name(),
            SequenceSource::Explicit { .. } => "custom".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Builder time parameter, or total free-evolution time for an
    /// explicit sequence.
    Time,
    /// Constant detuning added on top of the signal model, rad/s.
    Detuning,
    PulseCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn new(variable: SweepVariable, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("sweep", "needs at least one point"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("sweep", "values must be finite"));
        }
        Ok(Self { variable, values })
    }

    /// `count` evenly spaced values from `start` to `stop` inclusive, or
    /// geometrically spaced when `log` is set.
    pub fn range(variable: SweepVariable, start: f64, stop: f64, count: usize, log: bool) -> Result<Self> {
        if count == 0 {
            return Err(Error::param("sweep", "needs at least one point"));
        }
        if log && !(start > 0.0 && stop > 0.0) {
            return Err(Error::param("sweep", "logarithmic sweeps need positive endpoints"));
        }
        let values = (0..count)
            .map(|i| {
                let f = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
                if log {
                    (start.ln() + f * (stop.ln() - start.ln())).exp()
                } else {
                    start + f * (stop - start)
                }
            })
            .collect();
        Self::new(variable, values)
    }

    /// Parses `var=start:stop:count[:log]` with `var` one of `tau`
    /// (or `time`), `detuning`, `n` (or `pulses`). Times and detunings
    /// need units, e.g. `tau=0.1us:10us:50:log`, `detuning=-2MHz:2MHz:101`.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("sweep '{spec}': {why}"));
        let (name, range) = spec
            .split_once('=')
            .ok_or_else(|| bad("expected var=start:stop:count[:log]"))?;
        let parts: Vec<&str> = range.split(':').collect();
        let log = match parts.get(3).map(|s| s.trim().to_ascii_lowercase()) {
            None => false,
            Some(s) if s == "log" => true,
            Some(s) if s == "lin" => false,
            Some(other) => return Err(bad(&format!("unknown spacing '{other}' (use log or lin)"))),
        };
        if !(3..=4).contains(&parts.len()) {
            return Err(bad("expected var=start:stop:count[:log]"));
        }
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("count must be a positive integer"))?;
        let (variable, start, stop) = match name.trim().to_ascii_lowercase().as_str() {
            "tau" | "time" | "t" => (SweepVariable::Time, parse_time(parts[0])?, parse_time(parts[1])?),
            "detuning" | "delta" => (
                SweepVariable::Detuning,
                parse_angular(parts[0])?,
                parse_angular(parts[1])?,
            ),
            "n" | "pulses" => {
                let int = |s: &str| -> Result<f64> {
                    s.trim()
                        .parse::<u32>()
                        .map(f64::from)
                        .map_err(|_| bad("pulse counts must be positive integers"))
                };
                (SweepVariable::PulseCount, int(parts[0])?, int(parts[1])?)
            }
            other => return Err(bad(&format!("unknown sweep variable '{other}' (use tau, detuning or n)"))),
        };
        let mut sweep = Self::range(variable, start, stop, count, log)?;
        if variable == SweepVariable::PulseCount {
            for v in &mut sweep.values {
                *v = v.round();
            }
        }
        Ok(sweep)
    }

    pub fn column_name(&self, source: &SequenceSource) -> &'static str {
        match (self.variable, source) {
            (SweepVariable::Time, SequenceSource::Builder { .. }) => "time_param_s",
            (SweepVariable::Time, SequenceSource::Explicit { .. }) => "total_time_s",
            (SweepVariable::Detuning, _) => "detuning_rad_per_s",
            (SweepVariable::PulseCount, _) => "pulse_count",
        }
    }
}

/// Complete, serializable description of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub sequence: SequenceSource,
    pub model: SignalModel,
    pub sweep: Sweep,
    pub readout: ReadoutConfig,
    /// Noise realizations per point; deterministic models use one.
    pub realizations: usize,
    /// Sampling step for sampled noise; defaults to min(τ_c/20, T/1000).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
}

impl Experiment {
    pub fn new(sequence: SequenceSource, model: SignalModel, sweep: Sweep, readout: ReadoutConfig) -> Self {
        Self {
            sequence,
            model,
            sweep,
            readout,
            realizations: DEFAULT_REALIZATIONS,
            time_step: None,
        }
    }

    /// Checks everything that can fail before any simulation starts,
    /// including building the sequence for every sweep point.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.readout.validate()?;
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be at least 1"));
        }
        if let Some(dt) = self.time_step {
            ensure_positive("time step", dt)?;
        }
        let sweep = Sweep::new(self.sweep.variable, self.sweep.values.clone())?;
        for i in 0..sweep.values.len() {
            let seq = self.point_sequence(i)?;
            if seq.total_time() <= 0.0 && seq.duration() <= 0.0 {
                return Err(Error::InvalidSequence("sequence has zero duration".into()));
            }
            if let (Some(dt), Some(tc)) = (self.time_step, self.model.min_correlation_time()) {
                if dt > tc / 10.0 {
                    return Err(Error::TimeStepTooCoarse {
                        dt,
                        correlation_time: tc,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn point_sequence(&self, index: usize) -> Result<PulseSequence> {
        let value = self.sweep.values[index];
        match (&self.sequence, self.sweep.variable) {
            (SequenceSource::Builder { family, .. }, SweepVariable::Time) => family.build(value),
            (SequenceSource::Builder { family, time }, SweepVariable::Detuning) => family.build(*time),
            (SequenceSource::Builder { family, time }, SweepVariable::PulseCount) => {
                if value < 1.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return Err(Error::param("pulse count", format!("must be a positive integer, got {value}")));
                }
                family.with_pulses(value as u32)?.build(*time)
            }
            (SequenceSource::Explicit { sequence }, SweepVariable::Time) => sequence.scaled_to(value),
            (SequenceSource::Explicit { sequence }, SweepVariable::Detuning) => Ok(sequence.clone()),
            (SequenceSource::Explicit { .. }, SweepVariable::PulseCount) => Err(Error::param(
                "sweep",
                "pulse-count sweeps need a builder family, not a fixed sequence",
            )),
        }
    }

    fn point_offset(&self, index: usize) -> f64 {
        match self.sweep.variable {
            SweepVariable::Detuning => self.sweep.values[index],
            _ => 0.0,
        }
    }
}

/// Realization-averaged population for one sequence.
pub(crate) fn mean_population(
    seq: &PulseSequence,
    model: &SignalModel,
    offset: f64,
    realizations: usize,
    time_step: Option<f64>,
    seed: u64,
    point: u64,
) -> Result<f64> {
    let span = match seq.total_time() {
        t if t > 0.0 => t,
        _ => seq.duration(),
    };
    let dt = time_step.or_else(|| model.default_dt(span)).unwrap_or(span);
    let count = if model.is_deterministic() { 1 } else { realizations };
    let populations: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, &[point, 0, r]);
            let mut signal = model.realize(&mut rng, span, dt)?;
            if offset != 0.0 {
                signal = Signal::Sum(vec![signal, Signal::constant(offset)]);
            }
            run_once(seq, &signal)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_mean(&populations))
}

/// Runs every sweep point: averages p over noise realizations, then
/// simulates the readout. The result depends only on the experiment and
/// its seed.
pub fn run_experiment(experiment: &Experiment) -> Result<ExperimentResult> {
    experiment.validate()?;
    let seed = experiment.readout.seed;
    let points = (0..experiment.sweep.values.len())
        .into_par_iter()
        .map(|i| {
            let seq = experiment.point_sequence(i)?;
            let p = mean_population(
                &seq,
                &experiment.model,
                experiment.point_offset(i),
                experiment.realizations,
                experiment.time_step,
                seed,
                i as u64,
            )?;
            let outcome = simulate_readout(p, &experiment.readout, &mut stream(seed, &[i as u64, 1]));
            Ok(PointResult {
                value: experiment.sweep.values[i],
                total_time: seq.total_time(),
                p_true: p,
                p_hat: outcome.p_hat,
                std_error: outcome.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::new(experiment.clone(), points))
}
