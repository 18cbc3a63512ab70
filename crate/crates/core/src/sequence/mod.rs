//! Pulse sequences: data model, canonical builders, a text DSL and the
//! sensitivity-function / filter-function machinery.
//!
//! Time bookkeeping: a sequence is an ordered list of pulses and delays.
//! Ideal pulses take no time. The free-evolution length `T` runs from the
//! first π/2 pulse to the last one.
//!
//! Decoupling π pulses built here are applied about x while the π/2 pulses
//! are about y (the Meiboom–Gill phase relation). With that choice the
//! readout maps zero accumulated phase to |1⟩ for every pulse count, and the
//! final population is ½(1 + cos φ) with φ = ∫ g(t) Δ(t) dt.

pub mod dsl;
mod filter;

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::qubit::Axis;

pub use filter::{
    filter_spectrum, phase_from_signal, sensitivity_function, FilterSpectrum, SensitivityFunction,
};

/// Drive axes available to pulses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PulseAxis {
    X,
    Y,
}

impl From<PulseAxis> for Axis {
    fn from(a: PulseAxis) -> Self {
        match a {
            PulseAxis::X => Axis::X,
            PulseAxis::Y => Axis::Y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Pi,
    PiHalf,
    /// Rotation by an arbitrary angle in radians.
    Arbitrary(f64),
}

impl PulseKind {
    pub fn angle(self) -> f64 {
        match self {
            PulseKind::Pi => PI,
            PulseKind::PiHalf => FRAC_PI_2,
            PulseKind::Arbitrary(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub kind: PulseKind,
    pub axis: PulseAxis,
    /// Zero for an ideal, instantaneous pulse.
    pub duration: f64,
}

impl Pulse {
    pub fn ideal(kind: PulseKind, axis: PulseAxis) -> Self {
        Self {
            kind,
            axis,
            duration: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Pulse(Pulse),
    Delay(f64),
}

impl Event {
    pub fn duration(&self) -> f64 {
        match self {
            Event::Pulse(p) => p.duration,
            Event::Delay(d) => *d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Event>", into = "Vec<Event>")]
pub struct PulseSequence {
    events: Vec<Event>,
}

impl TryFrom<Vec<Event>> for PulseSequence {
    type Error = Error;

    fn try_from(events: Vec<Event>) -> Result<Self> {
        Self::new(events)
    }
}

impl From<PulseSequence> for Vec<Event> {
    fn from(seq: PulseSequence) -> Self {
        seq.events
    }
}

impl PulseSequence {
    /// Checks that delays are positive, pulse durations non-negative and
    /// angles finite. Bracketing by π/2 pulses is a separate check,
    /// [`PulseSequence::validate_sensing`].
    pub fn new(events: Vec<Event>) -> Result<Self> {
        for e in &events {
            match e {
                Event::Delay(d) => ensure_positive("delay", *d)?,
                Event::Pulse(p) => {
                    ensure_non_negative("pulse duration", p.duration)?;
                    if !p.kind.angle().is_finite() {
                        return Err(Error::param("pulse angle", "must be finite"));
                    }
                }
            }
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn bracket(&self) -> Option<(usize, usize)> {
        let is_half = |e: &Event| matches!(e, Event::Pulse(p) if p.kind == PulseKind::PiHalf);
        let first = self.events.iter().position(is_half)?;
        let last = self.events.iter().rposition(is_half)?;
        (last > first).then_some((first, last))
    }

    /// Free-evolution length T: everything strictly between the first and
    /// the last π/2 pulse. Zero when there is no such bracket.
    pub fn total_time(&self) -> f64 {
        match self.bracket() {
            Some((first, last)) => self.events[first + 1..last].iter().map(Event::duration).sum(),
            None => 0.0,
        }
    }

    /// Wall-clock length of the whole sequence, pulses included.
    pub fn duration(&self) -> f64 {
        self.events.iter().map(Event::duration).sum()
    }

    pub fn pulse_count(&self, kind: PulseKind) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, Event::Pulse(p) if p.kind == kind))
            .count()
    }

    /// A valid sensing sequence starts and ends with a π/2 pulse, contains
    /// at least one delay, and has only π pulses in between.
    pub fn validate_sensing(&self) -> Result<()> {
        let first_ok = matches!(self.events.first(), Some(Event::Pulse(p)) if p.kind == PulseKind::PiHalf);
        let last_ok = self.events.len() > 1
            && matches!(self.events.last(), Some(Event::Pulse(p)) if p.kind == PulseKind::PiHalf);
        if !(first_ok && last_ok) {
            return Err(Error::InvalidSequence(
                "a sensing sequence must begin and end with a pi/2 pulse".into(),
            ));
        }
        let interior = &self.events[1..self.events.len() - 1];
        if !interior.iter().any(|e| matches!(e, Event::Delay(_))) {
            return Err(Error::InvalidSequence("no free evolution between the pi/2 pulses".into()));
        }
        if let Some(bad) = interior
            .iter()
            .find(|e| matches!(e, Event::Pulse(p) if p.kind != PulseKind::Pi))
        {
            return Err(Error::InvalidSequence(format!(
                "only pi pulses may appear between the pi/2 pulses, found {bad:?}"
            )));
        }
        Ok(())
    }

    /// Centres of the π pulses, measured from the end of the first π/2 pulse.
    pub fn pi_pulse_times(&self) -> Vec<f64> {
        let Some((first, last)) = self.bracket() else {
            return Vec::new();
        };
        let mut t = 0.0;
        let mut out = Vec::new();
        for e in &self.events[first + 1..last] {
            match e {
                Event::Pulse(p) if p.kind == PulseKind::Pi => {
                    out.push(t + 0.5 * p.duration);
                    t += p.duration;
                }
                other => t += other.duration(),
            }
        }
        out
    }

    /// Rescales every delay so that the free-evolution length becomes `total`.
    pub fn scaled_to(&self, total: f64) -> Result<Self> {
        ensure_positive("total time", total)?;
        let delays: f64 = self.bracket().map_or(0.0, |(f, l)| {
            self.events[f + 1..l]
                .iter()
                .filter_map(|e| match e {
                    Event::Delay(d) => Some(*d),
                    _ => None,
                })
                .sum()
        });
        let pulses = self.total_time() - delays;
        if delays <= 0.0 || total <= pulses {
            return Err(Error::param("total time", "sequence cannot be scaled to this length"));
        }
        let factor = (total - pulses) / delays;
        let events = self
            .events
            .iter()
            .map(|e| match e {
                Event::Delay(d) => Event::Delay(d * factor),
                other => *other,
            })
            .collect();
        Self::new(events)
    }
}

fn half(axis: PulseAxis) -> Event {
    Event::Pulse(Pulse::ideal(PulseKind::PiHalf, axis))
}

fn pi(axis: PulseAxis) -> Event {
    Event::Pulse(Pulse::ideal(PulseKind::Pi, axis))
}

/// π/2, τ, π/2.
pub fn ramsey(tau: f64) -> Result<PulseSequence> {
    ensure_positive("tau", tau)?;
    PulseSequence::new(vec![half(PulseAxis::Y), Event::Delay(tau), half(PulseAxis::Y)])
}

/// π/2, τ/2, π, τ/2, π/2; identical to `cpmg(1, tau)`.
pub fn hahn(tau: f64) -> Result<PulseSequence> {
    cpmg(1, tau)
}

/// π/2, τ/2, π, τ, π, …, π, τ/2, π/2 with `n` π pulses, T = nτ.
pub fn cpmg(n: u32, tau: f64) -> Result<PulseSequence> {
    if n == 0 {
        return Err(Error::param("pulse count", "must be at least 1"));
    }
    ensure_positive("tau", tau)?;
    let mut events = Vec::with_capacity(2 * n as usize + 3);
    events.push(half(PulseAxis::Y));
    events.push(Event::Delay(0.5 * tau));
    for k in 0..n {
        if k > 0 {
            events.push(Event::Delay(tau));
        }
        events.push(pi(PulseAxis::X));
    }
    events.push(Event::Delay(0.5 * tau));
    events.push(half(PulseAxis::Y));
    PulseSequence::new(events)
}

/// Uhrig decoupling: π pulses at t_j = T·sin²(πj/(2n+2)), j = 1..n.
pub fn uhrig(n: u32, total: f64) -> Result<PulseSequence> {
    if n == 0 {
        return Err(Error::param("pulse count", "must be at least 1"));
    }
    ensure_positive("total time", total)?;
    let times: Vec<f64> = (1..=n)
        .map(|j| {
            let s = (PI * j as f64 / (2.0 * n as f64 + 2.0)).sin();
            total * s * s
        })
        .collect();
    let mut events = vec![half(PulseAxis::Y)];
    let mut previous = 0.0;
    for &t in &times {
        events.push(Event::Delay(t - previous));
        events.push(pi(PulseAxis::X));
        previous = t;
    }
    events.push(Event::Delay(total - previous));
    events.push(half(PulseAxis::Y));
    PulseSequence::new(events)
}

/// A builder family with one time parameter.
///
/// The time parameter is the family's natural one: the free-evolution time
/// for Ramsey and Hahn, the inter-pulse spacing τ for CPMG (T = nτ), and the
/// total time T for Uhrig.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SequenceFamily {
    Ramsey,
    Hahn,
    Cpmg { pulses: u32 },
    Uhrig { pulses: u32 },
}

impl SequenceFamily {
    pub fn build(&self, time: f64) -> Result<PulseSequence> {
        match *self {
            SequenceFamily::Ramsey => ramsey(time),
            SequenceFamily::Hahn => hahn(time),
            SequenceFamily::Cpmg { pulses } => cpmg(pulses, time),
            SequenceFamily::Uhrig { pulses } => uhrig(pulses, time),
        }
    }

    /// The same family with a different pulse count.
    pub fn with_pulses(&self, pulses: u32) -> Result<Self> {
        match self {
            SequenceFamily::Cpmg { .. } => Ok(SequenceFamily::Cpmg { pulses }),
            SequenceFamily::Uhrig { .. } => Ok(SequenceFamily::Uhrig { pulses }),
            other => Err(Error::param(
                "pulse count",
                format!("{} has a fixed pulse count", other.name()),
            )),
        }
    }

    /// Short label, e.g. `ramsey`, `hahn`, `cpmg8`, `uhrig4`.
    pub fn name(&self) -> String {
        match self {
            SequenceFamily::Ramsey => "ramsey".into(),
            SequenceFamily::Hahn => "hahn".into(),
            SequenceFamily::Cpmg { pulses } => format!("cpmg{pulses}"),
            SequenceFamily::Uhrig { pulses } => format!("uhrig{pulses}"),
        }
    }

    /// Inverse of [`SequenceFamily::name`]; `cpmg` and `uhrig` without a
    /// count default to one pulse.
    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        let count = |prefix: &str| -> Result<u32> {
            let rest = &lower[prefix.len()..];
            if rest.is_empty() {
                return Ok(1);
            }
            rest.parse()
                .map_err(|_| Error::Config(format!("bad pulse count in sequence family '{name}'")))
        };
        match lower.as_str() {
            "ramsey" => Ok(SequenceFamily::Ramsey),
            "hahn" | "echo" => Ok(SequenceFamily::Hahn),
            s if s.starts_with("cpmg") => Ok(SequenceFamily::Cpmg { pulses: count("cpmg")? }),
            s if s.starts_with("uhrig") => Ok(SequenceFamily::Uhrig { pulses: count("uhrig")? }),
            _ => Err(Error::Config(format!(
                "unknown sequence family '{name}' (expected ramsey, hahn, cpmg<N>, uhrig<N>)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cpmg_construction() {
        let seq = cpmg(4, 1e-6).unwrap();
        assert_abs_diff_eq!(seq.total_time(), 4e-6, epsilon = 1e-20);
        let times = seq.pi_pulse_times();
        let expected = [0.5e-6, 1.5e-6, 2.5e-6, 3.5e-6];
        assert_eq!(times.len(), 4);
        for (t, e) in times.iter().zip(expected) {
            assert_abs_diff_eq!(*t, e, epsilon = 1e-20);
        }
        assert!(seq.validate_sensing().is_ok());
    }

    #[test]
    fn hahn_is_single_pulse_cpmg() {
        assert_eq!(hahn(2e-6).unwrap(), cpmg(1, 2e-6).unwrap());
        let u = uhrig(1, 2e-6).unwrap();
        assert_abs_diff_eq!(u.pi_pulse_times()[0], 1e-6, epsilon = 1e-18);
    }

    #[test]
    fn uhrig_placements() {
        let total = 3e-6;
        let seq = uhrig(5, total).unwrap();
        for (j, t) in seq.pi_pulse_times().iter().enumerate() {
            let s = (PI * (j + 1) as f64 / 12.0).sin();
            assert_abs_diff_eq!(*t, total * s * s, epsilon = 1e-18);
        }
        assert_abs_diff_eq!(seq.total_time(), total, epsilon = 1e-18);
    }

    #[test]
    fn ramsey_total_time() {
        let seq = ramsey(1e-6).unwrap();
        assert_eq!(seq.total_time(), 1e-6);
        assert!(seq.pi_pulse_times().is_empty());
    }

    #[test]
    fn builder_preconditions() {
        assert!(cpmg(0, 1e-6).is_err());
        assert!(ramsey(0.0).is_err());
        assert!(uhrig(3, -1.0).is_err());
        assert!(PulseSequence::new(vec![Event::Delay(-1.0)]).is_err());
    }

    #[test]
    fn sensing_validation() {
        let missing_end =
            PulseSequence::new(vec![half(PulseAxis::Y), Event::Delay(1e-6), pi(PulseAxis::X)]).unwrap();
        assert!(missing_end.validate_sensing().is_err());
        let no_delay = PulseSequence::new(vec![half(PulseAxis::Y), half(PulseAxis::Y)]).unwrap();
        assert!(no_delay.validate_sensing().is_err());
        let odd_interior = PulseSequence::new(vec![
            half(PulseAxis::Y),
            Event::Delay(1e-6),
            Event::Pulse(Pulse::ideal(PulseKind::Arbitrary(0.3), PulseAxis::X)),
            Event::Delay(1e-6),
            half(PulseAxis::Y),
        ])
        .unwrap();
        assert!(odd_interior.validate_sensing().is_err());
    }

    #[test]
    fn scaling_preserves_shape() {
        let seq = cpmg(3, 1e-6).unwrap().scaled_to(6e-6).unwrap();
        assert_abs_diff_eq!(seq.total_time(), 6e-6, epsilon = 1e-18);
        let times = seq.pi_pulse_times();
        assert_abs_diff_eq!(times[0], 1e-6, epsilon = 1e-18);
        assert_abs_diff_eq!(times[2], 5e-6, epsilon = 1e-18);
    }

    #[test]
    fn family_names_round_trip() {
        for fam in [
            SequenceFamily::Ramsey,
            SequenceFamily::Hahn,
            SequenceFamily::Cpmg { pulses: 8 },
            SequenceFamily::Uhrig { pulses: 3 },
        ] {
            assert_eq!(SequenceFamily::from_name(&fam.name()).unwrap(), fam);
        }
        assert!(SequenceFamily::from_name("xy8").is_err());
        assert!(SequenceFamily::Ramsey.with_pulses(3).is_err());
    }
}
