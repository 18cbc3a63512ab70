//! Realized detuning waveforms Δ(t), with t = 0 at the first π/2 pulse.
//!
//! A [`Signal`] is one concrete realization: closed-form (constant,
//! sinusoid), piecewise-constant, or uniformly sampled. Sampled signals are
//! interpreted as piecewise linear between samples, so their integrals are
//! the trapezoidal sums of the samples and are exact for that interpolant.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Constant {
        detuning: f64,
    },
    /// b·sin(2πνt + phase).
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// `values[k]` on `[breakpoints[k], breakpoints[k+1])`.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Sampled(SampledSignal),
    Sum(Vec<Signal>),
}

/// Uniform samples starting at t = 0, linearly interpolated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    dt: f64,
    values: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl SampledSignal {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        ensure_positive("dt", dt)?;
        if values.len() < 2 {
            return Err(Error::param("values", "a sampled signal needs at least two samples"));
        }
        let mut cumulative = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in values.windows(2) {
            acc += 0.5 * dt * (w[0] + w[1]);
            cumulative.push(acc);
        }
        Ok(Self {
            dt,
            values,
            cumulative,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn end_time(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.values.len() - 2;
        let i = ((t / self.dt).floor().max(0.0) as usize).min(last);
        (i, t - i as f64 * self.dt)
    }

    fn value(&self, t: f64) -> f64 {
        let (i, r) = self.locate(t);
        let slope = (self.values[i + 1] - self.values[i]) / self.dt;
        self.values[i] + slope * r
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let (i, r) = self.locate(t);
        let v0 = self.values[i];
        let slope = (self.values[i + 1] - v0) / self.dt;
        self.cumulative[i] + r * (v0 + 0.5 * slope * r)
    }

    fn rebuild(&mut self) {
        if self.cumulative.len() != self.values.len() {
            *self = Self::new(self.dt, std::mem::take(&mut self.values)).expect("validated on construction");
        }
    }
}

impl Signal {
    pub fn constant(detuning: f64) -> Self {
        Signal::Constant { detuning }
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::param(
                "breakpoints",
                "need exactly one more breakpoint than values",
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::param("breakpoints", "must start at t = 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("breakpoints", "must be strictly increasing"));
        }
        for &v in &values {
            ensure_finite("values", v)?;
        }
        Ok(Signal::PiecewiseConstant { breakpoints, values })
    }

    pub fn sampled(dt: f64, values: Vec<f64>) -> Result<Self> {
        Ok(Signal::Sampled(SampledSignal::new(dt, values)?))
    }

    /// Restores cached data dropped by deserialization.
    pub fn prepare(&mut self) {
        match self {
            Signal::Sampled(s) => s.rebuild(),
            Signal::Sum(parts) => parts.iter_mut().for_each(Signal::prepare),
            _ => {}
        }
    }

    /// Last time at which the signal is defined; `None` for closed forms.
    pub fn end_time(&self) -> Option<f64> {
        match self {
            Signal::Constant { .. } | Signal::Sinusoid { .. } => None,
            Signal::PiecewiseConstant { breakpoints, .. } => breakpoints.last().copied(),
            Signal::Sampled(s) => Some(s.end_time()),
            Signal::Sum(parts) => parts
                .iter()
                .filter_map(Signal::end_time)
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t)))),
        }
    }

    /// Fails unless the signal is defined on all of `[0, t]`.
    pub fn ensure_covers(&self, t: f64) -> Result<()> {
        match self.end_time() {
            Some(end) if end < t * (1.0 - 1e-12) - 1e-18 => Err(Error::Coverage {
                required: t,
                available: end,
            }),
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Signal::Constant { detuning } => *detuning,
            Signal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (TAU * frequency * t + phase).sin(),
            Signal::PiecewiseConstant { breakpoints, values } => {
                let k = breakpoints.partition_point(|&b| b <= t).clamp(1, values.len());
                values[k - 1]
            }
            Signal::Sampled(s) => s.value(t),
            Signal::Sum(parts) => parts.iter().map(|p| p.value(t)).sum(),
        }
    }

    /// ∫ₐᵇ Δ(t) dt, exact for every variant.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Signal::Constant { detuning } => detuning * (b - a),
            Signal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                let w = TAU * frequency;
                if w == 0.0 {
                    return amplitude * phase.sin() * (b - a);
                }
                amplitude * ((w * a + phase).cos() - (w * b + phase).cos()) / w
            }
            Signal::PiecewiseConstant { breakpoints, values } => {
                piecewise_antiderivative(breakpoints, values, b)
                    - piecewise_antiderivative(breakpoints, values, a)
            }
            Signal::Sampled(s) => s.antiderivative(b) - s.antiderivative(a),
            Signal::Sum(parts) => parts.iter().map(|p| p.integral(a, b)).sum(),
        }
    }

    /// Interior points of `(a, b)` where the signal changes its functional
    /// form (sample times, piecewise breakpoints), in ascending order.
    pub fn knots_between(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_knots(a, b, &mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_knots(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        match self {
            Signal::Constant { .. } | Signal::Sinusoid { .. } => {}
            Signal::PiecewiseConstant { breakpoints, .. } => {
                out.extend(breakpoints.iter().copied().filter(|&t| t > a && t < b));
            }
            Signal::Sampled(s) => {
                let first = (a / s.dt).floor() as i64 + 1;
                let last = ((b / s.dt).ceil() as i64 - 1).min(s.values.len() as i64 - 1);
                for i in first.max(0)..=last {
                    let t = i as f64 * s.dt;
                    if t > a && t < b {
                        out.push(t);
                    }
                }
            }
            Signal::Sum(parts) => parts.iter().for_each(|p| p.collect_knots(a, b, out)),
        }
    }
}

fn piecewise_antiderivative(breakpoints: &[f64], values: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &v) in values.iter().enumerate() {
        let (lo, hi) = (breakpoints[k], breakpoints[k + 1]);
        if t <= lo {
            break;
        }
        acc += v * (t.min(hi) - lo);
    }
    acc
}
