//! Stochastic models for the detuning Δ(t): realizations, sampled
//! trajectories, analytic spectra and an empirical periodogram.
//!
//! Spectral convention: [`psd`] returns S(ν) for ν ≥ 0 such that the
//! process variance is 2∫₀^∞ S(ν) dν (the density is symmetric in ν and
//! only its non-negative half is evaluated). The Ornstein–Uhlenbeck
//! density is the Lorentzian 2σ²τ_c/(1 + (2πντ_c)²). With this
//! normalization the accumulated phase variance is
//!
//! ```text
//! ⟨φ²⟩ = S_g(0)·S(0) + 2·Σ_{n>0} S_g(ν_n)·S(ν_n)
//! ```
//!
//! with S_g(ν_n) = |g_n|²/T from the sequence's filter spectrum. Line
//! components (a static Gaussian offset, a random-phase tone) carry a
//! finite power at one frequency instead of a density.

mod config;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, Error, Result};
use crate::rng;
use crate::signal::Signal;

pub use config::{model_from_toml, model_to_toml};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinusoidPhase {
    Fixed(f64),
    /// Drawn uniformly from [0, 2π) once per realization.
    Random,
}

/// Detuning process. All detunings and amplitudes are in rad/s, frequencies
/// in Hz, times in s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalModel {
    Constant {
        detuning: f64,
    },
    /// One Gaussian draw per realization, constant in time.
    StaticGaussian {
        mean: f64,
        std_dev: f64,
    },
    /// b·sin(2πνt + phase).
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        phase: SinusoidPhase,
    },
    OrnsteinUhlenbeck {
        std_dev: f64,
        correlation_time: f64,
    },
    Composite {
        components: Vec<SignalModel>,
    },
}

/// A spectral line: finite power concentrated at one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub frequency: f64,
    /// Integrated power in (rad/s)².
    pub power: f64,
}

/// Continuous density plus line components of a model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Spectrum {
    lorentzians: Vec<(f64, f64)>,
    lines: Vec<SpectralLine>,
}

impl Spectrum {
    /// Continuous part in (rad/s)²/Hz at ν ≥ 0.
    pub fn density(&self, nu: f64) -> f64 {
        self.lorentzians
            .iter()
            .map(|&(sigma, tc)| {
                let x = TAU * nu * tc;
                2.0 * sigma * sigma * tc / (1.0 + x * x)
            })
            .sum()
    }

    pub fn lines(&self) -> &[SpectralLine] {
        &self.lines
    }

    /// Variance of the process: continuous part plus all lines.
    pub fn total_power(&self) -> f64 {
        self.lorentzians.iter().map(|&(s, _)| s * s).sum::<f64>()
            + self.lines.iter().map(|l| l.power).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.total_power() == 0.0
    }
}

impl SignalModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            SignalModel::Constant { detuning } => ensure_finite("detuning", *detuning),
            SignalModel::StaticGaussian { mean, std_dev } => {
                ensure_finite("mean detuning", *mean)?;
                ensure_non_negative("detuning standard deviation", *std_dev)
            }
            SignalModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                ensure_non_negative("amplitude", *amplitude)?;
                ensure_positive("frequency", *frequency)?;
                if let SinusoidPhase::Fixed(p) = phase {
                    ensure_finite("phase", *p)?;
                }
                Ok(())
            }
            SignalModel::OrnsteinUhlenbeck {
                std_dev,
                correlation_time,
            } => {
                ensure_non_negative("noise standard deviation", *std_dev)?;
                ensure_positive("correlation time", *correlation_time)
            }
            SignalModel::Composite { components } => {
                if components.is_empty() {
                    return Err(Error::param("components", "a composite model needs at least one component"));
                }
                components.iter().try_for_each(SignalModel::validate)
            }
        }
    }

    /// True when every realization is the same function of time.
    pub fn is_deterministic(&self) -> bool {
        match self {
            SignalModel::Constant { .. } => true,
            SignalModel::StaticGaussian { std_dev, .. } => *std_dev == 0.0,
            SignalModel::Sinusoid { phase, amplitude, .. } => {
                matches!(phase, SinusoidPhase::Fixed(_)) || *amplitude == 0.0
            }
            SignalModel::OrnsteinUhlenbeck { std_dev, .. } => *std_dev == 0.0,
            SignalModel::Composite { components } => components.iter().all(Self::is_deterministic),
        }
    }

    /// Shortest correlation time among the OU components, if any.
    pub fn min_correlation_time(&self) -> Option<f64> {
        match self {
            SignalModel::OrnsteinUhlenbeck {
                correlation_time, ..
            } => Some(*correlation_time),
            SignalModel::Composite { components } => components
                .iter()
                .filter_map(Self::min_correlation_time)
                .reduce(f64::min),
            _ => None,
        }
    }

    /// Sampling step used inside sequences: min(τ_c/20, T/1000), or `None`
    /// when the model has closed-form realizations.
    pub fn default_dt(&self, total: f64) -> Option<f64> {
        self.min_correlation_time()
            .map(|tc| (tc / 20.0).min(total / 1000.0))
    }

    fn check_dt(&self, dt: f64) -> Result<()> {
        if let Some(tc) = self.min_correlation_time() {
            if dt > tc / 10.0 {
                return Err(Error::TimeStepTooCoarse {
                    dt,
                    correlation_time: tc,
                });
            }
        }
        Ok(())
    }

    /// Draws one realization covering [0, `total`]. `dt` is only used by
    /// components that must be sampled (OU).
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R, total: f64, dt: f64) -> Result<Signal> {
        Ok(match self {
            SignalModel::Constant { detuning } => Signal::constant(*detuning),
            SignalModel::StaticGaussian { mean, std_dev } => {
                let xi: f64 = rng.sample(StandardNormal);
                Signal::constant(mean + std_dev * xi)
            }
            SignalModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => Signal::Sinusoid {
                amplitude: *amplitude,
                frequency: *frequency,
                phase: match phase {
                    SinusoidPhase::Fixed(p) => *p,
                    SinusoidPhase::Random => rng.random_range(0.0..TAU),
                },
            },
            SignalModel::OrnsteinUhlenbeck {
                std_dev,
                correlation_time,
            } => {
                ensure_positive("dt", dt)?;
                self.check_dt(dt)?;
                let steps = step_count(total, dt);
                Signal::sampled(dt, ou_path(rng, *std_dev, *correlation_time, dt, steps + 1))?
            }
            SignalModel::Composite { components } => Signal::Sum(
                components
                    .iter()
                    .map(|c| c.realize(rng, total, dt))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Analytic spectrum; fails for fixed-phase tones, which are
    /// deterministic non-stationary signals without a density.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let mut out = Spectrum::default();
        self.collect_spectrum(&mut out)?;
        Ok(out)
    }

    fn collect_spectrum(&self, out: &mut Spectrum) -> Result<()> {
        match self {
            // a known offset is a mean, not a fluctuation
            SignalModel::Constant { .. } => {}
            SignalModel::StaticGaussian { std_dev, .. } => {
                if *std_dev > 0.0 {
                    out.lines.push(SpectralLine {
                        frequency: 0.0,
                        power: std_dev * std_dev,
                    });
                }
            }
            SignalModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => match phase {
                SinusoidPhase::Random => out.lines.push(SpectralLine {
                    frequency: *frequency,
                    power: 0.5 * amplitude * amplitude,
                }),
                SinusoidPhase::Fixed(_) if *amplitude == 0.0 => {}
                SinusoidPhase::Fixed(_) => {
                    return Err(Error::UndefinedSpectrum(
                        "a sinusoid with fixed phase is deterministic; use a random phase".into(),
                    ))
                }
            },
            SignalModel::OrnsteinUhlenbeck {
                std_dev,
                correlation_time,
            } => out.lorentzians.push((*std_dev, *correlation_time)),
            SignalModel::Composite { components } => {
                for c in components {
                    c.collect_spectrum(out)?;
                }
            }
        }
        Ok(())
    }

    /// Known (non-random) detuning offset: constants plus Gaussian means.
    pub fn mean_offset(&self) -> f64 {
        match self {
            SignalModel::Constant { detuning } => *detuning,
            SignalModel::StaticGaussian { mean, .. } => *mean,
            SignalModel::Composite { components } => components.iter().map(Self::mean_offset).sum(),
            _ => 0.0,
        }
    }
}

/// Continuous spectral density S(ν) in (rad/s)²/Hz, ν ≥ 0.
pub fn psd(model: &SignalModel, nu: f64) -> Result<f64> {
    ensure_non_negative("frequency", nu)?;
    Ok(model.spectrum()?.density(nu))
}

fn step_count(total: f64, dt: f64) -> usize {
    // tolerate T/dt landing a hair above an integer
    ((total / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn ou_path<R: Rng + ?Sized>(rng: &mut R, sigma: f64, tc: f64, dt: f64, len: usize) -> Vec<f64> {
    let decay = (-dt / tc).exp();
    let kick = sigma * (-(-2.0 * dt / tc).exp_m1()).sqrt();
    let mut values = Vec::with_capacity(len);
    let mut x = sigma * rng.sample::<f64, _>(StandardNormal);
    values.push(x);
    for _ in 1..len {
        x = x * decay + kick * rng.sample::<f64, _>(StandardNormal);
        values.push(x);
    }
    values
}

/// Uniformly sampled Δ(tᵢ), tᵢ = i·dt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrajectory {
    pub dt: f64,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl NoiseTrajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.dt)
    }

    pub fn to_signal(&self) -> Result<Signal> {
        Signal::sampled(self.dt, self.values.clone())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,detuning_rad_per_s\n");
        for (t, v) in self.times().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

/// Samples `model` on [0, T] with step `dt`; bit-identical for identical
/// arguments.
pub fn sample_trajectory(model: &SignalModel, total: f64, dt: f64, seed: u64) -> Result<NoiseTrajectory> {
    model.validate()?;
    ensure_positive("total time", total)?;
    ensure_positive("dt", dt)?;
    if dt > total {
        return Err(Error::param("dt", format!("{dt} s exceeds the trajectory length {total} s")));
    }
    model.check_dt(dt)?;
    let steps = step_count(total, dt);
    let mut stream = rng::stream(seed, &[]);
    let signal = model.realize(&mut stream, steps as f64 * dt, dt)?;
    let values = (0..=steps).map(|i| signal.value(i as f64 * dt)).collect();
    Ok(NoiseTrajectory { dt, values, seed })
}

/// One-sided frequency grid and averaged power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

/// Averaged |DFT|² estimate P_k = (dt/N)·⟨|X_k|²⟩ at ν_k = k/(N·dt),
/// k = 0..=N/2, in the same normalization as [`psd`].
pub fn periodogram(trajectories: &[NoiseTrajectory]) -> Result<Periodogram> {
    if trajectories.len() < 100 {
        return Err(Error::InconsistentTrajectories(format!(
            "need at least 100 trajectories, got {}",
            trajectories.len()
        )));
    }
    let n = trajectories[0].values.len();
    let dt = trajectories[0].dt;
    if trajectories
        .iter()
        .any(|t| t.values.len() != n || t.dt != dt)
    {
        return Err(Error::InconsistentTrajectories(
            "trajectories must share length and time step".into(),
        ));
    }
    let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for t in trajectories {
        for (b, &v) in buf.iter_mut().zip(&t.values) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for (a, x) in acc.iter_mut().zip(&buf) {
            *a += x.norm_sqr();
        }
    }
    let scale = dt / (n as f64 * trajectories.len() as f64);
    Ok(Periodogram {
        frequencies: (0..=half).map(|k| k as f64 / (n as f64 * dt)).collect(),
        power: acc.into_iter().map(|a| a * scale).collect(),
    })
}
