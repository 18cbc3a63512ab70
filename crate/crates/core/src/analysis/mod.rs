//! Closed-form analysis: decoherence envelopes, phase variance from filter
//! and noise spectra, sensitivity figures of merit, the optimal
//! interrogation time and spectrum reconstruction.

mod reconstruct;

use serde::{Deserialize, Serialize};

use crate::engine::ReadoutConfig;
use crate::error::{ensure_positive, Error, Result};
use crate::noise::SignalModel;
use crate::sequence::FilterSpectrum;

pub use reconstruct::{reconstruct_spectrum, window_weight, Reconstruction, ReconstructionPoint};

/// Physical constants of a sensor. Rates in rad/s, times in s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    /// γ in rad/s per tesla.
    pub gyromagnetic: f64,
    /// Zero-field resonance ω₀ in rad/s.
    pub omega0: f64,
    pub t2_star: f64,
    pub t2: f64,
    pub t1: f64,
    pub sensors: u64,
}

impl SensorSpec {
    /// NV-centre defaults: γ/2π = 30 MHz/mT, T₂* = 1 µs, T₂ = 300 µs,
    /// ω₀/2π = 2.87 GHz, T₁ = 6 ms, one sensor.
    pub fn nv() -> Self {
        Self {
            gyromagnetic: std::f64::consts::TAU * 3.0e10,
            omega0: std::f64::consts::TAU * 2.87e9,
            t2_star: 1e-6,
            t2: 300e-6,
            t1: 6e-3,
            sensors: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("gyromagnetic ratio", self.gyromagnetic)?;
        ensure_positive("omega0", self.omega0)?;
        ensure_positive("T2*", self.t2_star)?;
        ensure_positive("T2", self.t2)?;
        ensure_positive("T1", self.t1)?;
        if self.sensors == 0 {
            return Err(Error::param("sensors", "must be at least 1"));
        }
        if !(self.t2_star <= self.t2 && self.t2 <= self.t1) {
            return Err(Error::param(
                "coherence times",
                format!(
                    "need T2* <= T2 <= T1, got {} s, {} s, {} s",
                    self.t2_star, self.t2, self.t1
                ),
            ));
        }
        Ok(())
    }
}

/// Contrast factor e^{−σ²τ²/2} of Ramsey fringes under static Gaussian
/// detuning noise.
pub fn static_envelope(tau: f64, sigma: f64) -> f64 {
    (-0.5 * sigma * sigma * tau * tau).exp()
}

/// ½(1 + e^{−⟨φ²⟩/2}): mean population for a zero-mean Gaussian phase.
pub fn predicted_population(phase_variance: f64) -> f64 {
    0.5 * (1.0 + (-0.5 * phase_variance).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseVariance {
    /// ⟨φ²⟩ in rad².
    pub value: f64,
    /// Upper bound on the part of the continuous sum beyond n_max.
    pub truncation_bound: f64,
}

/// ⟨φ²⟩ = S_g(0)S(0) + 2Σ_{n>0} S_g(ν_n)S(ν_n) plus line terms.
///
/// A line of power P at ν contributes |g_m|²·P with m the harmonic nearest
/// ν·T (T·S_g at that harmonic). The truncation bound uses the filter
/// weight missing from the truncated sum, T − Σ_{|n|≤n_max} S_g, times the
/// density at the cut-off; it is a bound because the modelled densities
/// decrease with frequency.
pub fn phase_variance(filter: &FilterSpectrum, model: &SignalModel) -> Result<PhaseVariance> {
    let spectrum = model.spectrum()?;
    let total = filter.total_time();
    let n_max = filter.n_max() as i64;

    let mut value = filter.weight(0) * spectrum.density(0.0);
    for n in 1..=n_max {
        value += 2.0 * filter.weight(n) * spectrum.density(filter.frequency(n));
    }

    let captured: f64 = filter.harmonics().map(|n| filter.weight(n)).sum();
    let mut truncation_bound = (total - captured).max(0.0) * spectrum.density(filter.frequency(n_max));

    for line in spectrum.lines() {
        let m = (line.frequency * total).round() as i64;
        if m > n_max {
            truncation_bound += line.power * total * (total - captured).max(0.0);
            continue;
        }
        value += total * filter.weight(m) * line.power;
    }
    Ok(PhaseVariance {
        value,
        truncation_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingMode {
    /// Static fields, interrogation limited by T₂*.
    Dc,
    /// Oscillating fields under decoupling, limited by T₂.
    Ac,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub mode: SensingMode,
    /// 1/(γ√(N·τ)) in T/√Hz with ideal projective readout.
    pub eta_ideal: f64,
    /// η_ideal·√M₀/c.
    pub eta_effective: f64,
    /// √M₀/c, the readout penalty applied to obtain `eta_effective`.
    pub readout_penalty: f64,
    pub interrogation_time: f64,
    pub averaging_time: f64,
    /// η_effective/√(averaging time), in T.
    pub sigma_b: f64,
    /// γ·σ_B in rad/s.
    pub sigma_delta: f64,
    /// Population uncertainty that corresponds to σ_Δ at the interrogation
    /// time, σ_Δ·τ/2.
    pub sigma_p: f64,
    pub contrast: f64,
    pub m0: f64,
    pub sensors: u64,
}

impl SensitivityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mode = match self.mode {
            SensingMode::Dc => "dc",
            SensingMode::Ac => "ac",
        };
        format!(
            "mode,eta_ideal_T_per_sqrtHz,eta_effective_T_per_sqrtHz,readout_penalty,interrogation_time_s,averaging_time_s,sigma_B_T,sigma_delta_rad_per_s,sigma_p,contrast,m0,sensors\n\
             {mode},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.eta_ideal,
            self.eta_effective,
            self.readout_penalty,
            self.interrogation_time,
            self.averaging_time,
            self.sigma_b,
            self.sigma_delta,
            self.sigma_p,
            self.contrast,
            self.m0,
            self.sensors
        )
    }
}

/// √M₀/c.
pub fn readout_penalty(readout: &ReadoutConfig) -> f64 {
    readout.m0.sqrt() / readout.contrast
}

fn report(
    mode: SensingMode,
    spec: &SensorSpec,
    readout: &ReadoutConfig,
    interrogation_time: f64,
    averaging_time: f64,
) -> Result<SensitivityReport> {
    spec.validate()?;
    readout.validate()?;
    ensure_positive("averaging time", averaging_time)?;
    let eta_ideal = 1.0 / (spec.gyromagnetic * (spec.sensors as f64 * interrogation_time).sqrt());
    let penalty = readout_penalty(readout);
    let eta_effective = eta_ideal * penalty;
    let sigma_b = eta_effective / averaging_time.sqrt();
    let sigma_delta = spec.gyromagnetic * sigma_b;
    Ok(SensitivityReport {
        mode,
        eta_ideal,
        eta_effective,
        readout_penalty: penalty,
        interrogation_time,
        averaging_time,
        sigma_b,
        sigma_delta,
        sigma_p: 0.5 * sigma_delta * interrogation_time,
        contrast: readout.contrast,
        m0: readout.m0,
        sensors: spec.sensors,
    })
}

/// η = 1/(γ√(N·T₂*)) for static fields.
pub fn sensitivity_dc(spec: &SensorSpec, readout: &ReadoutConfig, averaging_time: f64) -> Result<SensitivityReport> {
    report(SensingMode::Dc, spec, readout, spec.t2_star, averaging_time)
}

/// η = 1/(γ√(N·T₂)) for AC fields under dynamical decoupling.
pub fn sensitivity_ac(spec: &SensorSpec, readout: &ReadoutConfig, averaging_time: f64) -> Result<SensitivityReport> {
    report(SensingMode::Ac, spec, readout, spec.t2, averaging_time)
}

/// Ramsey sensitivity at interrogation time τ including the static
/// Gaussian envelope: η(τ) = e^{σ²τ²/2}/(γ√(Nτ)).
pub fn eta_of_tau(tau: f64, sigma: f64, gyromagnetic: f64, sensors: u64) -> f64 {
    (0.5 * sigma * sigma * tau * tau).exp() / (gyromagnetic * (sensors as f64 * tau).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalTau {
    pub tau: f64,
    /// e^{σ²τ²/2}/√τ at the optimum, i.e. η(τ*) with γ = N = 1.
    pub eta: f64,
}

/// Minimizes ln η(τ) = σ²τ²/2 − ½ ln τ by golden-section search over
/// u = ln τ.
pub fn optimal_tau(sigma: f64) -> Result<OptimalTau> {
    ensure_positive("detuning standard deviation", sigma)?;
    let f = |u: f64| {
        let tau = u.exp();
        0.5 * sigma * sigma * tau * tau - 0.5 * u
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((1e-3 / sigma).ln(), (1e2 / sigma).ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let tau = (0.5 * (a + b)).exp();
    Ok(OptimalTau {
        tau,
        eta: eta_of_tau(tau, sigma, 1.0, 1),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementComparison {
    /// 1/(γ√(N·T₂*)).
    pub independent: f64,
    /// 1/(γN√T₂*): N-fold moment with unchanged coherence time.
    pub naive_entangled: f64,
    /// 1/(γN√(T₂*/N)): coherence time shortened N-fold.
    pub corrected_entangled: f64,
}

pub fn entanglement_comparison(sensors: u64, gyromagnetic: f64, t2_star: f64) -> Result<EntanglementComparison> {
    if sensors == 0 {
        return Err(Error::param("sensors", "must be at least 1"));
    }
    ensure_positive("gyromagnetic ratio", gyromagnetic)?;
    ensure_positive("T2*", t2_star)?;
    let n = sensors as f64;
    Ok(EntanglementComparison {
        independent: 1.0 / (gyromagnetic * (n * t2_star).sqrt()),
        naive_entangled: 1.0 / (gyromagnetic * n * t2_star.sqrt()),
        corrected_entangled: 1.0 / (gyromagnetic * n * (t2_star / n).sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::SinusoidPhase;
    use crate::sequence::{cpmg, filter_spectrum, hahn, ramsey, sensitivity_function};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::TAU;

    #[test]
    fn envelope_and_population() {
        assert_eq!(static_envelope(0.0, 5.0), 1.0);
        assert_relative_eq!(static_envelope(0.2, 5.0), (-0.5f64).exp(), max_relative = 1e-15);
        assert_eq!(predicted_population(0.0), 1.0);
        assert_abs_diff_eq!(predicted_population(2.0), 0.6839397205857212, epsilon = 1e-15);
    }

    #[test]
    fn ramsey_static_convention_lock() {
        let (sigma, tau) = (TAU * 200e3, 1.3e-6);
        let g = sensitivity_function(&ramsey(tau).unwrap()).unwrap();
        let f = filter_spectrum(&g, 10_000).unwrap();
        let model = SignalModel::StaticGaussian { mean: 0.0, std_dev: sigma };
        let v = phase_variance(&f, &model).unwrap().value;
        assert_relative_eq!(v, sigma * sigma * tau * tau, max_relative = 0.01);
        assert_relative_eq!(predicted_population(v), 0.5 * (1.0 + static_envelope(tau, sigma)), max_relative = 1e-9);
    }

    #[test]
    fn echo_rejects_static_noise_and_zero_power_gives_zero() {
        let g = sensitivity_function(&hahn(2e-6).unwrap()).unwrap();
        let f = filter_spectrum(&g, 200).unwrap();
        let stat = SignalModel::StaticGaussian { mean: 0.0, std_dev: 1e6 };
        assert_abs_diff_eq!(phase_variance(&f, &stat).unwrap().value, 0.0, epsilon = 1e-20);
        let zero = SignalModel::Constant { detuning: 5e5 };
        assert_eq!(phase_variance(&f, &zero).unwrap().value, 0.0);
        let fixed = SignalModel::Sinusoid {
            amplitude: 1.0,
            frequency: 1e5,
            phase: SinusoidPhase::Fixed(0.0),
        };
        assert!(phase_variance(&f, &fixed).is_err());
    }

    #[test]
    fn random_phase_tone_variance() {
        // φ = b·∫g sin(2πνt+θ): ⟨φ²⟩ = (b²/2)|G(ν)|², with |G| = (2/π)T at the lock-in frequency
        let (n, tau, b) = (8, 1e-6, 3e4);
        let g = sensitivity_function(&cpmg(n, tau).unwrap()).unwrap();
        let f = filter_spectrum(&g, 100).unwrap();
        let model = SignalModel::Sinusoid {
            amplitude: b,
            frequency: 1.0 / (2.0 * tau),
            phase: SinusoidPhase::Random,
        };
        let total = n as f64 * tau;
        let expected = 0.5 * b * b * (2.0 / std::f64::consts::PI * total).powi(2);
        assert_relative_eq!(phase_variance(&f, &model).unwrap().value, expected, max_relative = 1e-9);
    }

    #[test]
    fn truncation_bound_shrinks() {
        let g = sensitivity_function(&cpmg(4, 1e-6).unwrap()).unwrap();
        let model = SignalModel::OrnsteinUhlenbeck {
            std_dev: 1e5,
            correlation_time: 1e-7,
        };
        let coarse = phase_variance(&filter_spectrum(&g, 20).unwrap(), &model).unwrap();
        let fine = phase_variance(&filter_spectrum(&g, 5000).unwrap(), &model).unwrap();
        assert!(fine.truncation_bound < coarse.truncation_bound);
        assert!(fine.value - coarse.value <= coarse.truncation_bound * (1.0 + 1e-9));
        assert!(fine.truncation_bound < 0.01 * fine.value);
    }

    #[test]
    fn sensitivity_figures() {
        let spec = SensorSpec::nv();
        let readout = ReadoutConfig::default();
        let dc = sensitivity_dc(&spec, &readout, 1.0).unwrap();
        let hand = 1.0 / (TAU * 3e10 * 1e-3);
        assert_relative_eq!(dc.eta_ideal, hand, max_relative = 1e-12);
        assert_relative_eq!(dc.eta_ideal, 5.305e-9, max_relative = 1e-3);
        let ac = sensitivity_ac(&spec, &readout, 1.0).unwrap();
        assert_relative_eq!(ac.eta_ideal / dc.eta_ideal, (1.0f64 / 300.0).sqrt(), max_relative = 1e-12);
        let mut four = spec.clone();
        four.sensors = 4;
        assert_eq!(sensitivity_dc(&four, &readout, 1.0).unwrap().eta_ideal, dc.eta_ideal / 2.0);

        let r = sensitivity_dc(&spec, &readout, 0.25).unwrap();
        assert_relative_eq!(r.sigma_b, r.eta_effective / 0.5, max_relative = 1e-12);

        let lossy = ReadoutConfig {
            m0: 100.0,
            contrast: 0.25,
            ..readout
        };
        let r = sensitivity_dc(&spec, &lossy, 1.0).unwrap();
        assert_relative_eq!(r.eta_effective, r.eta_ideal * 40.0, max_relative = 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut s = SensorSpec::nv();
        s.t2 = 1e-7;
        assert!(s.validate().is_err());
        s = SensorSpec::nv();
        s.gyromagnetic = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn optimal_interrogation_time() {
        for t2s in [1e-7, 1e-6, 1e-5, 1e-4] {
            let opt = optimal_tau(1.0 / t2s).unwrap();
            assert_relative_eq!(opt.tau, t2s / 2f64.sqrt(), max_relative = 1e-6);
            let eta = |t: f64| eta_of_tau(t, 1.0 / t2s, 1.0, 1);
            assert!(opt.eta < eta(t2s / 10.0) && opt.eta < eta(10.0 * t2s));
            assert!(opt.eta <= eta(t2s) && eta(t2s) <= 1.2 * opt.eta);
        }
        assert!(optimal_tau(0.0).is_err());
    }

    #[test]
    fn entanglement() {
        let one = entanglement_comparison(1, 2.0, 3.0).unwrap();
        assert_eq!(one.independent, one.naive_entangled);
        let four = entanglement_comparison(4, 2.0, 3.0).unwrap();
        assert_relative_eq!(four.naive_entangled, four.independent / 2.0, max_relative = 1e-15);
        assert_relative_eq!(four.corrected_entangled, four.independent, max_relative = 1e-12);
    }
}
