use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::Spectrum;
use crate::sequence::{cpmg, filter_spectrum, sensitivity_function, FilterSpectrum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionPoint {
    pub tau: f64,
    /// Filter centre 1/(2τ), Hz.
    pub frequency: f64,
    pub coherence: f64,
    /// −2 ln C.
    pub phase_variance: f64,
    /// Main-lobe filter weight W(τ), s.
    pub window_weight: f64,
    /// ⟨φ²⟩/W in (rad/s)²/Hz.
    pub psd: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub pulses: u32,
    pub points: Vec<ReconstructionPoint>,
    /// One message per input point that was excluded.
    pub diagnostics: Vec<String>,
}

impl Reconstruction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reconstruction serializes")
    }

    /// CSV with units in the headers; with a reference spectrum an extra
    /// column holds its density at each frequency.
    pub fn to_csv(&self, reference: Option<&Spectrum>) -> String {
        let mut out = String::from(
            "tau_s,frequency_Hz,coherence,phase_variance_rad2,window_weight_s,psd_estimate_rad2_per_s2_per_Hz",
        );
        if reference.is_some() {
            out.push_str(",psd_reference_rad2_per_s2_per_Hz");
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{}",
                p.tau, p.frequency, p.coherence, p.phase_variance, p.window_weight, p.psd
            ));
            if let Some(s) = reference {
                out.push_str(&format!(",{}", s.density(p.frequency)));
            }
            out.push('\n');
        }
        out
    }
}

/// W = Σ S_g(ν_m) over harmonics within 1/T of the filter centre
/// 1/(2τ), counting both signs of m (so m > 0 enters twice).
pub fn window_weight(filter: &FilterSpectrum, centre: f64) -> f64 {
    let total = filter.total_time();
    (0..=filter.n_max() as i64)
        .filter(|&m| (filter.frequency(m) - centre).abs() <= (1.0 + 1e-9) / total)
        .map(|m| if m == 0 { 1.0 } else { 2.0 } * filter.weight(m))
        .sum()
}

/// Turns a CPMG coherence curve C(τ) into spectral-density estimates at
/// ν = 1/(2τ): ⟨φ²⟩ = −2 ln C and S = ⟨φ²⟩/W(τ).
///
/// Points with C ≤ 0 or C > 1 are skipped with a diagnostic; values within
/// 1e-9 above 1 are treated as 1.
pub fn reconstruct_spectrum(pulses: u32, taus: &[f64], coherence: &[f64]) -> Result<Reconstruction> {
    if taus.len() != coherence.len() {
        return Err(Error::param("coherence", "needs one value per tau"));
    }
    let mut out = Reconstruction {
        pulses,
        ..Default::default()
    };
    for (&tau, &c) in taus.iter().zip(coherence) {
        if !(c > 0.0) {
            out.diagnostics.push(format!(
                "tau = {tau:e} s: coherence {c} <= 0 (fully decohered), point excluded"
            ));
            continue;
        }
        if c > 1.0 + 1e-9 {
            out.diagnostics.push(format!(
                "tau = {tau:e} s: coherence {c} > 1 is unphysical, point excluded"
            ));
            continue;
        }
        let c = c.min(1.0);
        let g = sensitivity_function(&cpmg(pulses, tau)?)?;
        let filter = filter_spectrum(&g, pulses as usize + 2)?;
        let centre = 1.0 / (2.0 * tau);
        let w = window_weight(&filter, centre);
        let variance = -2.0 * c.ln();
        out.points.push(ReconstructionPoint {
            tau,
            frequency: centre,
            coherence: c,
            phase_variance: variance,
            window_weight: w,
            psd: variance / w,
        });
    }
    Ok(out)
}
