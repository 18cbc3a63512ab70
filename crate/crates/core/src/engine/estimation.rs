use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{mean_population, simulate_readout, ReadoutConfig};
use crate::analysis::SensorSpec;
use crate::error::{ensure_positive, Error, Result};
use crate::noise::SignalModel;
use crate::rng::stream;
use crate::sequence::{ramsey, SequenceFamily};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetuningEstimate {
    /// Operating offset Δ₀ = π/(2τ), rad/s.
    pub operating_point: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Slope-point estimate from a Ramsey population measured at detuning
/// Δ₀ + δ with Δ₀ = π/(2τ): the local fringe is p = ½(1 − sin δτ), so
/// Δ̂ = Δ₀ − (2/τ)(p̂ − ½) and σ_Δ̂ = (2/τ)σ_p.
///
/// The linearization holds for |δ|τ well below 1 (about 0.5 keeps the bias
/// under 5%).
pub fn estimate_detuning(p_hat: f64, std_error: f64, tau: f64) -> Result<DetuningEstimate> {
    ensure_positive("tau", tau)?;
    if !(0.0..=1.0).contains(&p_hat) {
        return Err(Error::param("p_hat", format!("must lie in [0, 1], got {p_hat}")));
    }
    let operating_point = FRAC_PI_2 / tau;
    Ok(DetuningEstimate {
        operating_point,
        estimate: operating_point - 2.0 / tau * (p_hat - 0.5),
        std_error: 2.0 / tau * std_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldEstimate {
    pub field: f64,
    pub std_error: f64,
}

/// B̂ = (Δ̂ − Δ₀)/γ: the field is the detuning shift beyond the applied
/// operating offset.
pub fn estimate_field(estimate: &DetuningEstimate, gyromagnetic: f64) -> Result<FieldEstimate> {
    ensure_positive("gyromagnetic ratio", gyromagnetic)?;
    Ok(FieldEstimate {
        field: (estimate.estimate - estimate.operating_point) / gyromagnetic,
        std_error: estimate.std_error / gyromagnetic,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeasurement {
    pub field_true: f64,
    pub tau: f64,
    pub p_true: f64,
    pub p_hat: f64,
    pub p_std_error: f64,
    pub detuning: DetuningEstimate,
    pub field: FieldEstimate,
}

impl FieldMeasurement {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("measurement serializes")
    }

    pub fn csv_header() -> &'static str {
        "field_true_T,tau_s,p_true,p_hat,p_std_error,detuning_estimate_rad_per_s,detuning_std_error_rad_per_s,field_estimate_T,field_std_error_T\n"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}\n",
            self.field_true,
            self.tau,
            self.p_true,
            self.p_hat,
            self.p_std_error,
            self.detuning.estimate,
            self.detuning.std_error,
            self.field.field,
            self.field.std_error
        )
    }
}

/// One Ramsey field measurement: the qubit sees Δ₀ + γB plus `noise`, the
/// population is averaged over noise realizations, read out with
/// `readout`, and inverted to a field estimate.
pub fn measure_field(
    field: f64,
    spec: &SensorSpec,
    tau: f64,
    noise: &SignalModel,
    readout: &ReadoutConfig,
    realizations: usize,
) -> Result<FieldMeasurement> {
    spec.validate()?;
    readout.validate()?;
    noise.validate()?;
    if !field.is_finite() {
        return Err(Error::param("field", "must be finite"));
    }
    let seq = ramsey(tau)?;
    let offset = FRAC_PI_2 / tau + spec.gyromagnetic * field;
    let p = mean_population(&seq, noise, offset, realizations.max(1), None, readout.seed, 0)?;
    let outcome = simulate_readout(p, readout, &mut stream(readout.seed, &[0, 1]));
    let detuning = estimate_detuning(outcome.p_hat, outcome.std_error, tau)?;
    let estimate = estimate_field(&detuning, spec.gyromagnetic)?;
    Ok(FieldMeasurement {
        field_true: field,
        tau,
        p_true: p,
        p_hat: outcome.p_hat,
        p_std_error: outcome.std_error,
        detuning,
        field: estimate,
    })
}

/// Normalized fluorescence 1 − c/(1 + x²), x = (ω − ω₀ − γB)/linewidth.
/// The dip sits at ω₀ + γB with depth `contrast`.
pub fn odmr_scan(omegas: &[f64], field: f64, spec: &SensorSpec, linewidth: f64, contrast: f64) -> Result<Vec<f64>> {
    ensure_positive("linewidth", linewidth)?;
    if !(0.0..=1.0).contains(&contrast) {
        return Err(Error::param("contrast", format!("must lie in [0, 1], got {contrast}")));
    }
    let centre = spec.omega0 + spec.gyromagnetic * field;
    Ok(omegas
        .iter()
        .map(|&w| {
            let x = (w - centre) / linewidth;
            1.0 - contrast / (1.0 + x * x)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    /// Builder time parameter.
    pub time: f64,
    /// Free-evolution time T.
    pub total_time: f64,
    /// C = 2⟨p⟩ − 1.
    pub coherence: f64,
}

/// Coherence C = 2⟨p⟩ − 1 on an ascending grid of the family's time
/// parameter, averaged over `realizations` noise draws per point.
pub fn coherence_decay_curve(
    family: SequenceFamily,
    grid: &[f64],
    model: &SignalModel,
    realizations: usize,
    seed: u64,
) -> Result<Vec<DecayPoint>> {
    model.validate()?;
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("grid", "must be strictly ascending"));
    }
    if realizations == 0 {
        return Err(Error::param("realizations", "must be at least 1"));
    }
    grid.iter()
        .enumerate()
        .map(|(i, &time)| {
            let seq = family.build(time)?;
            let p = mean_population(&seq, model, 0.0, realizations, None, seed, i as u64)?;
            Ok(DecayPoint {
                time,
                total_time: seq.total_time(),
                coherence: 2.0 * p - 1.0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::static_envelope;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::TAU;

    #[test]
    fn detuning_estimator() {
        let tau = 2e-6;
        let e = estimate_detuning(0.5, 0.01, tau).unwrap();
        assert_eq!(e.estimate, e.operating_point);
        assert_relative_eq!(e.operating_point, std::f64::consts::PI / (2.0 * tau));
        assert_relative_eq!(e.std_error, 0.01 * 2.0 / tau);
        // σ_p = 1/(2√(MN)) maps to 1/(τ√(MN))
        let mn = 1e4f64;
        let e = estimate_detuning(0.5, 1.0 / (2.0 * mn.sqrt()), tau).unwrap();
        assert_relative_eq!(e.std_error, 1.0 / (tau * mn.sqrt()), max_relative = 1e-15);
        assert!(estimate_detuning(1.2, 0.0, tau).is_err());
    }

    #[test]
    fn odmr_dip_position_and_depth() {
        let spec = SensorSpec::nv();
        let lw = TAU * 5e6;
        let grid: Vec<f64> = (0..=400).map(|k| spec.omega0 + TAU * (k as f64 - 100.0) * 0.5e6).collect();
        let zero = odmr_scan(&grid, 0.0, &spec, lw, 0.3).unwrap();
        let at = |curve: &[f64]| {
            let k = (0..curve.len()).min_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
            (grid[k], curve[k])
        };
        let (w0, depth) = at(&zero);
        assert_eq!(w0, spec.omega0);
        assert_abs_diff_eq!(1.0 - depth, 0.3, epsilon = 1e-15);
        let shifted = odmr_scan(&grid, 1e-3, &spec, lw, 0.3).unwrap();
        assert_relative_eq!(at(&shifted).0 - spec.omega0, TAU * 30e6, max_relative = 1e-9);
        assert!(odmr_scan(&grid, 0.0, &spec, 0.0, 0.3).is_err());
    }

    #[test]
    fn ramsey_decay_follows_gaussian_envelope() {
        let sigma = 1e6;
        let model = SignalModel::StaticGaussian { mean: 0.0, std_dev: sigma };
        let grid: Vec<f64> = (1..=6).map(|k| k as f64 * 0.5e-6).collect();
        let curve = coherence_decay_curve(SequenceFamily::Ramsey, &grid, &model, 20_000, 4).unwrap();
        for p in &curve {
            assert_abs_diff_eq!(p.coherence, static_envelope(p.time, sigma), epsilon = 0.02);
        }
        let echo = coherence_decay_curve(SequenceFamily::Hahn, &grid, &model, 100, 4).unwrap();
        assert!(echo.iter().all(|p| (p.coherence - 1.0).abs() < 1e-12));
        assert!(coherence_decay_curve(SequenceFamily::Hahn, &[2e-6, 1e-6], &model, 10, 0).is_err());
    }

    #[test]
    fn field_measurement_recovers_field() {
        let spec = SensorSpec::nv();
        let readout = ReadoutConfig {
            repetitions: 100_000,
            seed: 17,
            ..Default::default()
        };
        let b = 0.05 / (spec.gyromagnetic * 1e-6);
        let m = measure_field(b, &spec, 1e-6, &SignalModel::Constant { detuning: 0.0 }, &readout, 1).unwrap();
        assert!((m.field.field - b).abs() < 4.0 * m.field.std_error + 1e-3 * b.abs());
    }
}
