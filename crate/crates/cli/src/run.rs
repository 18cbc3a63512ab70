//! Fully resolved run configurations. Everything a command needs is in
//! here in SI units, so a configuration read back from a result file runs
//! identically.

use std::f64::consts::TAU;

use anyhow::{bail, ensure, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use spinsense::analysis::{phase_variance, sensitivity_ac, sensitivity_dc, SensorSpec};
use spinsense::engine::{
    coherence_decay_curve, fingerprint, measure_field, odmr_scan, run_experiment, Experiment, FieldMeasurement,
    Metadata, ReadoutConfig, SweepVariable,
};
use spinsense::rng::derive_seed;
use spinsense::{filter_spectrum, reconstruct_spectrum, sensitivity_function, SequenceFamily, SignalModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    pub pulses: u32,
    /// CPMG inter-pulse spacings, ascending, s.
    pub taus: Vec<f64>,
    pub model: SignalModel,
    pub realizations: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseConfig {
    pub spec: SensorSpec,
    /// True field, T.
    pub field: f64,
    /// Ramsey free-evolution time, s.
    pub tau: f64,
    pub model: SignalModel,
    pub readout: ReadoutConfig,
    pub realizations: usize,
    pub trials: u32,
    /// Total averaging time for σ_B = η/√T, s.
    pub averaging_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdmrConfig {
    pub spec: SensorSpec,
    pub field: f64,
    /// Microwave frequency range, Hz.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Lorentzian half-width, rad/s.
    pub linewidth: f64,
    pub contrast: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Fringes { experiment: Experiment },
    Decay { experiment: Experiment },
    Spectrum(SpectrumConfig),
    Sense(SenseConfig),
    Odmr(OdmrConfig),
}

/// What a result file contains.
#[derive(Debug, Serialize, Deserialize)]
pub struct Document {
    pub config: RunConfig,
    pub metadata: Metadata,
    pub result: Value,
}

pub struct Outputs {
    /// CSV files by name.
    pub tables: Vec<(String, String)>,
    pub result: Value,
    pub realizations_used: usize,
}

impl RunConfig {
    pub fn command(&self) -> &'static str {
        match self {
            RunConfig::Fringes { .. } => "fringes",
            RunConfig::Decay { .. } => "decay",
            RunConfig::Spectrum(_) => "spectrum",
            RunConfig::Sense(_) => "sense",
            RunConfig::Odmr(_) => "odmr",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::Fringes { experiment } | RunConfig::Decay { experiment } => Some(experiment.readout.seed),
            RunConfig::Spectrum(c) => Some(c.seed),
            RunConfig::Sense(c) => Some(c.readout.seed),
            RunConfig::Odmr(_) => None,
        }
    }

    /// Fingerprint of the configuration with the seed left out.
    pub fn fingerprint(&self) -> String {
        let mut unseeded = self.clone();
        match &mut unseeded {
            RunConfig::Fringes { experiment } | RunConfig::Decay { experiment } => experiment.readout.seed = 0,
            RunConfig::Spectrum(c) => c.seed = 0,
            RunConfig::Sense(c) => c.readout.seed = 0,
            RunConfig::Odmr(_) => {}
        }
        fingerprint(&unseeded)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RunConfig::Fringes { experiment } | RunConfig::Decay { experiment } => experiment.validate()?,
            RunConfig::Spectrum(c) => {
                c.model.validate()?;
                ensure!(c.pulses >= 1, "spectrum needs at least one pulse");
                ensure!(c.realizations >= 1, "realizations must be at least 1");
                ensure!(!c.taus.is_empty(), "spectrum sweep is empty");
                ensure!(
                    c.taus.iter().all(|t| t.is_finite() && *t > 0.0),
                    "spectrum sweep values must be positive times"
                );
                ensure!(
                    c.taus.windows(2).all(|w| w[1] > w[0]),
                    "spectrum sweep must be strictly ascending"
                );
            }
            RunConfig::Sense(c) => {
                c.spec.validate()?;
                c.model.validate()?;
                c.readout.validate()?;
                spinsense::ramsey(c.tau)?;
                ensure!(c.field.is_finite(), "field must be finite");
                ensure!(c.trials >= 1, "trials must be at least 1");
                ensure!(c.realizations >= 1, "realizations must be at least 1");
                ensure!(
                    c.averaging_time.is_finite() && c.averaging_time > 0.0,
                    "averaging time must be positive"
                );
            }
            RunConfig::Odmr(c) => {
                c.spec.validate()?;
                ensure!(c.field.is_finite(), "field must be finite");
                ensure!(c.points >= 2, "odmr needs at least 2 points");
                ensure!(
                    c.start.is_finite() && c.stop.is_finite() && c.stop > c.start,
                    "odmr range needs start < stop"
                );
                ensure!(c.linewidth.is_finite() && c.linewidth > 0.0, "linewidth must be positive");
                ensure!((0.0..=1.0).contains(&c.contrast), "contrast must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn execute(&self) -> Result<Outputs> {
        self.validate()?;
        match self {
            RunConfig::Fringes { experiment } => {
                let result = run_experiment(experiment)?;
                Ok(Outputs {
                    tables: vec![("fringes.csv".into(), result.to_csv())],
                    result: json!({ "points": result.points }),
                    realizations_used: result.metadata.realizations_used,
                })
            }
            RunConfig::Decay { experiment } => decay(experiment),
            RunConfig::Spectrum(c) => spectrum(c),
            RunConfig::Sense(c) => sense(c),
            RunConfig::Odmr(c) => odmr(c),
        }
    }
}

/// True when every component is Gaussian, so C = cos(φ̄)·e^{−⟨δφ²⟩/2}.
fn is_gaussian(model: &SignalModel) -> bool {
    match model {
        SignalModel::Constant { .. } | SignalModel::StaticGaussian { .. } | SignalModel::OrnsteinUhlenbeck { .. } => {
            true
        }
        SignalModel::Sinusoid { .. } => false,
        SignalModel::Composite { components } => components.iter().all(is_gaussian),
    }
}

fn decay(experiment: &Experiment) -> Result<Outputs> {
    let result = run_experiment(experiment)?;
    let predicted = if is_gaussian(&experiment.model) {
        let spectrum = experiment.model.spectrum()?;
        let mut values = Vec::with_capacity(result.points.len());
        for (i, point) in result.points.iter().enumerate() {
            let g = sensitivity_function(&experiment.point_sequence(i)?)?;
            let filter = filter_spectrum(&g, 4096)?;
            let offset = experiment.model.mean_offset()
                + if experiment.sweep.variable == SweepVariable::Detuning {
                    point.value
                } else {
                    0.0
                };
            let mean_phase = offset * filter.coefficient(0).re;
            let variance = if spectrum.is_zero() {
                0.0
            } else {
                phase_variance(&filter, &experiment.model)?.value
            };
            values.push(mean_phase.cos() * (-variance / 2.0).exp());
        }
        Some(values)
    } else {
        None
    };
    let first = experiment.sweep.column_name(&experiment.sequence);
    let mut csv = format!("{first},free_evolution_s,coherence,coherence_measured");
    if predicted.is_some() {
        csv.push_str(",coherence_gaussian_theory");
    }
    csv.push('\n');
    let mut rows = Vec::with_capacity(result.points.len());
    for (i, p) in result.points.iter().enumerate() {
        let coherence = 2.0 * p.p_true - 1.0;
        let measured = 2.0 * p.p_hat - 1.0;
        csv.push_str(&format!("{},{},{},{}", p.value, p.total_time, coherence, measured));
        let theory = predicted.as_ref().map(|v| v[i]);
        if let Some(t) = theory {
            csv.push_str(&format!(",{t}"));
        }
        csv.push('\n');
        rows.push(json!({
            "value": p.value,
            "total_time": p.total_time,
            "coherence": coherence,
            "coherence_measured": measured,
            "coherence_gaussian_theory": theory,
        }));
    }
    Ok(Outputs {
        tables: vec![("decay.csv".into(), csv)],
        result: json!({ "points": rows }),
        realizations_used: result.metadata.realizations_used,
    })
}

fn spectrum(c: &SpectrumConfig) -> Result<Outputs> {
    let curve = coherence_decay_curve(
        SequenceFamily::Cpmg { pulses: c.pulses },
        &c.taus,
        &c.model,
        c.realizations,
        c.seed,
    )?;
    let coherence: Vec<f64> = curve.iter().map(|p| p.coherence).collect();
    let reconstruction = reconstruct_spectrum(c.pulses, &c.taus, &coherence)?;
    for d in &reconstruction.diagnostics {
        eprintln!("warning: {d}");
    }
    let reference = c.model.spectrum().ok();
    Ok(Outputs {
        tables: vec![("spectrum.csv".into(), reconstruction.to_csv(reference.as_ref()))],
        result: serde_json::to_value(&reconstruction)?,
        realizations_used: if c.model.is_deterministic() { 1 } else { c.realizations },
    })
}

fn sense(c: &SenseConfig) -> Result<Outputs> {
    let mut measurements = Vec::with_capacity(c.trials as usize);
    for trial in 0..c.trials {
        let readout = ReadoutConfig {
            seed: derive_seed(c.readout.seed, &[u64::from(trial)]),
            ..c.readout.clone()
        };
        measurements.push(measure_field(c.field, &c.spec, c.tau, &c.model, &readout, c.realizations)?);
    }
    let mut csv = format!("trial,{}", FieldMeasurement::csv_header());
    for (trial, m) in measurements.iter().enumerate() {
        csv.push_str(&format!("{trial},{}", m.csv_row()));
    }
    let dc = sensitivity_dc(&c.spec, &c.readout, c.averaging_time)?;
    let ac = sensitivity_ac(&c.spec, &c.readout, c.averaging_time)?;
    let mut report = dc.to_csv();
    report.push_str(ac.to_csv().lines().nth(1).unwrap_or_default());
    report.push('\n');
    Ok(Outputs {
        tables: vec![("sense.csv".into(), csv), ("sensitivity.csv".into(), report)],
        result: json!({ "measurements": measurements, "sensitivity": [dc, ac] }),
        realizations_used: if c.model.is_deterministic() { 1 } else { c.realizations },
    })
}

fn odmr(c: &OdmrConfig) -> Result<Outputs> {
    let step = (c.stop - c.start) / (c.points - 1) as f64;
    let frequencies: Vec<f64> = (0..c.points)
        .map(|k| if k + 1 == c.points { c.stop } else { c.start + k as f64 * step })
        .collect();
    let omegas: Vec<f64> = frequencies.iter().map(|f| TAU * f).collect();
    let fluorescence = odmr_scan(&omegas, c.field, &c.spec, c.linewidth, c.contrast)?;
    let mut csv = String::from("frequency_Hz,fluorescence\n");
    for (f, y) in frequencies.iter().zip(&fluorescence) {
        csv.push_str(&format!("{f},{y}\n"));
    }
    Ok(Outputs {
        tables: vec![("odmr.csv".into(), csv)],
        result: json!({ "frequency_Hz": frequencies, "fluorescence": fluorescence }),
        realizations_used: 1,
    })
}

pub fn parse_document(text: &str) -> Result<Document> {
    match serde_json::from_str::<Document>(text) {
        Ok(doc) => Ok(doc),
        Err(e) => bail!("not a spinsense result file: {e}"),
    }
}
