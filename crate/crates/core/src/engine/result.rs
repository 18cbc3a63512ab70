use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{run_experiment, Experiment};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    /// Sweep variable value in SI units (s, rad/s or a pulse count).
    pub value: f64,
    /// Free-evolution time T of the sequence at this point.
    pub total_time: f64,
    /// Realization-averaged population before readout.
    pub p_true: f64,
    pub p_hat: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    /// FNV-1a hash of the configuration with the seed left out.
    pub config_fingerprint: String,
    pub realizations_used: usize,
    pub generator: String,
    /// Set when the seed was previously used with a different
    /// configuration (see [`SeedRegistry`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_reuse: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: Experiment,
    pub metadata: Metadata,
    pub points: Vec<PointResult>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// FNV-1a hash of the JSON form of any configuration, as 16 hex digits.
pub fn fingerprint<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("configuration serializes");
    format!("{:016x}", fnv1a(&json))
}

/// Fingerprint of everything except the seed.
pub(crate) fn config_fingerprint(experiment: &Experiment) -> String {
    let mut unseeded = experiment.clone();
    unseeded.readout.seed = 0;
    fingerprint(&unseeded)
}

impl ExperimentResult {
    pub(crate) fn new(experiment: Experiment, points: Vec<PointResult>) -> Self {
        let realizations_used = if experiment.model.is_deterministic() {
            1
        } else {
            experiment.realizations
        };
        let metadata = Metadata {
            seed: experiment.readout.seed,
            config_fingerprint: config_fingerprint(&experiment),
            realizations_used,
            generator: format!("spinsense {}", env!("CARGO_PKG_VERSION")),
            seed_reuse: None,
        };
        Self {
            experiment,
            metadata,
            points,
        }
    }

    /// One row per sweep point; column names carry units.
    pub fn to_csv(&self) -> String {
        let first = self.experiment.sweep.column_name(&self.experiment.sequence);
        let mut out = format!("{first},free_evolution_s,p_true,p_hat,std_error\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.value, p.total_time, p.p_true, p.p_hat, p.std_error
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Runs the embedded configuration again.
    pub fn rerun(&self) -> Result<Self> {
        run_experiment(&self.experiment)
    }
}

/// Remembers which configuration each seed was used with, so that reuse of
/// a seed for a different configuration can be flagged.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedRegistry {
    seeds: BTreeMap<u64, String>,
}

impl SeedRegistry {
    /// Records the result's seed and sets `metadata.seed_reuse` when the
    /// seed was seen before with another fingerprint.
    pub fn register(&mut self, result: &mut ExperimentResult) {
        let seed = result.metadata.seed;
        let fp = result.metadata.config_fingerprint.clone();
        result.metadata.seed_reuse = self.check(seed, &fp);
    }

    /// Records `seed` for `fingerprint` on first use; returns a warning if
    /// it was already recorded for a different fingerprint.
    pub fn check(&mut self, seed: u64, fingerprint: &str) -> Option<String> {
        match self.seeds.get(&seed) {
            Some(previous) if previous != fingerprint => Some(format!(
                "seed {seed} was previously used with configuration {previous}"
            )),
            Some(_) => None,
            None => {
                self.seeds.insert(seed, fingerprint.to_owned());
                None
            }
        }
    }
}
