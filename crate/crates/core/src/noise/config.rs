//! TOML form of a [`SignalModel`].
//!
//! ```toml
//! kind = "composite"
//!
//! [[components]]
//! kind = "ou"
//! std_dev = "50 kHz"
//! correlation_time = "5 us"
//!
//! [[components]]
//! kind = "sinusoid"
//! amplitude = "20 kHz"
//! frequency = "100 kHz"
//! phase = "random"
//! ```
//!
//! | kind              | keys                                        |
//! |-------------------|---------------------------------------------|
//! | `constant`        | `detuning`                                  |
//! | `static_gaussian` | `std_dev`, optional `mean` (default 0)      |
//! | `sinusoid`        | `amplitude`, `frequency`, `phase`           |
//! | `ou`              | `std_dev`, `correlation_time`               |
//! | `composite`       | `[[components]]`                            |
//!
//! Detunings, amplitudes and standard deviations accept Hz-family units
//! (converted with 2π) or rad/s. `phase` is an angle (`rad`, `deg`) or
//! `"random"`. Written files use rad/s, Hz, s and rad.

use serde::{Deserialize, Serialize};

use super::{SignalModel, SinusoidPhase};
use crate::error::{Error, Result};
use crate::units::{parse_angle, parse_angular, parse_frequency, parse_time};

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detuning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_dev: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    amplitude: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frequency: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    correlation_time: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    components: Vec<RawModel>,
}

fn required<'a>(value: &'a Option<String>, key: &str, kind: &str) -> Result<&'a str> {
    value
        .as_deref()
        .ok_or_else(|| Error::Config(format!("noise model '{kind}' needs key '{key}'")))
}

impl RawModel {
    fn reject_extra(&self, allowed: &[&str]) -> Result<()> {
        let present = [
            ("detuning", self.detuning.is_some()),
            ("mean", self.mean.is_some()),
            ("std_dev", self.std_dev.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("frequency", self.frequency.is_some()),
            ("phase", self.phase.is_some()),
            ("correlation_time", self.correlation_time.is_some()),
            ("components", !self.components.is_empty()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(Error::Config(format!(
                    "key '{key}' does not apply to noise model '{}'",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    fn resolve(&self) -> Result<SignalModel> {
        let kind = self.kind.as_str();
        let model = match kind {
            "constant" => {
                self.reject_extra(&["detuning"])?;
                SignalModel::Constant {
                    detuning: parse_angular(required(&self.detuning, "detuning", kind)?)?,
                }
            }
            "static_gaussian" => {
                self.reject_extra(&["mean", "std_dev"])?;
                SignalModel::StaticGaussian {
                    mean: self.mean.as_deref().map(parse_angular).transpose()?.unwrap_or(0.0),
                    std_dev: parse_angular(required(&self.std_dev, "std_dev", kind)?)?,
                }
            }
            "sinusoid" => {
                self.reject_extra(&["amplitude", "frequency", "phase"])?;
                let phase = required(&self.phase, "phase", kind)?;
                SignalModel::Sinusoid {
                    amplitude: parse_angular(required(&self.amplitude, "amplitude", kind)?)?,
                    frequency: parse_frequency(required(&self.frequency, "frequency", kind)?)?,
                    phase: if phase.trim().eq_ignore_ascii_case("random") {
                        SinusoidPhase::Random
                    } else {
                        SinusoidPhase::Fixed(parse_angle(phase)?)
                    },
                }
            }
            "ou" | "ornstein_uhlenbeck" => {
                self.reject_extra(&["std_dev", "correlation_time"])?;
                SignalModel::OrnsteinUhlenbeck {
                    std_dev: parse_angular(required(&self.std_dev, "std_dev", kind)?)?,
                    correlation_time: parse_time(required(
                        &self.correlation_time,
                        "correlation_time",
                        kind,
                    )?)?,
                }
            }
            "composite" => {
                self.reject_extra(&["components"])?;
                SignalModel::Composite {
                    components: self.components.iter().map(RawModel::resolve).collect::<Result<_>>()?,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown noise model kind '{other}' (expected constant, static_gaussian, sinusoid, ou, composite)"
                )))
            }
        };
        model.validate()?;
        Ok(model)
    }

    fn from_model(model: &SignalModel) -> Self {
        let rad = |v: f64| Some(format!("{v:e} rad/s"));
        match model {
            SignalModel::Constant { detuning } => RawModel {
                kind: "constant".into(),
                detuning: rad(*detuning),
                ..Default::default()
            },
            SignalModel::StaticGaussian { mean, std_dev } => RawModel {
                kind: "static_gaussian".into(),
                mean: rad(*mean),
                std_dev: rad(*std_dev),
                ..Default::default()
            },
            SignalModel::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => RawModel {
                kind: "sinusoid".into(),
                amplitude: rad(*amplitude),
                frequency: Some(format!("{frequency:e} Hz")),
                phase: Some(match phase {
                    SinusoidPhase::Fixed(p) => format!("{p:e} rad"),
                    SinusoidPhase::Random => "random".into(),
                }),
                ..Default::default()
            },
            SignalModel::OrnsteinUhlenbeck {
                std_dev,
                correlation_time,
            } => RawModel {
                kind: "ou".into(),
                std_dev: rad(*std_dev),
                correlation_time: Some(format!("{correlation_time:e} s")),
                ..Default::default()
            },
            SignalModel::Composite { components } => RawModel {
                kind: "composite".into(),
                components: components.iter().map(RawModel::from_model).collect(),
                ..Default::default()
            },
        }
    }
}

/// Parses and validates a model from TOML text.
pub fn model_from_toml(text: &str) -> Result<SignalModel> {
    let raw: RawModel =
        toml::from_str(text).map_err(|e| Error::Config(format!("noise config: {e}")))?;
    raw.resolve()
}

/// Writes a model in SI units; parses back to an identical model.
pub fn model_to_toml(model: &SignalModel) -> String {
    toml::to_string(&RawModel::from_model(model)).expect("plain string table serializes")
}
