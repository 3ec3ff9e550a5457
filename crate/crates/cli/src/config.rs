//! Serialized run configuration.
//!
//! A `RunConfig` fully determines a run's output apart from the timestamp
//! line. It is written into every output header and can be replayed with
//! `--config`.

use std::path::Path;

use ranksel_core::efficiency::Schedule;
use ranksel_core::extremes::TriangularArraySpec;
use ranksel_core::hconst::Variant;
use ranksel_core::procedures::{SamplingMode, VariancePrior};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub format: Format,
    pub command: CommandConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandConfig {
    Hconst(HconstConfig),
    Pcs(PcsConfig),
    Efficiency(EfficiencyConfig),
    Extremes(TriangularArraySpec),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Hconst(_) => "hconst",
            CommandConfig::Pcs(_) => "pcs",
            CommandConfig::Efficiency(_) => "efficiency",
            CommandConfig::Extremes(_) => "extremes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HconstConfig {
    pub ks: Vec<u64>,
    pub nu: u64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcsConfig {
    pub k: u64,
    pub nu: u64,
    pub p: f64,
    pub delta: f64,
    /// Best mean minus every other mean, in the units of delta.
    pub gap: f64,
    pub variants: Vec<Variant>,
    pub prior: VariancePrior,
    pub replications: u64,
    pub mode: SamplingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyConfig {
    pub schedule: Schedule,
    pub ks: Vec<u64>,
    pub p: f64,
    pub delta: f64,
    pub prior: VariancePrior,
    pub replications: u64,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Reads a bare JSON config, or the config embedded in an output file.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text).map_err(|reason| CliError::Usage(format!("{}: {reason}", path.display())))
    }

    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            if let Ok(config) = serde_json::from_str::<RunConfig>(trimmed) {
                return Ok(config);
            }
        }
        for line in text.lines() {
            if let Some(json) = line.strip_prefix(crate::output::CONFIG_PREFIX) {
                return serde_json::from_str(json).map_err(|e| format!("bad embedded config: {e}"));
            }
            if line.starts_with('{') {
                #[derive(Deserialize)]
                struct Header {
                    config: RunConfig,
                }
                if let Ok(h) = serde_json::from_str::<Header>(line) {
                    return Ok(h.config);
                }
            }
        }
        // Report the JSON error for a bare config if that is what it looked like.
        match serde_json::from_str::<RunConfig>(trimmed) {
            Err(e) if trimmed.starts_with('{') => Err(format!("bad config: {e}")),
            _ => Err("no config found (expected JSON or an output file header)".into()),
        }
    }
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

/// `inverse-gamma:SHAPE,SCALE` (alias `ig`), `lognormal:MU,SIGMA`, `fixed:VARIANCE`.
pub fn parse_prior(text: &str) -> Result<VariancePrior, String> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let args = numbers(rest)?;
    let prior = match (kind, args.as_slice()) {
        ("inverse-gamma" | "ig", &[shape, scale]) => VariancePrior::InverseGamma { shape, scale },
        ("lognormal" | "ln", &[mu, sigma]) => VariancePrior::LogNormal { mu, sigma },
        ("fixed", &[variance]) => VariancePrior::Fixed { variance },
        _ => {
            return Err(format!(
                "unrecognized prior `{text}` (expected inverse-gamma:SHAPE,SCALE, lognormal:MU,SIGMA or fixed:VARIANCE)"
            ))
        }
    };
    prior.validate().map_err(|e| e.to_string())?;
    Ok(prior)
}

/// `constant:N0`, `log[:OFFSET]`, `power:EXPONENT[:OFFSET]`; offsets default to 2.
pub fn parse_schedule(text: &str) -> Result<Schedule, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let int = |s: &str| s.parse::<u64>().map_err(|e| format!("`{s}`: {e}"));
    let float = |s: &str| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    match parts.as_slice() {
        ["constant", n0] => Ok(Schedule::Constant { n0: int(n0)? }),
        ["log"] => Ok(Schedule::Log { offset: 2 }),
        ["log", offset] => Ok(Schedule::Log { offset: int(offset)? }),
        ["power", e] => Ok(Schedule::Power {
            exponent: float(e)?,
            offset: 2,
        }),
        ["power", e, offset] => Ok(Schedule::Power {
            exponent: float(e)?,
            offset: int(offset)?,
        }),
        _ => Err(format!(
            "unrecognized schedule `{text}` (expected constant:N0, log[:OFFSET] or power:EXPONENT[:OFFSET])"
        )),
    }
}
