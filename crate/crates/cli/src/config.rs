//! Run configuration: one TOML file per run. Physical quantities carry their
//! units in the file ("-1.2 MHz", "2.3 us", "0.5 /us", "0.5 pi").

use std::path::Path;

use serde::{Deserialize, Serialize};
use snapsim::analysis::rb::RbConfig;
use snapsim::analysis::sweep::SweepAxis;
use snapsim::device::DeviceParams;
use snapsim::protocol::ProtocolConfig;
use snapsim::units::Rate;

use crate::CliError;

fn default_cavity_dim() -> usize {
    5
}

fn plus_x() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cavity_dim")]
    pub cavity_dim: usize,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wigner: Option<WignerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<RbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Logical input state as a Bloch vector.
    #[serde(default = "plus_x")]
    pub input: [f64; 3],
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { input: plus_x() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerSection {
    #[serde(default = "plus_x")]
    pub input: [f64; 3],
    /// Evaluate after the gate (outcome-averaged) instead of on the input.
    #[serde(default)]
    pub after_gate: bool,
    pub extent: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum InterleaveSpec {
    None,
    /// Tomographic channel of the configured protocol.
    Protocol,
    /// Depolarizing channel with decay contribution `p`.
    Depolarizing { p: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbSection {
    pub lengths: Vec<usize>,
    pub n_sequences: usize,
    #[serde(default = "default_floor")]
    pub clifford_error: f64,
    #[serde(default)]
    pub shots: Option<u32>,
    #[serde(default)]
    pub assignment_error: f64,
    pub interleave: InterleaveSpec,
}

fn default_floor() -> f64 {
    0.025
}

impl RbSection {
    pub fn rb_config(&self, seed: u64) -> RbConfig {
        RbConfig {
            lengths: self.lengths.clone(),
            n_sequences: self.n_sequences,
            seed,
            clifford_error: self.clifford_error,
            shots: self.shots,
            assignment_error: self.assignment_error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub rates: Vec<Rate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    /// Bundled graph names or paths to graph JSON files.
    #[serde(default)]
    pub graphs: Vec<String>,
    #[serde(default)]
    pub transparency: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.device.validate()?;
        if let Some(p) = &self.protocol {
            p.validate()?;
        }
        if self.cavity_dim < 5 {
            return Err(CliError::Validation("cavity_dim must be at least 5 for the binomial code".into()));
        }
        Ok(())
    }

    pub fn protocol(&self) -> Result<&ProtocolConfig, CliError> {
        self.protocol.as_ref().ok_or_else(|| CliError::Validation("missing [protocol] section".into()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
