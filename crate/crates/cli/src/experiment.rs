//! Experiment configuration: a strict, versioned TOML document naming the
//! space, the norms, and one task with its parameters. Unknown keys are
//! rejected so a config reproduces exactly one experiment.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use latsphere::config::{NormSpec, SpaceSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Schema version; must equal [`CONFIG_VERSION`].
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub norms: BTreeMap<String, NormSpec>,
    /// The task to run; subcommands other than `run` supply it from flags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
}

fn default_pairs() -> usize {
    10_000
}

fn default_tuples() -> usize {
    1_000
}

fn default_tuple_size() -> usize {
    3
}

fn default_tol() -> f64 {
    1e-8
}

fn default_ucx_grid() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
}

fn default_tau_grid() -> Vec<f64> {
    vec![0.125, 0.25, 0.5, 1.0]
}

fn default_bins() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.4, 0.8, 1.6]
}

fn default_probe_eps() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantKindSpec {
    Concavity,
    Convexity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    Ucx,
    Smooth,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageKind {
    Mazur,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomeoAction {
    Build,
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomeoMode {
    ViaL1,
    Direct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    MazurVerify {
        norm: String,
        p: f64,
        #[serde(default = "default_pairs")]
        pairs: usize,
    },
    EntropySolve {
        norm: String,
        h: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Midpoint {
        norm: String,
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Constants {
        norm: String,
        constant: ConstantKindSpec,
        exponent: f64,
        #[serde(default = "default_tuples")]
        tuples: usize,
        #[serde(default = "default_tuple_size")]
        tuple_size: usize,
    },
    Modulus {
        curve: CurveKind,
        norm: String,
        #[serde(default)]
        grid: Vec<f64>,
        #[serde(default = "default_pairs")]
        pairs: usize,
        /// Power exponent for `curve = "map"` with `stage = "mazur"`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stage: Option<StageKind>,
    },
    Homeo {
        action: HomeoAction,
        from: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<String>,
        q: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q2: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<HomeoMode>,
        #[serde(default = "default_pairs")]
        pairs: usize,
        #[serde(default)]
        bins: Vec<f64>,
    },
    Probe {
        n: usize,
        #[serde(default = "default_probe_eps")]
        eps: f64,
    },
    DualSupport {
        norm: String,
        x: Vec<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::MazurVerify { .. } => "mazur-verify",
            TaskSpec::EntropySolve { .. } => "entropy-solve",
            TaskSpec::Midpoint { .. } => "midpoint",
            TaskSpec::Constants { .. } => "constants",
            TaskSpec::Modulus { .. } => "modulus",
            TaskSpec::Homeo { .. } => "homeo",
            TaskSpec::Probe { .. } => "probe",
            TaskSpec::DualSupport { .. } => "dual-support",
        }
    }

    pub fn default_grid(curve: CurveKind) -> Vec<f64> {
        match curve {
            CurveKind::Ucx => default_ucx_grid(),
            CurveKind::Smooth => default_tau_grid(),
            CurveKind::Map => default_bins(),
        }
    }

    pub fn default_bins() -> Vec<f64> {
        default_bins()
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        let config: ExperimentConfig = toml::from_str(text)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != CONFIG_VERSION {
            return Err(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        Ok(())
    }

    pub fn to_canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parse a whitespace/comma separated vector of floats; `#` starts a
/// comment that runs to the end of the line.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split(|c: char| c.is_whitespace() || c == ',') {
            if token.is_empty() {
                continue;
            }
            out.push(
                token
                    .parse::<f64>()
                    .map_err(|e| format!("bad number '{token}': {e}"))?,
            );
        }
    }
    if out.is_empty() {
        return Err("no numbers found".into());
    }
    Ok(out)
}
