//! Experiment configuration.
//!
//! One TOML file drives `validate`, `train`, `eval` and `simulate`. Every key
//! has a default reproducing the reference experiment, so an empty file is a
//! valid configuration. `--set a.b=value` overrides are applied to the parsed
//! table before deserialization; values are read as TOML and fall back to a
//! plain string.
//!
//! Training seeds are not free parameters: each network's `train.seed` is
//! derived from the global `seed` when the configuration is resolved.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BeamMask, CsvSchema, Profile, Role};
use crate::error_model::ErrorParams;
use crate::estimators::{LiBeamsNetConfig, MissBeamNetConfig, StrategyTag};
use crate::geometry::BEAM_COUNT;
use crate::seeds::{derive_indexed, derive_seed, Purpose};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected key=value")]
    BadOverride(String),
    #[error("invalid config:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigIssue>),
}

/// One violation, tagged with its dotted key path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub alpha_deg: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { alpha_deg: 20.0 }
    }
}

/// Error-model parameters; the noise seed of each section is derived from the global seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionConfig {
    pub bias: [f64; BEAM_COUNT],
    pub scale: [f64; 3],
    pub noise_std: f64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        let p = ErrorParams::default();
        Self {
            bias: p.bias,
            scale: p.scale,
            noise_std: p.noise_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Number of past complete epochs `N`.
    pub past: usize,
    /// 1-based indices of the missing beams.
    pub missing: Vec<usize>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            past: 3,
            missing: vec![3, 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// `constant`, `sinusoidal-sway` or `turn`.
    pub profile: String,
    /// Velocity of the `constant` profile, m/s.
    pub constant_velocity: [f64; 3],
    pub train_sections: usize,
    pub test_sections: usize,
    /// Samples per section at 1 Hz.
    pub duration_s: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            profile: "sinusoidal-sway".into(),
            constant_velocity: [1.0, 0.0, 0.05],
            train_sections: 11,
            test_sections: 2,
            duration_s: 400,
        }
    }
}

impl SyntheticConfig {
    pub fn profile(&self) -> Result<Profile, String> {
        Ok(match self.profile.parse::<Profile>().map_err(|e| e.to_string())? {
            Profile::Constant { .. } => Profile::Constant {
                velocity: self.constant_velocity,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSection {
    pub path: PathBuf,
    pub role: Role,
    /// Defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl CsvSection {
    pub fn section_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.path.display().to_string())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvConfig {
    pub schema: CsvSchema,
    /// Replace the file's beams by a fresh corruption of its reference velocities.
    pub corrupt: bool,
    pub sections: Vec<CsvSection>,
}

impl Default for CsvConfig {
    fn default() -> Self {
        Self {
            schema: CsvSchema::default(),
            corrupt: true,
            sections: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    pub synthetic: SyntheticConfig,
    pub csv: CsvConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            synthetic: SyntheticConfig::default(),
            csv: CsvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub estimators: Vec<StrategyTag>,
    pub geometry: GeometryConfig,
    pub corruption: CorruptionConfig,
    pub window: WindowConfig,
    pub data: DataConfig,
    pub libeamsnet: LiBeamsNetConfig,
    pub missbeamnet: MissBeamNetConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            seed: 42,
            output_dir: PathBuf::from("out"),
            estimators: vec![StrategyTag::LiBeamsNet, StrategyTag::MissBeamNet, StrategyTag::Average],
            geometry: GeometryConfig::default(),
            corruption: CorruptionConfig::default(),
            window: WindowConfig::default(),
            data: DataConfig::default(),
            libeamsnet: LiBeamsNetConfig::default(),
            missbeamnet: MissBeamNetConfig::default(),
        };
        cfg.derive_train_seeds();
        cfg
    }
}

/// TOML integers are signed; derived seeds keep 63 bits.
fn toml_seed(seed: u64) -> u64 {
    seed >> 1
}

impl ExperimentConfig {
    /// Parses TOML text, applies `overrides`, resolves derived seeds.
    /// Relative CSV paths are taken relative to `base_dir`.
    pub fn from_toml_str(text: &str, overrides: &[String], base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig =
            ExperimentConfig::deserialize(table).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(base) = base_dir {
            for s in &mut cfg.data.csv.sections {
                if s.path.is_relative() {
                    s.path = base.join(&s.path);
                }
            }
        }
        cfg.derive_train_seeds();
        Ok(cfg)
    }

    /// Reads `path` (or the defaults when `None`) and applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml_str(&text, overrides, p.parent())
            }
            None => Self::from_toml_str("", overrides, None),
        }
    }

    fn derive_train_seeds(&mut self) {
        for (train, purpose) in [
            (&mut self.libeamsnet.train, Purpose::LiBeamsNet),
            (&mut self.missbeamnet.train, Purpose::MissBeamNet),
        ] {
            let derived = toml_seed(derive_seed(self.seed, purpose));
            if train.seed != derived && train.seed != 0 {
                log::warn!("train.seed {} replaced by {derived}, derived from the global seed", train.seed);
            }
            train.seed = derived;
        }
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn mask(&self) -> Result<BeamMask, String> {
        BeamMask::from_beam_numbers(&self.window.missing).map_err(|e| e.to_string())
    }

    /// Error-model parameters for the `index`-th section.
    pub fn error_params(&self, index: usize) -> ErrorParams {
        ErrorParams {
            bias: self.corruption.bias,
            scale: self.corruption.scale,
            noise_std: self.corruption.noise_std,
            seed: derive_indexed(self.seed, Purpose::Corruption, index as u64),
        }
    }

    /// Trajectory seed of the `index`-th synthetic section.
    pub fn synthesis_seed(&self, index: usize) -> u64 {
        derive_indexed(self.seed, Purpose::Synthesis, index as u64)
    }

    pub fn neural_estimators(&self) -> impl Iterator<Item = StrategyTag> + '_ {
        self.estimators.iter().copied().filter(|t| *t != StrategyTag::Average)
    }

    /// Every violation found, each naming its key.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |key: &str, message: String| {
            out.push(ConfigIssue {
                key: key.to_string(),
                message,
            })
        };
        if self.seed > i64::MAX as u64 {
            bad("seed", "must fit in a signed 64-bit integer".into());
        }
        let a = self.geometry.alpha_deg;
        if !(a > 0.0 && a < 90.0) {
            bad("geometry.alpha_deg", format!("{a} must lie strictly between 0 and 90"));
        }
        if self.corruption.bias.iter().any(|b| !b.is_finite()) {
            bad("corruption.bias", "values must be finite".into());
        }
        if self.corruption.scale.iter().any(|s| !(s.is_finite() && *s > -1.0)) {
            bad("corruption.scale", "values must be finite and greater than -1".into());
        }
        let n = self.corruption.noise_std;
        if !(n.is_finite() && n >= 0.0) {
            bad("corruption.noise_std", format!("{n} must be finite and non-negative"));
        }
        if self.window.past < 1 {
            bad("window.past", "must be at least 1".into());
        }
        let distinct: BTreeSet<_> = self.window.missing.iter().collect();
        if self.window.missing.len() != 2 || distinct.len() != 2 {
            bad(
                "window.missing",
                format!("exactly two distinct missing beams are required, got {:?}", self.window.missing),
            );
        } else if let Err(e) = self.mask() {
            bad("window.missing", e);
        }
        if self.estimators.is_empty() {
            bad("estimators", "at least one estimator is required".into());
        }
        if self.estimators.iter().collect::<BTreeSet<_>>().len() != self.estimators.len() {
            bad("estimators", "duplicate entries".into());
        }

        let lib = &self.libeamsnet;
        if lib.filters < 1 {
            bad("libeamsnet.filters", "must be at least 1".into());
        }
        if lib.kernel < 1 || lib.kernel > self.window.past {
            bad("libeamsnet.kernel", format!("must lie in [1, window.past = {}]", self.window.past));
        }
        if !(0.0..1.0).contains(&lib.dropout) {
            bad("libeamsnet.dropout", "must lie in [0, 1)".into());
        }
        if lib.hidden.contains(&0) {
            bad("libeamsnet.hidden", "layer widths must be positive".into());
        }
        if let Err(e) = lib.train.validate() {
            bad("libeamsnet.train", e.to_string());
        }
        if self.missbeamnet.hidden < 1 {
            bad("missbeamnet.hidden", "must be at least 1".into());
        }
        if let Err(e) = self.missbeamnet.train.validate() {
            bad("missbeamnet.train", e.to_string());
        }

        let needs_training = self.neural_estimators().next().is_some();
        match self.data.source {
            DataSource::Synthetic => {
                let s = &self.data.synthetic;
                if let Err(e) = s.profile() {
                    bad("data.synthetic.profile", e);
                }
                if s.duration_s < 10 || s.duration_s <= self.window.past {
                    bad(
                        "data.synthetic.duration_s",
                        format!("must be at least 10 and exceed window.past ({})", self.window.past),
                    );
                }
                if needs_training && s.train_sections < 1 {
                    bad("data.synthetic.train_sections", "neural estimators need at least one".into());
                }
                if s.test_sections < 1 {
                    bad("data.synthetic.test_sections", "must be at least 1".into());
                }
            }
            DataSource::Csv => {
                let c = &self.data.csv;
                if c.sections.is_empty() {
                    bad("data.csv.sections", "no sections listed".into());
                }
                let mut names = BTreeSet::new();
                for (i, s) in c.sections.iter().enumerate() {
                    if !s.path.is_file() {
                        bad(&format!("data.csv.sections[{i}].path"), format!("{} does not exist", s.path.display()));
                    }
                    if !names.insert(s.section_name()) {
                        bad(&format!("data.csv.sections[{i}].name"), format!("duplicate section `{}`", s.section_name()));
                    }
                }
                if !c.sections.is_empty() {
                    if needs_training && !c.sections.iter().any(|s| s.role == Role::Train) {
                        bad("data.csv.sections", "neural estimators need a train section".into());
                    }
                    if !c.sections.iter().any(|s| s.role == Role::Test) {
                        bad("data.csv.sections", "at least one test section is required".into());
                    }
                }
                if !c.corrupt && c.schema.beams.is_none() {
                    bad("data.csv.corrupt", "false requires beam columns in data.csv.schema.beams".into());
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(spec.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError::BadOverride(spec.to_string()));
    }
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::BadOverride(format!("{spec}: `{part}` is not a table")))?;
    }
    log::info!("override {key} = {value}");
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
