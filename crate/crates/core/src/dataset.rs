//! Recorded and synthetic DVL sections, corruption into unit-under-test
//! measurements, and sliding windows for the missing-beam regressors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_model::{corrupt_series, ErrorModelError, ErrorParams};
use crate::geometry::{project_to_beams, BeamGeometry, BeamVelocities, DvlVelocity, BEAM_COUNT};

/// Largest velocity magnitude produced by [`synth_trajectory`], m/s.
pub const MAX_SYNTH_SPEED: f64 = 3.0;
/// Largest per-sample velocity change produced by [`synth_trajectory`], m/s.
pub const MAX_SYNTH_STEP: f64 = 0.2;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: PathBuf, column: String },
    #[error("{file}: row {row}: time {time} does not increase past the previous row")]
    NonMonotonicTime { file: PathBuf, row: u64, time: f64 },
    #[error("{file}: row {row}: {message}")]
    ParseError {
        file: PathBuf,
        row: u64,
        message: String,
    },
    #[error("{file}: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("section `{name}` has {len} records, need more than the window length {window}")]
    SectionTooShort { name: String, len: usize, window: usize },
    #[error("missing-beam mask with {missing} missing beams is unsupported (1 or 2 required)")]
    MaskUnsupported { missing: usize },
    #[error("beam index {index} out of range 1..=4")]
    BadBeamIndex { index: usize },
    #[error("unknown trajectory profile `{0}` (expected constant, sinusoidal-sway or turn)")]
    BadProfile(String),
    #[error("trajectory duration {0} s is below the 10 s minimum")]
    DurationTooShort(usize),
    #[error("section `{0}` is assigned more than once")]
    OverlappingAssignment(String),
    #[error("section `{0}` has no role assignment")]
    UnassignedSection(String),
    #[error("assignment names unknown section `{0}`")]
    UnknownSection(String),
    #[error(transparent)]
    Corruption(#[from] ErrorModelError),
}

/// One DVL epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamRecord {
    /// Seconds.
    pub t: f64,
    pub beams: BeamVelocities,
    pub v_true: DvlVelocity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub records: Vec<BeamRecord>,
}

impl Section {
    /// Builds a 1 Hz section whose beams are the corrupted projections of `velocities`.
    pub fn from_velocities(
        name: impl Into<String>,
        velocities: &[DvlVelocity],
        geom: &BeamGeometry,
        params: &ErrorParams,
    ) -> Result<Self, DatasetError> {
        let beams = corrupt_series(geom, velocities, params)?;
        let records = velocities
            .iter()
            .zip(beams)
            .enumerate()
            .map(|(k, (v, b))| BeamRecord {
                t: k as f64,
                beams: b,
                v_true: *v,
            })
            .collect();
        Ok(Self {
            name: name.into(),
            records,
        })
    }

    /// Replaces the beams with a fresh corruption of the reference velocities.
    pub fn corrupted(&self, geom: &BeamGeometry, params: &ErrorParams) -> Result<Self, DatasetError> {
        let velocities: Vec<_> = self.records.iter().map(|r| r.v_true).collect();
        let beams = corrupt_series(geom, &velocities, params)?;
        let records = self
            .records
            .iter()
            .zip(beams)
            .map(|(r, b)| BeamRecord { beams: b, ..r.clone() })
            .collect();
        Ok(Self {
            name: self.name.clone(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Column mapping for DVL CSV files.
///
/// The default follows the layout written by the `simulate` command:
/// `time, beam_1..beam_4, v_x, v_y, v_z`. When `beams` is `None` the file
/// only carries reference velocities and the beams are the ideal projection
/// (the experiment pipeline corrupts them afterwards). In config files that
/// case is written `beams = []`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub time: String,
    #[serde(with = "beam_columns")]
    pub beams: Option<[String; BEAM_COUNT]>,
    pub velocity: [String; 3],
    pub delimiter: char,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            time: "time".into(),
            beams: Some(["beam_1", "beam_2", "beam_3", "beam_4"].map(String::from)),
            velocity: ["v_x", "v_y", "v_z"].map(String::from),
            delimiter: ',',
        }
    }
}

mod beam_columns {
    use super::BEAM_COUNT;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<[String; BEAM_COUNT]>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(cols) => cols.serialize(s),
            None => Vec::<String>::new().serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[String; BEAM_COUNT]>, D::Error> {
        let cols = Vec::<String>::deserialize(d)?;
        match cols.len() {
            0 => Ok(None),
            BEAM_COUNT => Ok(Some(cols.try_into().expect("length checked"))),
            n => Err(D::Error::custom(format!("beams lists {n} columns, expected 0 or {BEAM_COUNT}"))),
        }
    }
}

/// Reads one section from a CSV file.
///
/// `geom` is only used when the schema has no beam columns.
pub fn load_csv(path: &Path, schema: &CsvSchema, geom: &BeamGeometry) -> Result<Section, DatasetError> {
    let file = path.to_path_buf();
    let io = |source| DatasetError::Io {
        file: file.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io)?;
    let headers = reader.headers().map_err(io)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn {
                file: file.clone(),
                column: name.to_string(),
            })
    };
    let time_col = column(&schema.time)?;
    let beam_cols = match &schema.beams {
        Some(names) => Some([
            column(&names[0])?,
            column(&names[1])?,
            column(&names[2])?,
            column(&names[3])?,
        ]),
        None => None,
    };
    let vel_cols = [
        column(&schema.velocity[0])?,
        column(&schema.velocity[1])?,
        column(&schema.velocity[2])?,
    ];

    let mut records: Vec<BeamRecord> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(io)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize, name: &str| -> Result<f64, DatasetError> {
            let raw = row.get(col).unwrap_or("");
            let value: f64 = raw.parse().map_err(|_| DatasetError::ParseError {
                file: file.clone(),
                row: line,
                message: format!("column `{name}`: cannot parse `{raw}` as a number"),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::ParseError {
                    file: file.clone(),
                    row: line,
                    message: format!("column `{name}`: non-finite value `{raw}`"),
                });
            }
            Ok(value)
        };
        let t = field(time_col, &schema.time)?;
        let v_true = DvlVelocity([
            field(vel_cols[0], &schema.velocity[0])?,
            field(vel_cols[1], &schema.velocity[1])?,
            field(vel_cols[2], &schema.velocity[2])?,
        ]);
        let beams = match (&beam_cols, &schema.beams) {
            (Some(cols), Some(names)) => {
                let mut b = [0.0; BEAM_COUNT];
                for i in 0..BEAM_COUNT {
                    b[i] = field(cols[i], &names[i])?;
                }
                BeamVelocities(b)
            }
            _ => project_to_beams(geom, &v_true),
        };
        if let Some(prev) = records.last() {
            if t <= prev.t {
                return Err(DatasetError::NonMonotonicTime {
                    file,
                    row: line,
                    time: t,
                });
            }
        }
        records.push(BeamRecord { t, beams, v_true });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Section { name, records })
}

/// Writes a section in the default [`CsvSchema`] layout with round-trip exact floats.
pub fn write_csv(path: &Path, section: &Section) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        file: path.to_path_buf(),
        source,
    };
    let schema = CsvSchema::default();
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let beams = schema.beams.expect("default schema has beam columns");
    let mut header = vec![schema.time.clone()];
    header.extend(beams.iter().cloned());
    header.extend(schema.velocity.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for r in &section.records {
        let mut row = vec![r.t.to_string()];
        row.extend(r.beams.0.iter().map(f64::to_string));
        row.extend(r.v_true.0.iter().map(f64::to_string));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))
}

/// Set of unavailable beams at the current epoch (`true` = missing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BeamMask([bool; BEAM_COUNT]);

impl BeamMask {
    /// Validates a raw mask; one or two missing beams are supported.
    pub fn new(missing: [bool; BEAM_COUNT]) -> Result<Self, DatasetError> {
        let count = missing.iter().filter(|m| **m).count();
        if !(1..=2).contains(&count) {
            return Err(DatasetError::MaskUnsupported { missing: count });
        }
        Ok(Self(missing))
    }

    /// Builds a mask from 1-based beam numbers.
    pub fn from_beam_numbers(numbers: &[usize]) -> Result<Self, DatasetError> {
        let mut missing = [false; BEAM_COUNT];
        for &n in numbers {
            if !(1..=BEAM_COUNT).contains(&n) {
                return Err(DatasetError::BadBeamIndex { index: n });
            }
            missing[n - 1] = true;
        }
        if numbers.len() != missing.iter().filter(|m| **m).count() {
            return Err(DatasetError::MaskUnsupported {
                missing: numbers.len(),
            });
        }
        Self::new(missing)
    }

    pub fn missing(&self) -> &[bool; BEAM_COUNT] {
        &self.0
    }

    pub fn active(&self) -> [bool; BEAM_COUNT] {
        self.0.map(|m| !m)
    }

    /// 0-based indices of the missing beams, ascending.
    pub fn missing_indices(&self) -> Vec<usize> {
        (0..BEAM_COUNT).filter(|&i| self.0[i]).collect()
    }

    /// 0-based indices of the available beams, ascending.
    pub fn available_indices(&self) -> Vec<usize> {
        (0..BEAM_COUNT).filter(|&i| !self.0[i]).collect()
    }

    pub fn missing_count(&self) -> usize {
        self.missing_indices().len()
    }

    /// 1-based beam numbers of the missing beams.
    pub fn beam_numbers(&self) -> Vec<usize> {
        self.missing_indices().into_iter().map(|i| i + 1).collect()
    }
}

impl Default for BeamMask {
    /// Beams 3 and 4 missing.
    fn default() -> Self {
        Self([false, false, true, true])
    }
}

impl fmt::Display for BeamMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nums: Vec<String> = self.beam_numbers().iter().map(|n| n.to_string()).collect();
        write!(f, "{{{}}}", nums.join(","))
    }
}

/// Past window plus the partial current epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub section: Arc<str>,
    /// Timestamps of the past rows followed by the current epoch.
    pub times: Vec<f64>,
    /// `N` complete past measurements, oldest first.
    pub past: Vec<[f64; BEAM_COUNT]>,
    /// Available beams at the current epoch, ascending beam order.
    pub current_available: Vec<f64>,
    pub missing_mask: BeamMask,
    /// True values of the missing beams, ascending beam order.
    pub target_missing: Vec<f64>,
    pub target_all: [f64; BEAM_COUNT],
    pub v_true_t: DvlVelocity,
}

impl WindowSample {
    pub fn window(&self) -> usize {
        self.past.len()
    }
}

/// Slides a stride-1 window of `n` past epochs over `section`.
pub fn make_windows(section: &Section, n: usize, mask: BeamMask) -> Result<Vec<WindowSample>, DatasetError> {
    BeamMask::new(mask.0)?;
    if n == 0 || section.len() <= n {
        return Err(DatasetError::SectionTooShort {
            name: section.name.clone(),
            len: section.len(),
            window: n,
        });
    }
    let name: Arc<str> = Arc::from(section.name.as_str());
    let missing = mask.missing_indices();
    let available = mask.available_indices();
    let recs = &section.records;
    Ok((n..recs.len())
        .map(|t| {
            let current = &recs[t];
            WindowSample {
                section: name.clone(),
                times: recs[t - n..=t].iter().map(|r| r.t).collect(),
                past: recs[t - n..t].iter().map(|r| r.beams.0).collect(),
                current_available: available.iter().map(|&i| current.beams.0[i]).collect(),
                missing_mask: mask,
                target_missing: missing.iter().map(|&i| current.beams.0[i]).collect(),
                target_all: current.beams.0,
                v_true_t: current.v_true,
            }
        })
        .collect())
}

/// Synthetic ground-truth velocity profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant { velocity: [f64; 3] },
    SinusoidalSway,
    Turn,
}

impl FromStr for Profile {
    type Err = DatasetError;

    /// `constant` uses `[1, 0, 0.05]` m/s.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Profile::Constant {
                velocity: [1.0, 0.0, 0.05],
            }),
            "sinusoidal-sway" => Ok(Profile::SinusoidalSway),
            "turn" => Ok(Profile::Turn),
            other => Err(DatasetError::BadProfile(other.to_string())),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Constant { .. } => "constant",
            Profile::SinusoidalSway => "sinusoidal-sway",
            Profile::Turn => "turn",
        })
    }
}

struct Harmonic {
    offset: f64,
    amplitude: f64,
    period: f64,
    phase: f64,
}

impl Harmonic {
    fn draw(rng: &mut ChaCha8Rng, offset: (f64, f64), amplitude: (f64, f64), period: (f64, f64)) -> Self {
        Self {
            offset: rng.random_range(offset.0..=offset.1),
            amplitude: rng.random_range(amplitude.0..=amplitude.1),
            period: rng.random_range(period.0..=period.1),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.offset + self.amplitude * (std::f64::consts::TAU * t / self.period + self.phase).sin()
    }
}

/// 1 Hz ground-truth velocity series for desk-scale experiments.
///
/// Amplitudes and periods are bounded so that `|v| ≤ 3 m/s` and
/// `|v(t+1) − v(t)| ≤ 0.2 m/s` for every seed.
pub fn synth_trajectory(profile: Profile, duration_s: usize, seed: u64) -> Result<Vec<DvlVelocity>, DatasetError> {
    if duration_s < 10 {
        return Err(DatasetError::DurationTooShort(duration_s));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out: Vec<DvlVelocity> = match profile {
        Profile::Constant { velocity } => vec![DvlVelocity(velocity); duration_s],
        Profile::SinusoidalSway => {
            // per-step change ≤ 2π·(0.5/40, 0.6/30, 0.2/30) in norm < 0.16
            let surge = Harmonic::draw(&mut rng, (1.0, 2.0), (0.1, 0.5), (40.0, 120.0));
            let sway = Harmonic::draw(&mut rng, (-0.1, 0.1), (0.2, 0.6), (30.0, 80.0));
            let heave = Harmonic::draw(&mut rng, (-0.1, 0.1), (0.05, 0.2), (30.0, 90.0));
            (0..duration_s)
                .map(|k| {
                    let t = k as f64;
                    DvlVelocity([surge.at(t), sway.at(t), heave.at(t)])
                })
                .collect()
        }
        Profile::Turn => {
            let cruise = rng.random_range(1.0..=2.0);
            let heave = Harmonic::draw(&mut rng, (-0.05, 0.05), (0.02, 0.1), (40.0, 90.0));
            // alternating straight and turning legs; the turn intensity follows a half sine
            let mut intensity = vec![0.0; duration_s];
            let mut start = 0usize;
            let mut turning = false;
            while start < duration_s {
                let len = rng.random_range(40..=80usize);
                if turning {
                    let peak = rng.random_range(-1.0..=1.0);
                    for (j, slot) in intensity.iter_mut().skip(start).take(len).enumerate() {
                        *slot = peak * (std::f64::consts::PI * j as f64 / len as f64).sin();
                    }
                }
                start += len;
                turning = !turning;
            }
            intensity
                .iter()
                .enumerate()
                .map(|(k, s)| DvlVelocity([cruise - 0.3 * s.abs(), 0.4 * s, heave.at(k as f64)]))
                .collect()
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionSet {
    pub sections: Vec<(Section, Role)>,
    /// Non-fatal issues, e.g. an empty test split.
    pub warnings: Vec<String>,
}

impl SectionSet {
    pub fn with_role(&self, role: Role) -> impl Iterator<Item = &Section> {
        self.sections.iter().filter(move |(_, r)| *r == role).map(|(s, _)| s)
    }
}

/// Tags every section with exactly one role.
pub fn split_sections(sections: Vec<Section>, assignment: &[(String, Role)]) -> Result<SectionSet, DatasetError> {
    let names: BTreeSet<&str> = sections.iter().map(|s| s.name.as_str()).collect();
    let mut roles: BTreeMap<&str, Role> = BTreeMap::new();
    for (name, role) in assignment {
        if !names.contains(name.as_str()) {
            return Err(DatasetError::UnknownSection(name.clone()));
        }
        if roles.insert(name.as_str(), *role).is_some() {
            return Err(DatasetError::OverlappingAssignment(name.clone()));
        }
    }
    let mut tagged = Vec::with_capacity(sections.len());
    for s in &sections {
        let role = *roles
            .get(s.name.as_str())
            .ok_or_else(|| DatasetError::UnassignedSection(s.name.clone()))?;
        tagged.push(role);
    }
    let mut warnings = Vec::new();
    if !tagged.contains(&Role::Test) {
        warnings.push("no test sections assigned; test losses and evaluation will be empty".to_string());
    }
    if !tagged.contains(&Role::Train) {
        warnings.push("no train sections assigned".to_string());
    }
    Ok(SectionSet {
        sections: sections.into_iter().zip(tagged).collect(),
        warnings,
    })
}
