//! Config-driven experiment commands and their output layout.
//!
//! ```text
//! <out>/resolved_config.toml
//! <out>/checkpoints/<estimator>.ckpt
//! <out>/losses/loss_<estimator>.csv      epoch,train_loss,test_loss
//! <out>/reports/report.txt               table, per-section RMSE, embedded config
//! <out>/reports/report.csv               pooled metrics, one column per strategy
//! <out>/reports/sections.csv             per-section metrics
//! <out>/reports/beams.csv                per-beam RMSE of the missing beams
//! <out>/data/<section>.csv               written by `simulate`
//! ```
//!
//! Metrics are computed on velocity norms pooled over every test window.
//! The reference norm of a window is the least-squares velocity from all
//! four corrupted beams of its current epoch.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, ConfigIssue, DataSource, ExperimentConfig};
use crate::dataset::{
    load_csv, make_windows, split_sections, synth_trajectory, write_csv, DatasetError, Role, Section, SectionSet,
    WindowSample,
};
use crate::estimators::{
    load_estimator, recover_velocity, save_estimator, train, EstimatorError, EstimatorKind, NetworkConfig, StrategyTag,
};
use crate::geometry::{solve_velocity, BeamGeometry, GeometryError, BEAM_COUNT};
use crate::metrics::{format_sig9, EvalReport, MetricRow, MetricsError, NormSeries};
use crate::nn::LossHistory;

/// Column title of the upper-bound strategy that predicts the true missing beams.
pub const ORACLE: &str = "Oracle";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error("training {name}: {source}")]
    Training {
        name: StrategyTag,
        #[source]
        source: EstimatorError,
    },
    #[error("{0}")]
    Model(String),
    #[error("evaluation: {0}")]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// Process exit code: 2 config, 3 data, 4 training, 5 evaluation or model mismatch, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(ConfigError::Io { .. }) => 1,
            ExperimentError::Config(_) => 2,
            ExperimentError::Data(_) => 3,
            ExperimentError::Training { .. } => 4,
            ExperimentError::Model(_) | ExperimentError::Metrics(_) => 5,
            ExperimentError::Geometry(_) => 3,
            ExperimentError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

pub fn checkpoint_path(out: &Path, tag: StrategyTag) -> PathBuf {
    out.join("checkpoints").join(format!("{}.ckpt", tag.key()))
}

pub fn loss_path(out: &Path, tag: StrategyTag) -> PathBuf {
    out.join("losses").join(format!("loss_{}.csv", tag.key()))
}

pub fn report_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

fn geometry(cfg: &ExperimentConfig) -> Result<BeamGeometry, ExperimentError> {
    Ok(BeamGeometry::from_degrees(cfg.geometry.alpha_deg)?)
}

/// Every violation of the configuration; empty when it is valid.
pub fn cmd_validate(cfg: &ExperimentConfig) -> Vec<ConfigIssue> {
    cfg.issues()
}

/// Synthetic or loaded sections, corrupted and tagged with their roles.
pub fn build_sections(cfg: &ExperimentConfig) -> Result<SectionSet, ExperimentError> {
    cfg.validate()?;
    let geom = geometry(cfg)?;
    let mut sections = Vec::new();
    let mut roles = Vec::new();
    match cfg.data.source {
        DataSource::Synthetic => {
            let s = &cfg.data.synthetic;
            let profile = s.profile().map_err(|_| DatasetError::BadProfile(s.profile.clone()))?;
            let plan = (0..s.train_sections)
                .map(|k| (format!("train_{:02}", k + 1), Role::Train))
                .chain((0..s.test_sections).map(|k| (format!("test_{:02}", k + 1), Role::Test)));
            for (index, (name, role)) in plan.enumerate() {
                let velocities = synth_trajectory(profile, s.duration_s, cfg.synthesis_seed(index))?;
                sections.push(Section::from_velocities(name.clone(), &velocities, &geom, &cfg.error_params(index))?);
                roles.push((name, role));
            }
        }
        DataSource::Csv => {
            let c = &cfg.data.csv;
            for (index, entry) in c.sections.iter().enumerate() {
                let mut section = load_csv(&entry.path, &c.schema, &geom)?;
                section.name = entry.section_name();
                if c.corrupt {
                    section = section.corrupted(&geom, &cfg.error_params(index))?;
                }
                roles.push((section.name.clone(), entry.role));
                sections.push(section);
            }
        }
    }
    let set = split_sections(sections, &roles)?;
    for w in &set.warnings {
        log::warn!("{w}");
    }
    Ok(set)
}

/// Windows of every section with `role`, in section order.
pub fn pooled_windows(cfg: &ExperimentConfig, set: &SectionSet, role: Role) -> Result<Vec<WindowSample>, ExperimentError> {
    let mask = cfg.mask().map_err(|m| ConfigError::Invalid(vec![ConfigIssue { key: "window.missing".into(), message: m }]))?;
    let mut out = Vec::new();
    for s in set.with_role(role) {
        out.extend(make_windows(s, cfg.window.past, mask)?);
    }
    Ok(out)
}

fn network_config(cfg: &ExperimentConfig, tag: StrategyTag) -> NetworkConfig {
    match tag {
        StrategyTag::LiBeamsNet => NetworkConfig::LiBeamsNet(cfg.libeamsnet.clone()),
        StrategyTag::MissBeamNet => NetworkConfig::MissBeamNet(cfg.missbeamnet.clone()),
        StrategyTag::Average => unreachable!("average is not trained"),
    }
}

pub fn loss_csv(history: &LossHistory) -> String {
    let mut out = String::from("epoch,train_loss,test_loss\n");
    for e in &history.0 {
        let _ = writeln!(out, "{},{},{}", e.epoch, format_sig9(e.train_loss), format_sig9(e.test_loss));
    }
    out
}

pub struct TrainedModel {
    pub model: EstimatorKind,
    pub history: LossHistory,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
}

/// Trains every configured network and writes checkpoints, loss CSVs and the resolved config.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<TrainedModel>, ExperimentError> {
    let set = build_sections(cfg)?;
    let train_windows = pooled_windows(cfg, &set, Role::Train)?;
    let test_windows = pooled_windows(cfg, &set, Role::Test)?;
    let out = &cfg.output_dir;
    write_file(&out.join("resolved_config.toml"), &cfg.to_toml())?;
    let mut trained = Vec::new();
    for tag in cfg.neural_estimators() {
        log::info!("training {tag} on {} windows", train_windows.len());
        let (model, history) = train(&network_config(cfg, tag), &train_windows, &test_windows)
            .map_err(|source| ExperimentError::Training { name: tag, source })?;
        let checkpoint = checkpoint_path(out, tag);
        if let Some(dir) = checkpoint.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        save_estimator(&checkpoint, &model).map_err(|e| ExperimentError::Model(e.to_string()))?;
        let losses = loss_path(out, tag);
        write_file(&losses, &loss_csv(&history))?;
        trained.push(TrainedModel {
            model,
            history,
            checkpoint,
            loss_csv: losses,
        });
    }
    Ok(trained)
}

/// Pooled and per-section comparison of all strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pooled: EvalReport,
    /// `(section, report)`; a section whose metrics are undefined carries the reason instead.
    pub sections: Vec<(String, Result<EvalReport, MetricsError>)>,
    /// Diagnostic RMSE of each predicted missing beam: `(strategy, [(beam number, rmse)])`.
    pub beam_rmse: Vec<(String, Vec<(usize, f64)>)>,
    pub windows: usize,
}

fn beam_rmse(windows: &[WindowSample], predictions: &[Vec<f64>]) -> Vec<(usize, f64)> {
    let Some(first) = windows.first() else {
        return Vec::new();
    };
    first
        .missing_mask
        .beam_numbers()
        .into_iter()
        .enumerate()
        .map(|(k, beam)| {
            let sq: f64 = windows
                .iter()
                .zip(predictions)
                .map(|(w, p)| (w.target_missing[k] - p[k]).powi(2))
                .sum();
            (beam, (sq / windows.len() as f64).sqrt())
        })
        .collect()
}

/// Velocity norms: reference first, then one series per strategy.
fn norms(
    geom: &BeamGeometry,
    windows: &[WindowSample],
    strategies: &[(String, Vec<Vec<f64>>)],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), ExperimentError> {
    let truth = windows
        .iter()
        .map(|w| solve_velocity(geom, &w.target_all, &[true; BEAM_COUNT]).map(|v| v.norm()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut preds = Vec::with_capacity(strategies.len());
    for (_, p) in strategies {
        let series = windows
            .iter()
            .zip(p)
            .map(|(w, p)| recover_velocity(geom, w, p).map(|v| v.norm()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExperimentError::Model(e.to_string()))?;
        preds.push(series);
    }
    Ok((truth, preds))
}

fn report(names: &[String], truth: &[f64], preds: &[Vec<f64>]) -> Result<EvalReport, MetricsError> {
    let t = NormSeries::new(truth.to_vec())?;
    let mut rows = Vec::with_capacity(names.len());
    for (name, p) in names.iter().zip(preds) {
        rows.push((name.clone(), MetricRow::compute(&t, &NormSeries::new(p.clone())?)?));
    }
    EvalReport::new(rows, StrategyTag::Average.title())
}

/// Scores `models` (plus the average estimator, and the oracle when asked) on the test windows.
pub fn evaluate(
    cfg: &ExperimentConfig,
    test_windows: &[WindowSample],
    models: &[EstimatorKind],
    oracle: bool,
) -> Result<Evaluation, ExperimentError> {
    let geom = geometry(cfg)?;
    let mut strategies: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for tag in &cfg.estimators {
        let predictions = match tag {
            StrategyTag::Average => EstimatorKind::Average.predict_missing(test_windows),
            _ => models
                .iter()
                .find(|m| m.tag() == *tag)
                .ok_or_else(|| ExperimentError::Model(format!("no model for {tag}")))?
                .predict_missing(test_windows),
        }
        .map_err(|e| ExperimentError::Model(e.to_string()))?;
        strategies.push((tag.title().to_string(), predictions));
    }
    if !cfg.estimators.contains(&StrategyTag::Average) {
        strategies.push((
            StrategyTag::Average.title().to_string(),
            EstimatorKind::Average
                .predict_missing(test_windows)
                .map_err(|e| ExperimentError::Model(e.to_string()))?,
        ));
    }
    if oracle {
        strategies.push((ORACLE.to_string(), test_windows.iter().map(|w| w.target_missing.clone()).collect()));
    }
    let names: Vec<String> = strategies.iter().map(|(n, _)| n.clone()).collect();
    let beams = strategies
        .iter()
        .map(|(n, p)| (n.clone(), beam_rmse(test_windows, p)))
        .collect();
    let (truth, preds) = norms(&geom, test_windows, &strategies)?;
    let pooled = report(&names, &truth, &preds)?;

    let mut sections = Vec::new();
    let mut start = 0;
    while start < test_windows.len() {
        let name = test_windows[start].section.clone();
        let end = start + test_windows[start..].iter().take_while(|w| w.section == name).count();
        let slice: Vec<Vec<f64>> = preds.iter().map(|p| p[start..end].to_vec()).collect();
        sections.push((name.to_string(), report(&names, &truth[start..end], &slice)));
        start = end;
    }
    Ok(Evaluation {
        pooled,
        sections,
        beam_rmse: beams,
        windows: test_windows.len(),
    })
}

fn beams_csv(eval: &Evaluation) -> String {
    let mut out = String::from("strategy,beam,rmse_mps\n");
    for (name, beams) in &eval.beam_rmse {
        for (b, r) in beams {
            let _ = writeln!(out, "{name},{b},{}", format_sig9(*r));
        }
    }
    out
}

fn sections_csv(eval: &Evaluation) -> String {
    let mut out = String::from("section,strategy,rmse_mps,mae_mps,r2,vaf\n");
    for (name, r) in &eval.sections {
        if let Ok(r) = r {
            for s in &r.strategies {
                let m = &s.metrics;
                let _ = writeln!(
                    out,
                    "{name},{},{},{},{},{}",
                    s.name,
                    format_sig9(m.rmse),
                    format_sig9(m.mae),
                    format_sig9(m.r2),
                    format_sig9(m.vaf)
                );
            }
        }
    }
    out
}

/// Human-readable report: pooled table, per-section RMSE, resolved config.
pub fn report_text(cfg: &ExperimentConfig, eval: &Evaluation) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Missing beams {} with N = {} past epochs; {} test windows.\n",
        cfg.mask().map(|m| m.to_string()).unwrap_or_default(),
        cfg.window.past,
        eval.windows
    );
    out.push_str(&eval.pooled.to_table());
    out.push_str("\nRMSE [m/s] per test section\n");
    for (name, r) in &eval.sections {
        match r {
            Ok(r) => {
                let cells: Vec<String> = r
                    .strategies
                    .iter()
                    .map(|s| format!("{} {:.6}", s.name, s.metrics.rmse))
                    .collect();
                let _ = writeln!(out, "  {name}: {}", cells.join(", "));
            }
            Err(e) => {
                let _ = writeln!(out, "  {name}: undefined ({e})");
            }
        }
    }
    out.push_str("\nRMSE [m/s] per missing beam (diagnostic)\n");
    for (name, beams) in &eval.beam_rmse {
        let cells: Vec<String> = beams.iter().map(|(b, r)| format!("beam {b} {r:.6}")).collect();
        let _ = writeln!(out, "  {name}: {}", cells.join(", "));
    }
    let _ = writeln!(out, "\nSeeds: global {}, libeamsnet {}, missbeamnet {}; corruption per section:", cfg.seed, cfg.libeamsnet.train.seed, cfg.missbeamnet.train.seed);
    let count = match cfg.data.source {
        DataSource::Synthetic => cfg.data.synthetic.train_sections + cfg.data.synthetic.test_sections,
        DataSource::Csv => cfg.data.csv.sections.len(),
    };
    let seeds: Vec<String> = (0..count).map(|i| cfg.error_params(i).seed.to_string()).collect();
    let _ = writeln!(out, "  {}", seeds.join(" "));
    out.push_str("\n# Resolved configuration\n");
    out.push_str(&cfg.to_toml());
    out
}

/// Loads the checkpoint of every configured network and checks it against the config.
pub fn load_models(cfg: &ExperimentConfig, paths: &[PathBuf]) -> Result<Vec<EstimatorKind>, ExperimentError> {
    let mask = cfg.mask().map_err(|m| ConfigError::Invalid(vec![ConfigIssue { key: "window.missing".into(), message: m }]))?;
    let mut loaded = Vec::new();
    for path in paths {
        if !path.is_file() {
            return Err(ExperimentError::Model(format!("missing checkpoint {}", path.display())));
        }
        let model = load_estimator(path).map_err(|e: EstimatorError| ExperimentError::Model(format!("{}: {e}", path.display())))?;
        let m = model.model().expect("networks only");
        if m.mask != mask || m.window != cfg.window.past {
            return Err(ExperimentError::Model(format!(
                "{}: model mismatch, checkpoint has window {} / mask {}, config has {} / {}",
                path.display(),
                m.window,
                m.mask,
                cfg.window.past,
                mask
            )));
        }
        loaded.push(model);
    }
    for tag in cfg.neural_estimators() {
        if !loaded.iter().any(|m| m.tag() == tag) {
            return Err(ExperimentError::Model(format!(
                "missing checkpoint for {tag} (expected {})",
                checkpoint_path(&cfg.output_dir, tag).display()
            )));
        }
    }
    Ok(loaded)
}

/// Evaluates all strategies and writes the files under `<out>/reports/`.
///
/// With no explicit `checkpoints`, each network is read from `<out>/checkpoints/`.
pub fn cmd_eval(cfg: &ExperimentConfig, checkpoints: &[PathBuf], oracle: bool) -> Result<Evaluation, ExperimentError> {
    let paths: Vec<PathBuf> = if checkpoints.is_empty() {
        cfg.neural_estimators().map(|t| checkpoint_path(&cfg.output_dir, t)).collect()
    } else {
        checkpoints.to_vec()
    };
    let models = load_models(cfg, &paths)?;
    let set = build_sections(cfg)?;
    let test_windows = pooled_windows(cfg, &set, Role::Test)?;
    let eval = evaluate(cfg, &test_windows, &models, oracle)?;
    let dir = report_dir(&cfg.output_dir);
    write_file(&dir.join("report.txt"), &report_text(cfg, &eval))?;
    write_file(&dir.join("report.csv"), &eval.pooled.to_csv())?;
    write_file(&dir.join("sections.csv"), &sections_csv(&eval))?;
    write_file(&dir.join("beams.csv"), &beams_csv(&eval))?;
    Ok(eval)
}

/// Writes every configured section to `<out>/data/<section>.csv` in the default schema.
///
/// For a synthetic source the files hold the corrupted beams and the reference
/// velocities; reading them back needs `data.csv.corrupt = false`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, ExperimentError> {
    let set = build_sections(cfg)?;
    let dir = cfg.output_dir.join("data");
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut written = Vec::new();
    for (section, _) in &set.sections {
        let path = dir.join(format!("{}.csv", section.name));
        write_csv(&path, section)?;
        written.push(path);
    }
    Ok(written)
}
