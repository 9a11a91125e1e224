//! Missing-beam strategies.
//!
//! * **Average**: each missing beam is the mean of its `N` past values.
//! * **LiBeamsNet**: the `N×4` past window is convolved along time with the
//!   beams as channels, flattened, passed through dropout and dense layers;
//!   the currently available beams join before the last dense layer, which
//!   emits all four beams.
//! * **MissBeamNet**: an LSTM reads the past window as a length-`N` sequence
//!   of 4-vectors; its final hidden state concatenated with the available
//!   beams is mapped by one dense layer to the missing beams only.
//!
//! Measured beams are never overwritten: whatever a strategy predicts for an
//! available beam is discarded by [`reconstruct_full_beams`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{BeamMask, DatasetError, WindowSample};
use crate::geometry::{solve_velocity, BeamGeometry, BeamVelocities, DvlVelocity, GeometryError, BEAM_COUNT};
use crate::nn::checkpoint::{self, Meta};
use crate::nn::{fit, Activation, LayerSpec, LossHistory, ModelState, Network, NnError, Tensor, TrainConfig, TrainingSet};
use crate::seeds::{derive_seed, Purpose};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("the average strategy has no trainable model")]
    NotTrainable,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyTag {
    Average,
    #[serde(rename = "libeamsnet")]
    LiBeamsNet,
    #[serde(rename = "missbeamnet")]
    MissBeamNet,
}

impl StrategyTag {
    /// Lower-case identifier used in configs, file names and checkpoints.
    pub fn key(self) -> &'static str {
        match self {
            StrategyTag::Average => "average",
            StrategyTag::LiBeamsNet => "libeamsnet",
            StrategyTag::MissBeamNet => "missbeamnet",
        }
    }

    /// Column title in reports.
    pub fn title(self) -> &'static str {
        match self {
            StrategyTag::Average => "Average",
            StrategyTag::LiBeamsNet => "LiBeamsNet",
            StrategyTag::MissBeamNet => "MissBeamNet",
        }
    }
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for StrategyTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "average" => Ok(StrategyTag::Average),
            "libeamsnet" => Ok(StrategyTag::LiBeamsNet),
            "missbeamnet" => Ok(StrategyTag::MissBeamNet),
            other => Err(format!("unknown estimator `{other}`")),
        }
    }
}

/// LiBeamsNet hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiBeamsNetConfig {
    pub filters: usize,
    pub kernel: usize,
    pub dropout: f64,
    /// Widths of the hidden dense layers between the flattened features and the output layer.
    pub hidden: Vec<usize>,
    /// Applied after the convolution and after every hidden dense layer.
    pub activation: Activation,
    pub train: TrainConfig,
}

impl Default for LiBeamsNetConfig {
    fn default() -> Self {
        Self {
            filters: 6,
            kernel: 2,
            dropout: 0.2,
            hidden: vec![64, 32],
            activation: Activation::Tanh,
            train: TrainConfig::default(),
        }
    }
}

/// MissBeamNet hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissBeamNetConfig {
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for MissBeamNetConfig {
    fn default() -> Self {
        Self {
            hidden: 500,
            train: TrainConfig::default(),
        }
    }
}

pub fn libeamsnet_specs(window: usize, mask: BeamMask, cfg: &LiBeamsNetConfig) -> Vec<LayerSpec> {
    let act = LayerSpec::Activation {
        function: cfg.activation,
    };
    let features = cfg.filters * (window + 1).saturating_sub(cfg.kernel);
    let mut specs = vec![
        LayerSpec::Conv1d {
            in_channels: BEAM_COUNT,
            out_channels: cfg.filters,
            kernel: cfg.kernel,
            length: window,
        },
        act.clone(),
        LayerSpec::Dropout { rate: cfg.dropout },
    ];
    let mut width = features;
    for &h in &cfg.hidden {
        specs.push(LayerSpec::Dense {
            inputs: width,
            outputs: h,
        });
        specs.push(act.clone());
        width = h;
    }
    let available = BEAM_COUNT - mask.missing_count();
    specs.push(LayerSpec::Concat { width: available });
    specs.push(LayerSpec::Dense {
        inputs: width + available,
        outputs: BEAM_COUNT,
    });
    specs
}

pub fn missbeamnet_specs(mask: BeamMask, cfg: &MissBeamNetConfig) -> Vec<LayerSpec> {
    let available = BEAM_COUNT - mask.missing_count();
    vec![
        LayerSpec::Lstm {
            inputs: BEAM_COUNT,
            hidden: cfg.hidden,
        },
        LayerSpec::Concat { width: available },
        LayerSpec::Dense {
            inputs: cfg.hidden + available,
            outputs: mask.missing_count(),
        },
    ]
}

/// A trained (or freshly initialised) network bound to its window length and mask.
pub struct NeuralModel {
    pub network: Network,
    pub mask: BeamMask,
    pub window: usize,
}

impl fmt::Debug for NeuralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeuralModel")
            .field("mask", &self.mask)
            .field("window", &self.window)
            .field("parameters", &self.network.state.parameter_count())
            .finish()
    }
}

#[derive(Debug)]
pub enum EstimatorKind {
    Average,
    LiBeamsNet(NeuralModel),
    MissBeamNet(NeuralModel),
}

impl EstimatorKind {
    pub fn tag(&self) -> StrategyTag {
        match self {
            EstimatorKind::Average => StrategyTag::Average,
            EstimatorKind::LiBeamsNet(_) => StrategyTag::LiBeamsNet,
            EstimatorKind::MissBeamNet(_) => StrategyTag::MissBeamNet,
        }
    }

    pub fn model(&self) -> Option<&NeuralModel> {
        match self {
            EstimatorKind::Average => None,
            EstimatorKind::LiBeamsNet(m) | EstimatorKind::MissBeamNet(m) => Some(m),
        }
    }

    /// Untrained LiBeamsNet with weights drawn from `seed`.
    pub fn new_libeamsnet(window: usize, mask: BeamMask, cfg: &LiBeamsNetConfig, seed: u64) -> Result<Self, EstimatorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = ModelState::init(libeamsnet_specs(window, mask, cfg), vec![BEAM_COUNT, window], &mut rng)?;
        Ok(EstimatorKind::LiBeamsNet(NeuralModel {
            network: Network::new(state),
            mask,
            window,
        }))
    }

    /// Untrained MissBeamNet with weights drawn from `seed`.
    pub fn new_missbeamnet(window: usize, mask: BeamMask, cfg: &MissBeamNetConfig, seed: u64) -> Result<Self, EstimatorError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = ModelState::init(missbeamnet_specs(mask, cfg), vec![window, BEAM_COUNT], &mut rng)?;
        Ok(EstimatorKind::MissBeamNet(NeuralModel {
            network: Network::new(state),
            mask,
            window,
        }))
    }

    /// Predicted missing beams (ascending beam order) for each sample.
    pub fn predict_missing(&self, samples: &[WindowSample]) -> Result<Vec<Vec<f64>>, EstimatorError> {
        match self {
            EstimatorKind::Average => Ok(samples.iter().map(average_predict).collect()),
            EstimatorKind::LiBeamsNet(m) => {
                let mut out = Vec::with_capacity(samples.len());
                for chunk in samples.chunks(256) {
                    for full in libeamsnet_batch(m, chunk)? {
                        out.push(m.mask.missing_indices().iter().map(|&i| full[i]).collect());
                    }
                }
                Ok(out)
            }
            EstimatorKind::MissBeamNet(m) => {
                let mut out = Vec::with_capacity(samples.len());
                for chunk in samples.chunks(256) {
                    out.extend(missbeamnet_batch(m, chunk)?);
                }
                Ok(out)
            }
        }
    }
}

/// Mean of the past values of every missing beam.
pub fn average_predict(sample: &WindowSample) -> Vec<f64> {
    let n = sample.past.len() as f64;
    sample
        .missing_mask
        .missing_indices()
        .iter()
        .map(|&j| sample.past.iter().map(|row| row[j]).sum::<f64>() / n)
        .collect()
}

fn check_model(m: &NeuralModel, sample: &WindowSample) -> Result<(), EstimatorError> {
    if sample.window() != m.window {
        return Err(EstimatorError::ModelMismatch(format!(
            "model built for window {}, sample has {}",
            m.window,
            sample.window()
        )));
    }
    if sample.missing_mask != m.mask {
        return Err(EstimatorError::ModelMismatch(format!(
            "model built for missing beams {}, sample has {}",
            m.mask, sample.missing_mask
        )));
    }
    Ok(())
}

/// `[S, 4, N]`: beams as channels, time along the convolution axis.
fn channels_first(samples: &[WindowSample], window: usize) -> Tensor {
    let mut data = Vec::with_capacity(samples.len() * BEAM_COUNT * window);
    for s in samples {
        for beam in 0..BEAM_COUNT {
            data.extend(s.past.iter().map(|row| row[beam]));
        }
    }
    Tensor::from_vec(&[samples.len(), BEAM_COUNT, window], data).expect("sized")
}

/// `[S, N, 4]`: one 4-beam vector per time step.
fn time_major(samples: &[WindowSample], window: usize) -> Tensor {
    let mut data = Vec::with_capacity(samples.len() * BEAM_COUNT * window);
    for s in samples {
        for row in &s.past {
            data.extend_from_slice(row);
        }
    }
    Tensor::from_vec(&[samples.len(), window, BEAM_COUNT], data).expect("sized")
}

fn side_input(samples: &[WindowSample], width: usize) -> Tensor {
    let data: Vec<f64> = samples.iter().flat_map(|s| s.current_available.iter().copied()).collect();
    Tensor::from_vec(&[samples.len(), width], data).expect("sized")
}

fn libeamsnet_batch(m: &NeuralModel, samples: &[WindowSample]) -> Result<Vec<[f64; BEAM_COUNT]>, EstimatorError> {
    for s in samples {
        check_model(m, s)?;
    }
    let width = BEAM_COUNT - m.mask.missing_count();
    let out = m
        .network
        .predict(&channels_first(samples, m.window), Some(&side_input(samples, width)))?;
    Ok((0..samples.len())
        .map(|i| out.row(i).try_into().expect("4 outputs"))
        .collect())
}

fn missbeamnet_batch(m: &NeuralModel, samples: &[WindowSample]) -> Result<Vec<Vec<f64>>, EstimatorError> {
    for s in samples {
        check_model(m, s)?;
    }
    let width = BEAM_COUNT - m.mask.missing_count();
    let out = m
        .network
        .predict(&time_major(samples, m.window), Some(&side_input(samples, width)))?;
    Ok((0..samples.len()).map(|i| out.row(i).to_vec()).collect())
}

/// Full 4-beam estimate of LiBeamsNet for one sample (inference mode).
pub fn libeamsnet_forward(model: &EstimatorKind, sample: &WindowSample) -> Result<[f64; BEAM_COUNT], EstimatorError> {
    match model {
        EstimatorKind::LiBeamsNet(m) => Ok(libeamsnet_batch(m, std::slice::from_ref(sample))?[0]),
        other => Err(EstimatorError::ModelMismatch(format!("expected a libeamsnet model, got {}", other.tag()))),
    }
}

/// Missing-beam predictions of MissBeamNet for one sample (inference mode).
pub fn missbeamnet_forward(model: &EstimatorKind, sample: &WindowSample) -> Result<Vec<f64>, EstimatorError> {
    match model {
        EstimatorKind::MissBeamNet(m) => Ok(missbeamnet_batch(m, std::slice::from_ref(sample))?.remove(0)),
        other => Err(EstimatorError::ModelMismatch(format!(
            "expected a missbeamnet model, got {}",
            other.tag()
        ))),
    }
}

/// Measured beams in the available slots, `predictions` in the missing ones.
pub fn reconstruct_full_beams(sample: &WindowSample, predictions: &[f64]) -> Result<BeamVelocities, EstimatorError> {
    let missing = sample.missing_mask.missing_indices();
    let available = sample.missing_mask.available_indices();
    if predictions.len() != missing.len() || sample.current_available.len() != available.len() {
        return Err(EstimatorError::ShapeMismatch(format!(
            "{} predictions for {} missing beams",
            predictions.len(),
            missing.len()
        )));
    }
    let mut beams = [0.0; BEAM_COUNT];
    for (&i, &v) in available.iter().zip(&sample.current_available) {
        beams[i] = v;
    }
    for (&i, &v) in missing.iter().zip(predictions) {
        beams[i] = v;
    }
    Ok(BeamVelocities(beams))
}

/// Velocity recovered from the reconstructed 4-beam vector.
pub fn recover_velocity(
    geom: &BeamGeometry,
    sample: &WindowSample,
    predictions: &[f64],
) -> Result<DvlVelocity, EstimatorError> {
    let beams = reconstruct_full_beams(sample, predictions)?;
    Ok(solve_velocity(geom, &beams.0, &[true; BEAM_COUNT])?)
}

/// Stacks samples into the tensors a network of `tag` trains on.
pub fn training_set(tag: StrategyTag, samples: &[WindowSample], window: usize, mask: BeamMask) -> Result<TrainingSet, EstimatorError> {
    for s in samples {
        if s.window() != window || s.missing_mask != mask {
            return Err(EstimatorError::ModelMismatch(format!(
                "sample from `{}` does not match window {window} / mask {mask}",
                s.section
            )));
        }
    }
    let width = BEAM_COUNT - mask.missing_count();
    let side = Some(side_input(samples, width));
    match tag {
        StrategyTag::LiBeamsNet => Ok(TrainingSet {
            inputs: channels_first(samples, window),
            side,
            targets: Tensor::from_vec(
                &[samples.len(), BEAM_COUNT],
                samples.iter().flat_map(|s| s.target_all).collect(),
            )?,
        }),
        StrategyTag::MissBeamNet => Ok(TrainingSet {
            inputs: time_major(samples, window),
            side,
            targets: Tensor::from_vec(
                &[samples.len(), mask.missing_count()],
                samples.iter().flat_map(|s| s.target_missing.iter().copied()).collect(),
            )?,
        }),
        StrategyTag::Average => Err(EstimatorError::NotTrainable),
    }
}

/// Network-specific settings for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub enum NetworkConfig {
    LiBeamsNet(LiBeamsNetConfig),
    MissBeamNet(MissBeamNetConfig),
}

impl NetworkConfig {
    pub fn tag(&self) -> StrategyTag {
        match self {
            NetworkConfig::LiBeamsNet(_) => StrategyTag::LiBeamsNet,
            NetworkConfig::MissBeamNet(_) => StrategyTag::MissBeamNet,
        }
    }

    pub fn train_config(&self) -> &TrainConfig {
        match self {
            NetworkConfig::LiBeamsNet(c) => &c.train,
            NetworkConfig::MissBeamNet(c) => &c.train,
        }
    }
}

/// Initialises and trains one network; returns the final-epoch model and its loss history.
///
/// Window length and mask are taken from the first training sample.
pub fn train(
    cfg: &NetworkConfig,
    train_samples: &[WindowSample],
    test_samples: &[WindowSample],
) -> Result<(EstimatorKind, LossHistory), EstimatorError> {
    let first = train_samples.first().ok_or(NnError::EmptyTrainSet)?;
    let (window, mask) = (first.window(), first.missing_mask);
    let tc = cfg.train_config();
    tc.validate()?;
    let init_seed = derive_seed(tc.seed, Purpose::Init);
    let mut model = match cfg {
        NetworkConfig::LiBeamsNet(c) => EstimatorKind::new_libeamsnet(window, mask, c, init_seed)?,
        NetworkConfig::MissBeamNet(c) => EstimatorKind::new_missbeamnet(window, mask, c, init_seed)?,
    };
    let train_set = training_set(cfg.tag(), train_samples, window, mask)?;
    let test_set = training_set(cfg.tag(), test_samples, window, mask)?;
    let history = match &mut model {
        EstimatorKind::LiBeamsNet(m) | EstimatorKind::MissBeamNet(m) => fit(&mut m.network, &train_set, &test_set, tc)?,
        EstimatorKind::Average => unreachable!("networks only"),
    };
    Ok((model, history))
}

fn mask_text(mask: BeamMask) -> String {
    mask.beam_numbers().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes a network checkpoint whose header records kind, window and mask.
pub fn save_estimator(path: &Path, model: &EstimatorKind) -> Result<(), EstimatorError> {
    let m = model.model().ok_or(EstimatorError::NotTrainable)?;
    let meta: Meta = vec![
        ("kind".into(), model.tag().key().into()),
        ("window".into(), m.window.to_string()),
        ("mask".into(), mask_text(m.mask)),
    ];
    checkpoint::save(path, &meta, &m.network.state)?;
    Ok(())
}

pub fn load_estimator(path: &Path) -> Result<EstimatorKind, EstimatorError> {
    let (meta, state) = checkpoint::load(path)?;
    let get = |k: &str| {
        meta.iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| EstimatorError::ModelMismatch(format!("checkpoint header lacks `{k}`")))
    };
    let tag: StrategyTag = get("kind")?.parse().map_err(EstimatorError::ModelMismatch)?;
    let window: usize = get("window")?
        .parse()
        .map_err(|_| EstimatorError::ModelMismatch("bad window in checkpoint header".into()))?;
    let numbers: Vec<usize> = get("mask")?
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| EstimatorError::ModelMismatch("bad mask in checkpoint header".into()))?;
    let mask = BeamMask::from_beam_numbers(&numbers)?;
    let expected_input = match tag {
        StrategyTag::LiBeamsNet => vec![BEAM_COUNT, window],
        StrategyTag::MissBeamNet => vec![window, BEAM_COUNT],
        StrategyTag::Average => return Err(EstimatorError::NotTrainable),
    };
    if state.input_shape != expected_input || state.side_width() != BEAM_COUNT - mask.missing_count() {
        return Err(EstimatorError::ModelMismatch(format!(
            "checkpoint layers do not fit window {window} / mask {mask}"
        )));
    }
    let model = NeuralModel {
        network: Network::new(state),
        mask,
        window,
    };
    Ok(match tag {
        StrategyTag::LiBeamsNet => EstimatorKind::LiBeamsNet(model),
        _ => EstimatorKind::MissBeamNet(model),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{make_windows, BeamRecord, Section};
    use std::sync::Arc;

    fn sample(past: Vec<[f64; 4]>, current: [f64; 4], mask: BeamMask) -> WindowSample {
        WindowSample {
            section: Arc::from("s"),
            times: (0..=past.len()).map(|t| t as f64).collect(),
            current_available: mask.available_indices().iter().map(|&i| current[i]).collect(),
            target_missing: mask.missing_indices().iter().map(|&i| current[i]).collect(),
            past,
            missing_mask: mask,
            target_all: current,
            v_true_t: DvlVelocity::default(),
        }
    }

    fn small_lib() -> LiBeamsNetConfig {
        LiBeamsNetConfig {
            hidden: vec![8, 5],
            ..Default::default()
        }
    }

    fn small_miss() -> MissBeamNetConfig {
        MissBeamNetConfig {
            hidden: 7,
            ..Default::default()
        }
    }

    #[test]
    fn average_examples() {
        let mask = BeamMask::default();
        let s = sample(
            vec![[0.0, 0.0, 1.0, 0.93], [0.0, 0.0, 2.0, 0.95], [0.0, 0.0, 3.0, 0.94]],
            [0.0; 4],
            mask,
        );
        let p = average_predict(&s);
        assert_eq!(p[0], 2.0);
        assert!((p[1] - 0.94).abs() < 1e-15);
        let c = sample(vec![[0.4; 4]; 3], [0.4; 4], mask);
        assert!(average_predict(&c).iter().all(|v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn average_is_translation_equivariant() {
        let mask = BeamMask::from_beam_numbers(&[1, 2]).unwrap();
        let past = vec![[0.1, 0.5, -0.2, 0.3], [0.7, -0.4, 0.2, 0.3], [0.2, 0.25, 0.9, -1.0]];
        let base = average_predict(&sample(past.clone(), [0.0; 4], mask));
        let shifted_past: Vec<[f64; 4]> = past.iter().map(|r| r.map(|v| v + 1.5)).collect();
        let shifted = average_predict(&sample(shifted_past, [0.0; 4], mask));
        for (a, b) in base.iter().zip(shifted) {
            assert!((b - a - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn default_architectures() {
        let mask = BeamMask::default();
        let lib = libeamsnet_specs(3, mask, &LiBeamsNetConfig::default());
        assert_eq!(crate::nn::validate_specs(&lib, 12).unwrap(), 4);
        // 6 filters × (3 − 2 + 1) positions
        assert!(matches!(lib[3], LayerSpec::Dense { inputs: 12, .. }));
        let miss = missbeamnet_specs(mask, &MissBeamNetConfig::default());
        assert!(matches!(miss[2], LayerSpec::Dense { inputs: 502, outputs: 2 }));
    }

    #[test]
    fn output_shapes() {
        let mask = BeamMask::default();
        let s = sample(vec![[0.2, 0.1, 0.3, 0.4]; 3], [0.2, 0.1, 0.3, 0.4], mask);
        let lib = EstimatorKind::new_libeamsnet(3, mask, &small_lib(), 1).unwrap();
        assert_eq!(libeamsnet_forward(&lib, &s).unwrap().len(), 4);
        let miss = EstimatorKind::new_missbeamnet(3, mask, &small_miss(), 1).unwrap();
        assert_eq!(missbeamnet_forward(&miss, &s).unwrap().len(), 2);
        assert!(libeamsnet_forward(&miss, &s).is_err());
    }

    #[test]
    fn zero_parameter_networks() {
        let mask = BeamMask::default();
        let s = sample(vec![[0.2, -0.1, 0.3, 0.4]; 3], [0.5, -0.6, 0.3, 0.4], mask);
        let mut lib = EstimatorKind::new_libeamsnet(3, mask, &small_lib(), 2).unwrap();
        if let EstimatorKind::LiBeamsNet(m) = &mut lib {
            let n = m.network.state.params.len();
            for p in &mut m.network.state.params[..n - 1] {
                p.data_mut().fill(0.0);
            }
            m.network.state.params[n - 1] = Tensor::vector(vec![0.1, 0.2, 0.3, 0.4]);
        }
        assert_eq!(libeamsnet_forward(&lib, &s).unwrap(), [0.1, 0.2, 0.3, 0.4]);

        let mut miss = EstimatorKind::new_missbeamnet(3, mask, &small_miss(), 2).unwrap();
        let (w, b) = if let EstimatorKind::MissBeamNet(m) = &mut miss {
            for p in &mut m.network.state.params[..3] {
                p.data_mut().fill(0.0);
            }
            (m.network.state.params[3].clone(), m.network.state.params[4].clone())
        } else {
            unreachable!()
        };
        let out = missbeamnet_forward(&miss, &s).unwrap();
        // only the available-beam slice (columns 7, 8) contributes
        for (k, o) in out.iter().enumerate() {
            let row = &w.data()[k * 9..(k + 1) * 9];
            let want = b.data()[k] + row[7] * 0.5 + row[8] * -0.6;
            assert!((o - want).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_sample_rejected() {
        let lib = EstimatorKind::new_libeamsnet(3, BeamMask::default(), &small_lib(), 0).unwrap();
        let other_mask = BeamMask::from_beam_numbers(&[1, 2]).unwrap();
        let s = sample(vec![[0.0; 4]; 3], [0.0; 4], other_mask);
        assert!(matches!(libeamsnet_forward(&lib, &s), Err(EstimatorError::ModelMismatch(_))));
        let s = sample(vec![[0.0; 4]; 4], [0.0; 4], BeamMask::default());
        assert!(matches!(libeamsnet_forward(&lib, &s), Err(EstimatorError::ModelMismatch(_))));
    }

    #[test]
    fn reconstruction_fills_slots() {
        let mask = BeamMask::default();
        let s = sample(vec![[0.0; 4]; 3], [0.1, 0.2, 9.0, 9.0], mask);
        assert_eq!(reconstruct_full_beams(&s, &[0.3, 0.4]).unwrap().0, [0.1, 0.2, 0.3, 0.4]);
        assert!(reconstruct_full_beams(&s, &[0.3]).is_err());
        let mask = BeamMask::from_beam_numbers(&[2, 4]).unwrap();
        let s = sample(vec![[0.0; 4]; 3], [0.1, 9.0, 0.3, 9.0], mask);
        assert_eq!(reconstruct_full_beams(&s, &[0.2, 0.4]).unwrap().0, [0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn true_predictions_recover_full_solution() {
        let geom = BeamGeometry::from_degrees(20.0).unwrap();
        let mask = BeamMask::default();
        let beams = [0.31, -0.12, -0.27, 0.44];
        let s = sample(vec![[0.0; 4]; 3], beams, mask);
        let v = recover_velocity(&geom, &s, &s.target_missing).unwrap();
        assert_eq!(v, solve_velocity(&geom, &beams, &[true; 4]).unwrap());
    }

    #[test]
    fn libeamsnet_available_outputs_are_discarded() {
        let mask = BeamMask::default();
        let s = sample(vec![[0.2, 0.1, 0.3, 0.4]; 3], [0.2, 0.1, 0.3, 0.4], mask);
        let lib = EstimatorKind::new_libeamsnet(3, mask, &small_lib(), 5).unwrap();
        let full = libeamsnet_forward(&lib, &s).unwrap();
        let pred = lib.predict_missing(std::slice::from_ref(&s)).unwrap().remove(0);
        assert_eq!(pred, vec![full[2], full[3]]);
        let beams = reconstruct_full_beams(&s, &pred).unwrap();
        assert_eq!(&beams.0[..2], &[0.2, 0.1]);
    }

    fn constant_samples(c: f64, len: usize) -> Vec<WindowSample> {
        let section = Section {
            name: "const".into(),
            records: (0..len)
                .map(|k| BeamRecord {
                    t: k as f64,
                    beams: BeamVelocities([c; 4]),
                    v_true: DvlVelocity::default(),
                })
                .collect(),
        };
        make_windows(&section, 3, BeamMask::default()).unwrap()
    }

    #[test]
    fn networks_learn_constant_data() {
        let samples = constant_samples(0.5, 1003);
        let tc = TrainConfig {
            epochs: 20,
            decay_epoch: 20,
            seed: 3,
            ..Default::default()
        };
        let lib = NetworkConfig::LiBeamsNet(LiBeamsNetConfig {
            train: tc.clone(),
            ..Default::default()
        });
        let miss = NetworkConfig::MissBeamNet(MissBeamNetConfig {
            hidden: 32,
            train: tc.clone(),
        });
        for cfg in [lib, miss] {
            let (_, h) = train(&cfg, &samples, &samples[..20]).unwrap();
            assert_eq!(h.len(), 20);
            let best = h.0.iter().map(|e| e.train_loss).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "{:?}: {:?}", cfg.tag(), h.last());
        }
        // without dropout the inference-mode loss vanishes as well
        let plain = NetworkConfig::LiBeamsNet(LiBeamsNetConfig {
            dropout: 0.0,
            train: tc,
            ..Default::default()
        });
        let (_, h) = train(&plain, &samples, &samples[..20]).unwrap();
        let last = h.last().unwrap();
        assert!(last.train_loss < 1e-6 && last.test_loss < 1e-6, "{last:?}");
    }

    #[test]
    fn training_is_reproducible_and_checkpoints_round_trip() {
        let samples = constant_samples(0.3, 30);
        let cfg = NetworkConfig::LiBeamsNet(LiBeamsNetConfig {
            hidden: vec![6],
            train: TrainConfig {
                epochs: 3,
                decay_epoch: 2,
                seed: 11,
                ..Default::default()
            },
            ..Default::default()
        });
        let (a, ha) = train(&cfg, &samples, &samples).unwrap();
        let (b, hb) = train(&cfg, &samples, &samples).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a.model().unwrap().network.state, b.model().unwrap().network.state);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.ckpt");
        save_estimator(&path, &a).unwrap();
        let back = load_estimator(&path).unwrap();
        assert_eq!(back.tag(), StrategyTag::LiBeamsNet);
        assert_eq!(back.predict_missing(&samples).unwrap(), a.predict_missing(&samples).unwrap());
    }

    #[test]
    fn average_cannot_be_trained_or_saved() {
        let samples = constant_samples(0.3, 10);
        assert!(matches!(
            training_set(StrategyTag::Average, &samples, 3, BeamMask::default()),
            Err(EstimatorError::NotTrainable)
        ));
        let dir = tempfile::tempdir().unwrap();
        assert!(save_estimator(&dir.path().join("x"), &EstimatorKind::Average).is_err());
    }
}
