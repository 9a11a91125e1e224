use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::Network;
use super::optim::{adam_step, lr_at, mse_loss, TrainConfig};
use super::tensor::Tensor;
use super::NnError;
use crate::seeds::{derive_seed, Purpose};

/// Stacked samples: `inputs: [S, ...]`, optional `side: [S, w]`, `targets: [S, o]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Tensor,
    pub side: Option<Tensor>,
    pub targets: Tensor,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(&self, rows: &[usize]) -> (Tensor, Option<Tensor>, Tensor) {
        (
            self.inputs.select_rows(rows),
            self.side.as_ref().map(|s| s.select_rows(rows)),
            self.targets.select_rows(rows),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean of the mini-batch losses of the epoch.
    pub train_loss: f64,
    /// Inference-mode loss over the whole test set; NaN without test samples.
    pub test_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory(pub Vec<EpochLoss>);

impl LossHistory {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> Option<&EpochLoss> {
        self.0.first()
    }

    pub fn last(&self) -> Option<&EpochLoss> {
        self.0.last()
    }
}

/// Inference-mode MSE over a whole set, evaluated in fixed-size chunks.
pub fn evaluate_loss(net: &Network, set: &TrainingSet) -> Result<f64, NnError> {
    if set.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    let rows: Vec<usize> = (0..set.len()).collect();
    for chunk in rows.chunks(256) {
        let (x, side, y) = set.gather(chunk);
        let pred = net.predict(&x, side.as_ref())?;
        let (loss, _) = mse_loss(&pred, &y)?;
        sum += loss * y.len() as f64;
        count += y.len();
    }
    Ok(sum / count as f64)
}

/// Mini-batch ADAM training with per-epoch shuffling and the step schedule of
/// [`lr_at`]. The trailing partial batch is trained on. The batch loss is the
/// mean over all target elements of the batch.
pub fn fit(net: &mut Network, train: &TrainingSet, test: &TrainingSet, config: &TrainConfig) -> Result<LossHistory, NnError> {
    config.validate()?;
    if train.is_empty() {
        return Err(NnError::EmptyTrainSet);
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, Purpose::Shuffle));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, Purpose::Dropout));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let lr = lr_at(config, epoch)?;
        order.shuffle(&mut shuffle_rng);
        net.state.training = true;
        let mut batch_losses = 0.0;
        let mut batches = 0usize;
        for (bi, rows) in order.chunks(config.batch_size).enumerate() {
            let (x, side, y) = train.gather(rows);
            let pred = net.forward(&x, side.as_ref(), &mut dropout_rng)?;
            let (loss, grad) = mse_loss(&pred, &y)?;
            if !loss.is_finite() {
                net.state.training = false;
                return Err(NnError::NonFiniteLoss { epoch, batch: bi + 1 });
            }
            let grads = net.backward(&grad)?;
            adam_step(&mut net.state, &grads, lr, config.beta1, config.beta2, config.epsilon)?;
            batch_losses += loss;
            batches += 1;
        }
        net.state.training = false;
        let train_loss = batch_losses / batches as f64;
        let test_loss = evaluate_loss(net, test)?;
        log::debug!("epoch {epoch}: lr {lr:e} train {train_loss:.6e} test {test_loss:.6e}");
        history.push(EpochLoss {
            epoch,
            train_loss,
            test_loss,
        });
    }
    Ok(LossHistory(history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::{LayerSpec, ModelState};

    fn linear_problem() -> (TrainingSet, TrainingSet) {
        // y = 2a − b + 0.5
        let make = |offset: usize, n: usize| {
            let xs: Vec<f64> = (0..n)
                .flat_map(|k| {
                    let k = (k + offset) as f64;
                    [(k * 0.37).sin(), (k * 0.11).cos()]
                })
                .collect();
            let ys: Vec<f64> = xs.chunks(2).map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
            TrainingSet {
                inputs: Tensor::from_vec(&[n, 2], xs).unwrap(),
                side: None,
                targets: Tensor::from_vec(&[n, 1], ys).unwrap(),
            }
        };
        (make(0, 41), make(100, 10))
    }

    fn net(seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::new(ModelState::init(vec![LayerSpec::Dense { inputs: 2, outputs: 1 }], vec![2], &mut rng).unwrap())
    }

    #[test]
    fn learns_linear_map_deterministically() {
        let (train, test) = linear_problem();
        let cfg = TrainConfig {
            epochs: 60,
            decay_epoch: 40,
            base_lr: 0.05,
            seed: 9,
            ..Default::default()
        };
        let mut a = net(1);
        let h = fit(&mut a, &train, &test, &cfg).unwrap();
        assert_eq!(h.len(), 60);
        assert!(h.last().unwrap().train_loss < 1e-3 * h.first().unwrap().train_loss);
        assert!(h.last().unwrap().test_loss < 1e-3);
        let mut b = net(1);
        let h2 = fit(&mut b, &train, &test, &cfg).unwrap();
        assert_eq!(h, h2);
        assert_eq!(a.state, b.state);
        assert_eq!(a.state.step, 60 * 11);
    }

    #[test]
    fn empty_train_set_rejected() {
        let (_, test) = linear_problem();
        let empty = TrainingSet {
            inputs: Tensor::zeros(&[0, 2]),
            side: None,
            targets: Tensor::zeros(&[0, 1]),
        };
        assert!(matches!(
            fit(&mut net(0), &empty, &test, &TrainConfig::default()),
            Err(NnError::EmptyTrainSet)
        ));
    }

    #[test]
    fn diverging_training_reports_non_finite_loss() {
        let (mut train, test) = linear_problem();
        train.targets.data_mut()[3] = f64::INFINITY;
        let err = fit(&mut net(0), &train, &test, &TrainConfig { epochs: 2, decay_epoch: 1, ..Default::default() });
        assert!(matches!(err, Err(NnError::NonFiniteLoss { epoch: 1, .. })));
    }

    #[test]
    fn empty_test_set_gives_nan_test_loss() {
        let (train, _) = linear_problem();
        let empty = TrainingSet {
            inputs: Tensor::zeros(&[0, 2]),
            side: None,
            targets: Tensor::zeros(&[0, 1]),
        };
        let h = fit(&mut net(0), &train, &empty, &TrainConfig { epochs: 1, decay_epoch: 1, ..Default::default() }).unwrap();
        assert!(h.0[0].test_loss.is_nan());
    }

    #[test]
    fn duplicate_sample_gradient_under_batch_mean() {
        let (train, _) = linear_problem();
        let mut n = net(3);
        n.state.training = true;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (x1, _, y1) = train.gather(&[5]);
        let p = n.forward(&x1, None, &mut rng).unwrap();
        let g1 = n.backward(&mse_loss(&p, &y1).unwrap().1).unwrap();
        let (x2, _, y2) = train.gather(&[5, 5]);
        let p = n.forward(&x2, None, &mut rng).unwrap();
        let g2 = n.backward(&mse_loss(&p, &y2).unwrap().1).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            for (u, v) in a.data().iter().zip(b.data()) {
                assert!((u - v).abs() < 1e-14);
            }
        }
    }
}
