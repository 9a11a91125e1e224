use serde::{Deserialize, Serialize};

use super::network::ModelState;
use super::tensor::Tensor;
use super::NnError;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub decay_factor: f64,
    /// Last epoch trained at `base_lr`; later epochs use `base_lr · decay_factor`.
    pub decay_epoch: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            base_lr: 0.001,
            decay_factor: 0.1,
            decay_epoch: 50,
            batch_size: 4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: &str| Err(NnError::InvalidConfig(m.to_string()));
        if self.epochs < 1 {
            return bad("epochs must be at least 1");
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr must be positive");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad("decay_factor must lie in (0, 1]");
        }
        if self.decay_epoch < 1 || self.decay_epoch > self.epochs {
            return bad("decay_epoch must lie in [1, epochs]");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Step schedule: `base_lr` through `decay_epoch`, then `base_lr · decay_factor`.
/// Epochs are 1-based.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> Result<f64, NnError> {
    if epoch < 1 || epoch > config.epochs {
        return Err(NnError::EpochOutOfRange {
            epoch,
            epochs: config.epochs,
        });
    }
    Ok(if epoch <= config.decay_epoch {
        config.base_lr
    } else {
        config.base_lr * config.decay_factor
    })
}

/// Mean squared error over all elements, with its gradient `2(pred − target)/len`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor), NnError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(NnError::ShapeMismatch(format!(
            "mse between {:?} and {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    let mut loss = 0.0;
    for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let e = p - t;
        loss += e * e;
        *g = 2.0 * e / n;
    }
    Ok((loss / n, grad))
}

/// One bias-corrected ADAM update of every parameter tensor.
pub fn adam_step(
    state: &mut ModelState,
    grads: &[Tensor],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<(), NnError> {
    if grads.len() != state.params.len()
        || grads.iter().zip(&state.params).any(|(g, p)| g.shape() != p.shape())
    {
        return Err(NnError::ShapeMismatch("gradient shapes do not match parameters".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for (((p, m), v), g) in state
        .params
        .iter_mut()
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
        .zip(grads)
    {
        for (((p, m), v), g) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
            .zip(g.data())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::LayerSpec;

    fn state_with(params: Vec<f64>) -> ModelState {
        let n = params.len();
        let specs = vec![LayerSpec::Dense { inputs: n, outputs: 1 }];
        ModelState::from_params(
            specs,
            vec![n],
            vec![Tensor::from_vec(&[1, n], params).unwrap(), Tensor::zeros(&[1])],
        )
        .unwrap()
    }

    #[test]
    fn schedule_boundaries() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(&c, 1).unwrap(), 0.001);
        assert_eq!(lr_at(&c, 50).unwrap(), 0.001);
        assert!((lr_at(&c, 51).unwrap() - 0.0001).abs() < 1e-18);
        assert_eq!(lr_at(&c, 100).unwrap(), lr_at(&c, 51).unwrap());
        assert!(matches!(lr_at(&c, 0), Err(NnError::EpochOutOfRange { .. })));
        assert!(matches!(lr_at(&c, 101), Err(NnError::EpochOutOfRange { .. })));
        let jumps = (1..c.epochs)
            .filter(|&e| lr_at(&c, e).unwrap() != lr_at(&c, e + 1).unwrap())
            .collect::<Vec<_>>();
        assert_eq!(jumps, vec![50]);
    }

    #[test]
    fn mse_examples() {
        let z = Tensor::vector(vec![0.0, 0.0]);
        let o = Tensor::vector(vec![1.0, 1.0]);
        assert_eq!(mse_loss(&o, &o).unwrap().0, 0.0);
        let (l, g) = mse_loss(&o, &z).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g.data(), &[1.0, 1.0]);
        assert!(mse_loss(&o, &Tensor::vector(vec![0.0])).is_err());
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut s = state_with(vec![0.5, -0.2, 1.0]);
        let g = vec![
            Tensor::from_vec(&[1, 3], vec![0.3, -2.0, 1e-3]).unwrap(),
            Tensor::zeros(&[1]),
        ];
        adam_step(&mut s, &g, 0.001, 0.9, 0.999, 1e-8).unwrap();
        let g0 = [0.3, -2.0, 1e-3];
        let start = [0.5, -0.2, 1.0];
        for ((p, g), p0) in s.params[0].data().iter().zip(g0).zip(start) {
            let want = p0 - 0.001 * g / (f64::abs(g) + 1e-8);
            assert!((p - want).abs() < 1e-15);
            assert!(((p0 - p).abs() - 0.001).abs() < 1e-8);
        }
        assert_eq!(s.params[1].data(), &[0.0]);
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut s = state_with(vec![0.5, -0.2]);
        let before = s.params.clone();
        let g: Vec<_> = s.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        for _ in 0..5 {
            adam_step(&mut s, &g, 0.01, 0.9, 0.999, 1e-8).unwrap();
        }
        assert_eq!(s.params, before);
        assert_eq!(s.step, 5);
    }

    #[test]
    fn tensors_update_independently() {
        let g_a = Tensor::from_vec(&[1, 2], vec![0.4, -0.1]).unwrap();
        let g_b = Tensor::vector(vec![0.7]);
        let mut joint = state_with(vec![1.0, 2.0]);
        joint.params[1] = Tensor::vector(vec![3.0]);
        let mut only_a = joint.clone();
        let mut only_b = joint.clone();
        for _ in 0..3 {
            adam_step(&mut joint, &[g_a.clone(), g_b.clone()], 0.01, 0.9, 0.999, 1e-8).unwrap();
            adam_step(&mut only_a, &[g_a.clone(), Tensor::zeros(&[1])], 0.01, 0.9, 0.999, 1e-8).unwrap();
            adam_step(&mut only_b, &[Tensor::zeros(&[1, 2]), g_b.clone()], 0.01, 0.9, 0.999, 1e-8).unwrap();
        }
        assert_eq!(joint.params[0], only_a.params[0]);
        assert_eq!(joint.params[1], only_b.params[1]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { base_lr: 0.0, ..Default::default() },
            TrainConfig { decay_factor: 1.5, ..Default::default() },
            TrainConfig { decay_epoch: 101, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
