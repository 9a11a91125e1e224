//! Central finite-difference check of [`Network::backward`].
//!
//! The scalar probed is `L(θ) = Σ r ⊙ f(x; θ)` for a fixed random weighting
//! `r`, so every output contributes. Dropout masks are reproduced exactly by
//! reseeding the mask stream before every evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{ModelState, Network};
use super::tensor::Tensor;
use super::NnError;

/// Denominator floor of the relative error, so parameters with vanishing
/// gradients are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor index, element index)` of the worst parameter.
    pub worst: (usize, usize),
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares analytic and central-difference gradients for every parameter of `state`.
pub fn check_gradients(
    state: &ModelState,
    input: &Tensor,
    side: Option<&Tensor>,
    seed: u64,
    step: f64,
) -> Result<GradCheckReport, NnError> {
    let mut net = Network::new(state.clone());
    let mask_seed = seed ^ 0x5eed;
    let probe = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = net.predict(input, side)?;
        Tensor::from_vec(out.shape(), (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?
    };
    let objective = |net: &mut Network| -> Result<f64, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
        let out = net.forward(input, side, &mut rng)?;
        Ok(out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum())
    };

    objective(&mut net)?;
    let analytic = net.backward(&probe)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    for ti in 0..net.state.params.len() {
        for ei in 0..net.state.params[ti].len() {
            let original = net.state.params[ti].data()[ei];
            net.state.params[ti].data_mut()[ei] = original + step;
            let plus = objective(&mut net)?;
            net.state.params[ti].data_mut()[ei] = original - step;
            let minus = objective(&mut net)?;
            net.state.params[ti].data_mut()[ei] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[ti].data()[ei], numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (ti, ei);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::Activation;
    use crate::nn::network::LayerSpec;

    fn random_input(shape: &[usize], seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
    }

    fn run(specs: Vec<LayerSpec>, input_shape: Vec<usize>, side: usize, training: bool) -> f64 {
        let mut worst: f64 = 0.0;
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let mut state = ModelState::init(specs.clone(), input_shape.clone(), &mut rng).unwrap();
            state.training = training;
            let mut shape = vec![3];
            shape.extend(&input_shape);
            let x = random_input(&shape, seed);
            let s = (side > 0).then(|| random_input(&[3, side], seed + 50));
            let r = check_gradients(&state, &x, s.as_ref(), seed, 1e-5).unwrap();
            worst = worst.max(r.max_rel_error);
        }
        worst
    }

    #[test]
    fn dense_gradients() {
        assert!(run(vec![LayerSpec::Dense { inputs: 5, outputs: 3 }], vec![5], 0, false) < 1e-4);
    }

    #[test]
    fn conv_gradients() {
        let specs = vec![LayerSpec::Conv1d {
            in_channels: 4,
            out_channels: 6,
            kernel: 2,
            length: 3,
        }];
        assert!(run(specs, vec![4, 3], 0, false) < 1e-4);
    }

    #[test]
    fn lstm_gradients_through_time() {
        let specs = vec![LayerSpec::Lstm { inputs: 4, hidden: 5 }];
        assert!(run(specs, vec![3, 4], 0, false) < 1e-4);
    }

    #[test]
    fn activation_dropout_concat_gradients() {
        let specs = vec![
            LayerSpec::Dense { inputs: 6, outputs: 8 },
            LayerSpec::Activation {
                function: Activation::Tanh,
            },
            LayerSpec::Dropout { rate: 0.3 },
            LayerSpec::Concat { width: 2 },
            LayerSpec::Dense { inputs: 10, outputs: 4 },
        ];
        assert!(run(specs, vec![6], 2, true) < 1e-4);
    }

    #[test]
    fn relu_gradients_at_fixed_points() {
        let specs = vec![
            LayerSpec::Dense { inputs: 5, outputs: 7 },
            LayerSpec::Activation {
                function: Activation::Relu,
            },
            LayerSpec::Dense { inputs: 7, outputs: 3 },
        ];
        assert!(run(specs, vec![5], 0, false) < 1e-4);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        assert!(relative_error(1.0, 1.1) > 0.05);
        assert_eq!(relative_error(1e-9, 0.0), 1e-3);
    }
}
