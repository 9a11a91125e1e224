//! Neural toolkit: compare backpropagated gradients with central finite
//! differences for a small network of every layer kind.
//!
//! `cargo run --example gradient_check`

use dvl_beams::nn::gradcheck::check_gradients;
use dvl_beams::nn::{Activation, LayerSpec, ModelState, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases: Vec<(&str, Vec<LayerSpec>, Vec<usize>, usize)> = vec![
        (
            "conv1d + tanh + dense",
            vec![
                LayerSpec::Conv1d { in_channels: 4, out_channels: 6, kernel: 2, length: 3 },
                LayerSpec::Activation { function: Activation::Tanh },
                LayerSpec::Dense { inputs: 12, outputs: 4 },
            ],
            vec![4, 3],
            0,
        ),
        (
            "lstm + concat + dense",
            vec![
                LayerSpec::Lstm { inputs: 4, hidden: 7 },
                LayerSpec::Concat { width: 2 },
                LayerSpec::Dense { inputs: 9, outputs: 2 },
            ],
            vec![3, 4],
            2,
        ),
    ];
    for (name, specs, shape, side) in cases {
        let state = ModelState::init(specs, shape.clone(), &mut rng).unwrap();
        let mut full = vec![2];
        full.extend(&shape);
        let n: usize = full.iter().product();
        let x = Tensor::from_vec(&full, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let s = (side > 0).then(|| Tensor::from_vec(&[2, side], (0..2 * side).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap());
        let report = check_gradients(&state, &x, s.as_ref(), 0, 1e-5).unwrap();
        println!(
            "{name}: {} parameters, max relative error {:.2e}",
            report.checked, report.max_rel_error
        );
    }
}
