//! MissBeamNet: train the LSTM on synthetic sway sections and compare it
//! with the average estimator on held-out sections.
//!
//! `cargo run --release --example train_missbeamnet`

use dvl_beams::dataset::{make_windows, synth_trajectory, BeamMask, Profile, Section, WindowSample};
use dvl_beams::error_model::ErrorParams;
use dvl_beams::estimators::{recover_velocity, train, EstimatorKind, MissBeamNetConfig, NetworkConfig};
use dvl_beams::geometry::{solve_velocity, BeamGeometry};
use dvl_beams::metrics::{rmse, NormSeries};
use dvl_beams::nn::TrainConfig;

fn windows(geom: &BeamGeometry, seeds: std::ops::Range<u64>) -> Vec<WindowSample> {
    seeds
        .flat_map(|seed| {
            let v = synth_trajectory(Profile::SinusoidalSway, 300, seed).unwrap();
            let params = ErrorParams {
                seed: seed + 100,
                ..Default::default()
            };
            let section = Section::from_velocities(format!("s{seed}"), &v, geom, &params).unwrap();
            make_windows(&section, 3, BeamMask::default()).unwrap()
        })
        .collect()
}

fn speed_rmse(geom: &BeamGeometry, model: &EstimatorKind, test: &[WindowSample]) -> f64 {
    let preds = model.predict_missing(test).unwrap();
    let truth: Vec<f64> = test
        .iter()
        .map(|w| solve_velocity(geom, &w.target_all, &[true; 4]).unwrap().norm())
        .collect();
    let est: Vec<f64> = test.iter().zip(&preds).map(|(w, p)| recover_velocity(geom, w, p).unwrap().norm()).collect();
    rmse(&NormSeries::new(truth).unwrap(), &NormSeries::new(est).unwrap()).unwrap()
}

fn main() {
    let geom = BeamGeometry::from_degrees(20.0).unwrap();
    let (train_set, test_set) = (windows(&geom, 0..6), windows(&geom, 50..52));
    let cfg = NetworkConfig::MissBeamNet(MissBeamNetConfig {
        hidden: 128,
        train: TrainConfig {
            epochs: 20,
            decay_epoch: 10,
            seed: 1,
            ..Default::default()
        },
    });
    let (model, history) = train(&cfg, &train_set, &test_set).unwrap();
    for e in history.0.iter().step_by(5) {
        println!("epoch {:>2}: train {:.3e}, test {:.3e}", e.epoch, e.train_loss, e.test_loss);
    }
    let net = speed_rmse(&geom, &model, &test_set);
    let avg = speed_rmse(&geom, &EstimatorKind::Average, &test_set);
    println!("speed RMSE: MissBeamNet {net:.4} m/s, average {avg:.4} m/s");
}
