//! Average estimator: fill the missing beams with the mean of the past
//! window and score the recovered speed against the all-beam solution.
//!
//! `cargo run --example average_baseline`

use dvl_beams::dataset::{make_windows, synth_trajectory, BeamMask, Profile, Section};
use dvl_beams::error_model::ErrorParams;
use dvl_beams::estimators::{average_predict, recover_velocity};
use dvl_beams::geometry::{solve_velocity, BeamGeometry};
use dvl_beams::metrics::{MetricRow, NormSeries};

fn main() {
    let geom = BeamGeometry::from_degrees(20.0).unwrap();
    let velocities = synth_trajectory(Profile::SinusoidalSway, 400, 3).unwrap();
    let section = Section::from_velocities("test", &velocities, &geom, &ErrorParams::default()).unwrap();

    for n in [1, 3, 5, 10] {
        let windows = make_windows(&section, n, BeamMask::default()).unwrap();
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for w in &windows {
            truth.push(solve_velocity(&geom, &w.target_all, &[true; 4]).unwrap().norm());
            pred.push(recover_velocity(&geom, w, &average_predict(w)).unwrap().norm());
        }
        let m = MetricRow::compute(&NormSeries::new(truth).unwrap(), &NormSeries::new(pred).unwrap()).unwrap();
        println!(
            "N = {n:>2}: RMSE {:.4} m/s, MAE {:.4} m/s, R2 {:.4}, VAF {:.2}",
            m.rmse, m.mae, m.r2, m.vaf
        );
    }
}
