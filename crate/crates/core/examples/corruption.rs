//! Error model: bias, scale factor and white noise on the beam velocities.
//!
//! `cargo run --example corruption`

use dvl_beams::error_model::{corrupt_series, ErrorParams};
use dvl_beams::geometry::{project_to_beams, solve_velocity, BeamGeometry, DvlVelocity};

fn main() {
    let geom = BeamGeometry::from_degrees(20.0).unwrap();
    let v = DvlVelocity::new(1.0, 0.0, 0.05);
    let velocities = vec![v; 100_000];
    let params = ErrorParams {
        bias: [0.001; 4],
        scale: [0.0; 3],
        noise_std: 0.001,
        seed: 7,
    };
    let clean = project_to_beams(&geom, &v);
    let corrupted = corrupt_series(&geom, &velocities, &params).unwrap();

    let m = corrupted.len() as f64;
    for beam in 0..4 {
        let mean = corrupted.iter().map(|b| b.0[beam] - clean.0[beam]).sum::<f64>() / m;
        println!("beam {}: mean error {mean:+.6} m/s (bias {:.3})", beam + 1, params.bias[beam]);
    }

    let first = solve_velocity(&geom, &corrupted[0].0, &[true; 4]).unwrap();
    println!("true speed {:.5} m/s, speed from one corrupted epoch {:.5} m/s", v.norm(), first.norm());

    let scaled = ErrorParams {
        scale: [0.01, 0.0, 0.0],
        ..ErrorParams::ideal()
    };
    let b = corrupt_series(&geom, &[v], &scaled).unwrap();
    let est = solve_velocity(&geom, &b[0].0, &[true; 4]).unwrap();
    println!("1% x-axis scale factor: recovered v_x = {:.4}", est.0[0]);
}
