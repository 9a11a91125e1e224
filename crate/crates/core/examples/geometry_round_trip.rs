//! Beam geometry: project a velocity onto the four beams and solve it back
//! from every usable beam subset.
//!
//! `cargo run --example geometry_round_trip`

use dvl_beams::geometry::{project_to_beams, solve_velocity, BeamGeometry, DvlVelocity};

fn main() {
    let geom = BeamGeometry::from_degrees(20.0).expect("valid pitch angle");
    println!("transducer matrix (alpha = 20 deg):");
    for (i, row) in geom.matrix().iter().enumerate() {
        println!("  beam {}: [{:+.6}, {:+.6}, {:+.6}]", i + 1, row[0], row[1], row[2]);
    }
    let n = geom.normal_matrix();
    println!("T^T T diagonal: {:.6} {:.6} {:.6}", n[0][0], n[1][1], n[2][2]);

    let v = DvlVelocity::new(1.2, -0.3, 0.08);
    let beams = project_to_beams(&geom, &v);
    println!("v = {:?}\nbeams = {:?}", v.0, beams.0);

    let subsets: [[bool; 4]; 6] = [
        [true; 4],
        [false, true, true, true],
        [true, false, true, true],
        [true, true, false, true],
        [true, true, true, false],
        [true, true, false, false],
    ];
    for active in subsets {
        match solve_velocity(&geom, &beams.0, &active) {
            Ok(est) => {
                let err = (0..3).map(|k| (est.0[k] - v.0[k]).abs()).fold(0.0, f64::max);
                println!("  active {active:?}: max error {err:.2e}");
            }
            Err(e) => println!("  active {active:?}: {e}"),
        }
    }
}
