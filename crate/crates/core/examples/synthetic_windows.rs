//! Dataset: synthesize a sway trajectory, corrupt it, write it as CSV, read
//! it back and cut it into past-window samples with beams 3 and 4 missing.
//!
//! `cargo run --example synthetic_windows`

use dvl_beams::dataset::{load_csv, make_windows, synth_trajectory, write_csv, BeamMask, CsvSchema, Profile, Section};
use dvl_beams::error_model::ErrorParams;
use dvl_beams::geometry::BeamGeometry;

fn main() {
    let geom = BeamGeometry::from_degrees(20.0).unwrap();
    let velocities = synth_trajectory(Profile::SinusoidalSway, 120, 11).unwrap();
    let section = Section::from_velocities("sway", &velocities, &geom, &ErrorParams::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sway.csv");
    write_csv(&path, &section).unwrap();
    let reloaded = load_csv(&path, &CsvSchema::default(), &geom).unwrap();
    println!("wrote and reloaded {} epochs from {}", reloaded.len(), path.display());

    let mask = BeamMask::from_beam_numbers(&[3, 4]).unwrap();
    let windows = make_windows(&reloaded, 3, mask).unwrap();
    println!("{} windows of 3 past epochs, missing beams {mask}", windows.len());
    let w = &windows[0];
    for (t, row) in w.times.iter().zip(&w.past) {
        println!("  t={t:>4}: {row:+.4?}");
    }
    println!(
        "  t={:>4}: available {:+.4?}, target {:+.4?}",
        w.times[3], w.current_available, w.target_missing
    );
}
