//! Metrics: build a strategy comparison table with improvements relative to
//! the average estimator.
//!
//! `cargo run --example results_table`

use dvl_beams::metrics::{improvement_percent, EvalReport, MetricRow, NormSeries};

fn main() {
    let truth = NormSeries::new(vec![1.00, 1.05, 1.10, 1.08, 1.02, 0.97]).unwrap();
    let strategies = [
        ("Average", vec![1.06, 1.01, 1.17, 1.02, 1.07, 0.93]),
        ("LiBeamsNet", vec![1.01, 1.04, 1.12, 1.07, 1.03, 0.96]),
        ("MissBeamNet", vec![1.00, 1.06, 1.09, 1.08, 1.01, 0.98]),
    ];
    let rows = strategies
        .iter()
        .map(|(name, p)| (name.to_string(), MetricRow::compute(&truth, &NormSeries::new(p.clone()).unwrap()).unwrap()))
        .collect();
    let report = EvalReport::new(rows, "Average").unwrap();
    print!("{}", report.to_table());
    println!();
    print!("{}", report.to_csv());
    println!("\nimprovement of 0.0653 over 0.0794: {:.2}%", improvement_percent(0.0794, 0.0653).unwrap());
}
