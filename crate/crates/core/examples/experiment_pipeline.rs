//! Config-driven experiment: train both networks, evaluate every strategy
//! and write the report, as the `dvl-beams train` and `eval` commands do.
//!
//! `cargo run --release --example experiment_pipeline`

use dvl_beams::config::ExperimentConfig;
use dvl_beams::experiment::{cmd_eval, cmd_train, report_dir};

fn main() {
    let out = tempfile::tempdir().unwrap();
    let overrides = [
        "data.synthetic.train_sections=6".to_string(),
        "data.synthetic.test_sections=1".to_string(),
        "data.synthetic.duration_s=300".to_string(),
        "missbeamnet.hidden=64".to_string(),
        "libeamsnet.train.epochs=20".to_string(),
        "libeamsnet.train.decay_epoch=15".to_string(),
        "missbeamnet.train.epochs=20".to_string(),
        "missbeamnet.train.decay_epoch=15".to_string(),
        format!("output_dir={}", toml::Value::String(out.path().display().to_string())),
    ];
    let cfg = ExperimentConfig::from_toml_str("", &overrides, None).unwrap();
    for t in cmd_train(&cfg).unwrap() {
        println!("{}: checkpoint {}", t.model.tag(), t.checkpoint.display());
    }
    let eval = cmd_eval(&cfg, &[], true).unwrap();
    print!("{}", eval.pooled.to_table());
    for (section, report) in &eval.sections {
        if let Ok(r) = report {
            let avg = r.get("Average").map_or(f64::NAN, |s| s.metrics.rmse);
            println!("{section}: average RMSE {avg:.4}");
        }
    }
    println!("reports in {}", report_dir(&cfg.output_dir).display());
}
