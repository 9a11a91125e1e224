use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dvl_beams::config::ExperimentConfig;
use dvl_beams::dataset::Role;
use dvl_beams::experiment::{build_sections, pooled_windows};

const SMALL: &[&str] = &[
    "--set",
    "data.synthetic.train_sections=2",
    "--set",
    "data.synthetic.test_sections=1",
    "--set",
    "data.synthetic.duration_s=60",
    "--set",
    "libeamsnet.hidden=[8]",
    "--set",
    "libeamsnet.train.epochs=5",
    "--set",
    "libeamsnet.train.decay_epoch=3",
    "--set",
    "missbeamnet.hidden=8",
    "--set",
    "missbeamnet.train.epochs=5",
    "--set",
    "missbeamnet.train.decay_epoch=3",
];

fn dvl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvl-beams"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn with_small<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(SMALL.iter().copied()).collect()
}

fn data_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().skip(1).count()
}

#[test]
fn train_then_eval_writes_losses_checkpoints_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let train = dvl(&with_small(&["train", "--out", out, "--seed", "9"]));
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    for key in ["libeamsnet", "missbeamnet"] {
        assert!(dir.path().join(format!("checkpoints/{key}.ckpt")).is_file());
        assert_eq!(data_rows(&dir.path().join(format!("losses/loss_{key}.csv"))), 5);
    }
    assert!(dir.path().join("resolved_config.toml").is_file());

    let eval = dvl(&with_small(&["eval", "--out", out, "--seed", "9", "--oracle"]));
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));
    let table = String::from_utf8_lossy(&eval.stdout);
    for column in ["LiBeamsNet", "MissBeamNet", "Average", "Oracle"] {
        assert!(table.contains(column), "{table}");
    }
    for file in ["report.txt", "report.csv", "sections.csv", "beams.csv"] {
        assert!(dir.path().join("reports").join(file).is_file(), "{file}");
    }
    let report = fs::read_to_string(dir.path().join("reports/report.txt")).unwrap();
    assert!(report.contains("seed = 9"));
}

#[test]
fn eval_rejects_a_checkpoint_built_for_another_window() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(dvl(&with_small(&["train", "--out", out])).status.success());
    let eval = dvl(&with_small(&["eval", "--out", out, "--set", "window.past=4"]));
    assert_eq!(eval.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&eval.stderr).contains("mismatch"));
}

#[test]
fn eval_without_checkpoints_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let eval = dvl(&with_small(&["eval", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(eval.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&eval.stderr).contains("missing checkpoint"));
}

#[test]
fn validate_lists_every_violation() {
    let bad = dvl(&["validate", "--set", "window.missing=[1,1]", "--set", "geometry.alpha_deg=95"]);
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("window.missing") && err.contains("geometry.alpha_deg"), "{err}");
    assert_eq!(dvl(&["validate"]).status.code(), Some(0));
}

#[test]
fn simulated_sections_load_back_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dvl(&with_small(&["simulate", "--out", dir.path().to_str().unwrap()]));
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let written = String::from_utf8_lossy(&sim.stdout);
    assert_eq!(written.lines().count(), 3);

    let synthetic = ExperimentConfig::from_toml_str(
        "[data.synthetic]\ntrain_sections = 2\ntest_sections = 1\nduration_s = 60\n",
        &[],
        None,
    )
    .unwrap();
    let text = "[data]\nsource = \"csv\"\n[data.csv]\ncorrupt = false\n\
        [[data.csv.sections]]\npath = \"data/train_01.csv\"\nrole = \"train\"\n\
        [[data.csv.sections]]\npath = \"data/train_02.csv\"\nrole = \"train\"\n\
        [[data.csv.sections]]\npath = \"data/test_01.csv\"\nrole = \"test\"\n";
    let cfg_path = dir.path().join("recorded.toml");
    fs::write(&cfg_path, text).unwrap();
    let recorded = ExperimentConfig::load(Some(&cfg_path), &[]).unwrap();
    assert_eq!(dvl(&["validate", "--config", cfg_path.to_str().unwrap()]).status.code(), Some(0));

    for role in [Role::Train, Role::Test] {
        let a = pooled_windows(&synthetic, &build_sections(&synthetic).unwrap(), role).unwrap();
        let b = pooled_windows(&recorded, &build_sections(&recorded).unwrap(), role).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.past.iter().flatten().zip(y.past.iter().flatten()) {
                assert!((p - q).abs() < 1e-9);
            }
            for (p, q) in x.target_all.iter().zip(&y.target_all) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn embedded_config_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(dvl(&with_small(&["train", "--out", out, "--seed", "4"])).status.success());
    assert!(dvl(&with_small(&["eval", "--out", out, "--seed", "4"])).status.success());
    let reports = dir.path().join("reports");
    let before: Vec<Vec<u8>> = ["report.txt", "report.csv", "sections.csv", "beams.csv"]
        .iter()
        .map(|f| fs::read(reports.join(f)).unwrap())
        .collect();

    let text = String::from_utf8(before[0].clone()).unwrap();
    let embedded = text.split("# Resolved configuration\n").nth(1).expect("config section");
    let cfg_path = dir.path().join("embedded.toml");
    fs::write(&cfg_path, embedded).unwrap();
    let rerun = dvl(&["eval", "--config", cfg_path.to_str().unwrap()]);
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    for (f, old) in ["report.txt", "report.csv", "sections.csv", "beams.csv"].iter().zip(&before) {
        assert_eq!(&fs::read(reports.join(f)).unwrap(), old, "{f}");
    }
}
