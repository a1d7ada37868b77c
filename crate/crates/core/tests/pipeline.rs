use std::fs;

use murmurlab::corpus::Workspace;
use murmurlab::learners::ModelKind;
use murmurlab::pipeline::stages::{Runner, StageStatus, FEATURES_FILE, REPORT_FILE, SUMMARY_FILE};
use murmurlab::pipeline::{run_synthetic, Config, PipelineError, Stage};

fn small_config(seed: u64) -> Config {
    let mut cfg = Config {
        seed,
        ..Config::default()
    };
    cfg.synth.class_counts = [7, 6, 7];
    cfg.synth.duration_s = 6.0;
    cfg.models.random_forest.n_trees = 15;
    cfg.models.adaboost.n_rounds = 15;
    cfg.models.gradient_boost.n_rounds = 15;
    cfg
}

#[test]
fn full_run_reports_every_classifier_on_both_label_sets() {
    let dir = tempfile::tempdir().unwrap();
    let runner = Runner::new(Workspace::new(dir.path()), small_config(3));
    let statuses = runner.run_all().unwrap();
    assert_eq!(statuses.len(), Stage::ALL.len());
    assert!(statuses.iter().all(|(_, s)| *s == StageStatus::Ran));

    let report = fs::read_to_string(dir.path().join("reports").join(REPORT_FILE)).unwrap();
    for dataset in ["SC", "HQ"] {
        for kind in ModelKind::ALL {
            let tag = format!("{dataset},{}", kind.as_str());
            assert!(report.lines().any(|l| l.starts_with(&tag)), "no {tag} rows in\n{report}");
        }
    }
    let summary = fs::read_to_string(dir.path().join("reports").join(SUMMARY_FILE)).unwrap();
    assert!(summary.starts_with("seed 3\n"));
    assert!(summary.contains("Krippendorff alpha"));
    for stage in Stage::ALL {
        let stamp = fs::read_to_string(dir.path().join("stamps").join(format!("{stage}.json"))).unwrap();
        let v: serde_json::Value = serde_json::from_str(&stamp).unwrap();
        assert_eq!(v["seed"], 3);
    }
}

#[test]
fn rerun_is_up_to_date_and_edits_trigger_downstream_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(4);
    cfg.train.classifiers = vec![ModelKind::GradientBoost];
    let runner = Runner::new(Workspace::new(dir.path()), cfg.clone());
    runner.run_all().unwrap();
    let again = runner.run_all().unwrap();
    assert!(again.iter().all(|(_, s)| *s == StageStatus::UpToDate), "{again:?}");

    // Tampering with an output makes that stage stale.
    let features = dir.path().join("features").join(FEATURES_FILE);
    fs::write(&features, "garbage\n").unwrap();
    assert_eq!(runner.run_stage(Stage::Features).unwrap(), StageStatus::Ran);
    assert_eq!(runner.run_stage(Stage::Train).unwrap(), StageStatus::UpToDate);

    // A changed config invalidates everything downstream of it.
    let mut changed = cfg;
    changed.models.gradient_boost.learning_rate = 0.2;
    let runner = Runner::new(Workspace::new(dir.path()), changed);
    assert_eq!(runner.run_stage(Stage::Train).unwrap(), StageStatus::Ran);
}

#[test]
fn same_config_and_seed_give_byte_identical_reports() {
    let mut cfg = small_config(5);
    cfg.train.classifiers = vec![ModelKind::RandomForest, ModelKind::GradientBoost];
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        Runner::new(Workspace::new(dir.path()), cfg.clone()).run_all().unwrap();
        let read = |sub: &str, f: &str| fs::read(dir.path().join(sub).join(f)).unwrap();
        outputs.push((
            read("reports", REPORT_FILE),
            read("reports", SUMMARY_FILE),
            read("features", FEATURES_FILE),
            read("models", "hq_gradient_boost.json"),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn missing_inputs_name_the_stage_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let runner = Runner::new(Workspace::new(dir.path()), small_config(6));
    let err = runner.run_stage(Stage::Select).unwrap_err();
    assert!(matches!(err, PipelineError::MissingInput { stage: Stage::Select, .. }), "{err}");
    assert!(err.to_string().contains("labelmatrix.csv"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn synth_never_replaces_foreign_recordings() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path());
    ws.create_dirs().unwrap();
    fs::write(ws.recordings().join("dog1.wav"), b"not really").unwrap();
    let runner = Runner::new(ws.clone(), small_config(7));
    assert!(runner.run_stage(Stage::Synth).is_err());
    assert!(ws.recordings().join("dog1.wav").exists());
}

#[test]
fn in_memory_and_staged_runs_agree() {
    let mut cfg = small_config(8);
    cfg.train.classifiers = vec![ModelKind::Adaboost];
    let dir = tempfile::tempdir().unwrap();
    Runner::new(Workspace::new(dir.path()), cfg.clone()).run_all().unwrap();
    let staged = fs::read_to_string(dir.path().join("reports").join(REPORT_FILE)).unwrap();
    let exp = run_synthetic(&cfg).unwrap();
    let hq = exp.report("HQ", ModelKind::Adaboost).unwrap();
    let ba = format!("{}", hq.balanced.balanced_accuracy);
    assert!(staged.contains(&ba), "{ba} not in\n{staged}");
}
