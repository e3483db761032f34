use std::fs;
use std::path::{Path, PathBuf};

use tcr::cli::{run, EXIT_DATA, EXIT_OK, EXIT_USAGE};

const SMALL: &str = r#"
seed = 3
[synth]
train_per_dataset = 4
test_per_dataset = 2
image_px = 160
[cascade]
num_stages = 1
"#;

fn args(list: &[&Path]) -> Vec<String> {
    std::iter::once("tcr".to_string())
        .chain(list.iter().map(|p| p.to_string_lossy().into_owned()))
        .collect()
}

fn synth(dir: &Path) -> PathBuf {
    let config = dir.join("run.toml");
    fs::write(&config, SMALL).unwrap();
    let out = dir.join("corpus");
    let code = run(args(&[
        Path::new("--config"),
        &config,
        Path::new("--out"),
        &out,
        Path::new("synth"),
    ]));
    assert_eq!(code, EXIT_OK);
    out
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(run(["tcr", "frobnicate"]), EXIT_USAGE);
    assert_eq!(run(["tcr"]), EXIT_USAGE);
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[pipeline]\nepsilon = -2.0\n").unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        run(args(&[
            Path::new("--config"),
            &config,
            Path::new("--out"),
            &out,
            Path::new("synth")
        ])),
        EXIT_USAGE
    );
    fs::write(&config, "no_such_key = 1\n").unwrap();
    assert_eq!(
        run(args(&[
            Path::new("--config"),
            &config,
            Path::new("--out"),
            &out,
            Path::new("synth")
        ])),
        EXIT_USAGE
    );
}

#[test]
fn missing_manifest_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = dir.path().join("o");
    assert_eq!(
        run(args(&[
            Path::new("--out"),
            &out,
            Path::new("train"),
            Path::new("--manifest"),
            &missing
        ])),
        EXIT_DATA
    );
}

#[test]
fn eval_of_ground_truth_predictions_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path());
    let preds = dir.path().join("preds");
    fs::create_dir(&preds).unwrap();
    for entry in fs::read_dir(corpus.join("synth_b/annotations")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("synth_b_test_") && name.matches('.').count() == 1 {
            fs::copy(&path, preds.join(&name)).unwrap();
        }
    }
    let out = dir.path().join("eval");
    let code = run(args(&[
        Path::new("--out"),
        &out,
        Path::new("eval"),
        Path::new("--manifest"),
        &corpus.join("synth_b/test.toml"),
        Path::new("--predictions"),
        &preds,
        Path::new("--subset"),
        Path::new("common"),
        Path::new("--correspondence"),
        &corpus.join("correspondence.toml"),
    ]));
    assert_eq!(code, EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["mean_error"].as_f64(), Some(0.0));
    assert_eq!(report["failure_rate"].as_f64(), Some(0.0));
    assert_eq!(report["per_sample_errors"].as_array().unwrap().len(), 2);
    assert!(out.join("per_sample.csv").exists());
}

#[test]
fn eval_with_a_missing_prediction_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path());
    let preds = dir.path().join("empty");
    fs::create_dir(&preds).unwrap();
    let out = dir.path().join("eval");
    let code = run(args(&[
        Path::new("--out"),
        &out,
        Path::new("eval"),
        Path::new("--manifest"),
        &corpus.join("synth_a/test.toml"),
        Path::new("--predictions"),
        &preds,
    ]));
    assert_eq!(code, EXIT_DATA);
}

#[test]
fn fuse_then_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path());
    let config = dir.path().join("run.toml");
    let out = dir.path().join("fused");
    let code = run(args(&[
        Path::new("--config"),
        &config,
        Path::new("--out"),
        &out,
        Path::new("fuse"),
        Path::new("--source"),
        &corpus.join("synth_a/train.toml"),
        Path::new("--target"),
        &corpus.join("synth_b/train.toml"),
        Path::new("--correspondence"),
        &corpus.join("correspondence.toml"),
    ]));
    assert_eq!(code, EXIT_OK);
    assert!(out.join("tcr_log.json").exists());
    let eval = dir.path().join("eval");
    let code = run(args(&[
        Path::new("--out"),
        &eval,
        Path::new("eval"),
        Path::new("--manifest"),
        &corpus.join("synth_b/test.toml"),
        Path::new("--model"),
        &out.join("model.tcr"),
    ]));
    assert_eq!(code, EXIT_OK);
    assert!(fs::read_to_string(eval.join("eval.csv")).unwrap().lines().count() >= 2);
}
