//! End-to-end command-line workflow tests: staged runs, idempotency,
//! artifact dependencies, and exit codes.

use std::path::Path;

use avel::cli::run;
use avel::model::{save_checkpoint, ModelConfig, ModelParams};

fn avel(args: &[&str]) -> i32 {
    run(std::iter::once("avel").chain(args.iter().copied()))
}

const SMALL_CONFIG: &str = r#"
[corpus]
train_events = 10
val_events = 2
test_events = 4
background_videos = 3
segments = 10
num_classes = 4
audio_dim = 4
visual_dim = 4
seed = 91

[model]
hidden = 8
seed = 92

[train]
stage1_epochs = 4
stage3_epochs = 3
batch_size = 8
seed = 93

[run]
taus = [0.03, 0.05]
windows = [[4, 2], [3, 2]]
"#;

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, SMALL_CONFIG).unwrap();
    path.display().to_string()
}

#[test]
fn staged_workflow_produces_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.display().to_string();
    let config = write_config(dir.path());

    for cmd in ["gen", "train", "refine", "retrain"] {
        let code = avel(&[cmd, "--config", &config, "--out", &out_str]);
        assert_eq!(code, 0, "{cmd} failed");
    }
    let code = avel(&["eval", "--config", &config, "--out", &out_str]);
    assert_eq!(code, 0, "eval failed");

    for artifact in [
        "corpus.txt",
        "stage1.ckpt",
        "stage1_loss.txt",
        "refined.txt",
        "stage3.ckpt",
        "stage3_loss.txt",
        "metrics.txt",
        "metrics_table.txt",
        "config-gen.toml",
        "config-eval.toml",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
}

#[test]
fn commands_are_byte_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.display().to_string();
    let config = write_config(dir.path());

    assert_eq!(avel(&["gen", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(avel(&["train", "--config", &config, "--out", &out_str]), 0);
    let corpus_1 = std::fs::read(out.join("corpus.txt")).unwrap();
    let ckpt_1 = std::fs::read(out.join("stage1.ckpt")).unwrap();
    let cfg_1 = std::fs::read(out.join("config-train.toml")).unwrap();

    assert_eq!(avel(&["gen", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(avel(&["train", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(corpus_1, std::fs::read(out.join("corpus.txt")).unwrap());
    assert_eq!(ckpt_1, std::fs::read(out.join("stage1.ckpt")).unwrap());
    assert_eq!(cfg_1, std::fs::read(out.join("config-train.toml")).unwrap());
}

#[test]
fn thread_cap_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, threads) in [(&out_a, "1"), (&out_b, "4")] {
        let out_str = out.display().to_string();
        assert_eq!(
            avel(&["gen", "--config", &config, "--out", &out_str, "--threads", threads]),
            0
        );
        assert_eq!(
            avel(&["train", "--config", &config, "--out", &out_str, "--threads", threads]),
            0
        );
    }
    assert_eq!(
        std::fs::read(out_a.join("stage1.ckpt")).unwrap(),
        std::fs::read(out_b.join("stage1.ckpt")).unwrap()
    );
}

#[test]
fn missing_artifacts_exit_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out_str = dir.path().join("empty").display().to_string();
    let config = write_config(dir.path());
    // train before gen: corpus.txt is missing.
    assert_eq!(avel(&["train", "--config", &config, "--out", &out_str]), 2);
    // eval before retrain: checkpoint missing.
    assert_eq!(avel(&["eval", "--config", &config, "--out", &out_str]), 2);
}

#[test]
fn config_errors_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[corpus]\nnot_a_field = 1\n").unwrap();
    let bad_str = bad.display().to_string();
    assert_eq!(avel(&["gen", "--config", &bad_str]), 1);

    // Impossible corpus spec: min event length exceeds T.
    let impossible = dir.path().join("impossible.toml");
    std::fs::write(&impossible, "[corpus]\nsegments = 10\nmin_event_len = 11\n").unwrap();
    let impossible_str = impossible.display().to_string();
    assert_eq!(avel(&["gen", "--config", &impossible_str]), 1);

    // Unknown flag is a usage error.
    assert_eq!(avel(&["gen", "--bogus"]), 1);
}

#[test]
fn stale_format_version_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.display().to_string();
    let config = write_config(dir.path());
    assert_eq!(avel(&["gen", "--config", &config, "--out", &out_str]), 0);
    let corpus = std::fs::read_to_string(out.join("corpus.txt")).unwrap();
    std::fs::write(
        out.join("corpus.txt"),
        corpus.replace("avel-corpus v1", "avel-corpus v0"),
    )
    .unwrap();
    assert_eq!(avel(&["train", "--config", &config, "--out", &out_str]), 2);
}

#[test]
fn eval_on_zero_checkpoint_reports_class_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.display().to_string();
    let config = write_config(dir.path());
    assert_eq!(avel(&["gen", "--config", &config, "--out", &out_str]), 0);

    let model_cfg = ModelConfig {
        audio_dim: 4,
        visual_dim: 4,
        hidden: 8,
        num_classes: 4,
        context_radius: 1,
        seed: 92,
    };
    let zero_path = out.join("zero.ckpt");
    save_checkpoint(&ModelParams::zeros(&model_cfg), &zero_path).unwrap();
    let zero_str = zero_path.display().to_string();
    assert_eq!(
        avel(&[
            "eval",
            "--config",
            &config,
            "--out",
            &out_str,
            "--checkpoint",
            &zero_str
        ]),
        0
    );
    // All probability mass lands on class 1 via the tie-break, so the
    // model's confusion matrix puts every prediction in column 1.
    let records = std::fs::read_to_string(out.join("metrics.txt")).unwrap();
    let model_block: Vec<&str> = records
        .split("method ")
        .find(|b| b.starts_with("model"))
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("confusion"))
        .collect();
    assert_eq!(model_block.len(), 5);
    for line in model_block {
        let fields: Vec<&str> = line.split_whitespace().collect();
        // confusion <truth> <pred-1> ... <pred-5>
        for extra in &fields[3..] {
            assert_eq!(*extra, "0", "predictions outside class 1 in {line}");
        }
    }
}

#[test]
fn tau_and_window_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.display().to_string();
    let config = write_config(dir.path());
    assert_eq!(avel(&["gen", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(avel(&["train", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(
        avel(&[
            "refine",
            "--config",
            &config,
            "--out",
            &out_str,
            "--tau",
            "0.2",
            "--window",
            "5,5"
        ]),
        0
    );
    let refined = std::fs::read_to_string(out.join("refined.txt")).unwrap();
    assert!(refined.contains("tau=0.2 n=5 s=5"), "{refined}");
    let resolved = std::fs::read_to_string(out.join("config-refine.toml")).unwrap();
    assert!(resolved.contains("tau = 0.2"));
}

#[test]
fn sweep_commands_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out_str = out.display().to_string();
    let config = write_config(dir.path());
    assert_eq!(avel(&["gen", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(avel(&["sweep", "tau", "--config", &config, "--out", &out_str]), 0);
    assert_eq!(
        avel(&["sweep", "window", "--config", &config, "--out", &out_str]),
        0
    );
    let tau_report = std::fs::read_to_string(out.join("sweep_tau.txt")).unwrap();
    assert!(tau_report.starts_with("avel-sweep v1"));
    assert_eq!(tau_report.matches("cell tau=").count(), 2);
    let window_report = std::fs::read_to_string(out.join("sweep_window.txt")).unwrap();
    // (3, 2) on T=10 violates stride divisibility and is recorded.
    assert!(window_report.contains("status=rejected"), "{window_report}");
    assert!(window_report.contains("cell N=4,s=2 t1=4"), "{window_report}");
}
