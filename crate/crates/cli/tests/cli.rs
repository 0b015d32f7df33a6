//! End-to-end tests of the `prsel` binary: subcommand wiring, run-directory
//! persistence, rerun determinism, and the plug-and-play contract at the
//! report level.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prsel"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn prsel");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, name: &str, n_dialogues: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    run_ok(bin().args([
        "corpus",
        "synth",
        "--kind",
        "personachat",
        "--output",
        path.to_str().unwrap(),
        "--n-dialogues",
        &n_dialogues.to_string(),
        "--seed",
        &seed.to_string(),
    ]));
    path
}

fn only_run_subdir(root: &Path) -> PathBuf {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(entries.len(), 1, "expected exactly one run dir in {root:?}");
    entries.pop().unwrap()
}

#[test]
fn rerun_with_identical_config_is_byte_identical_modulo_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = synth(tmp.path(), "data.jsonl", 30, 9);

    let eval = |root: &Path| {
        run_ok(bin().args([
            "eval",
            "--method",
            "srs",
            "--dataset",
            dataset.to_str().unwrap(),
            "--run-root",
            root.to_str().unwrap(),
        ]));
        let run_dir = only_run_subdir(root);
        std::fs::read(run_dir.join("report.json")).unwrap()
    };
    let a = eval(&tmp.path().join("runs-a"));
    let b = eval(&tmp.path().join("runs-b"));
    assert_eq!(a, b, "report.json must be byte-identical across reruns");
}

#[test]
fn persona_disabled_p5_report_equals_srs_report_metric_for_metric() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = synth(tmp.path(), "data.jsonl", 30, 4);

    let run = |method: &str, extra: &[&str], root: &Path| -> serde_json::Value {
        let mut args = vec![
            "eval",
            "--method",
            method,
            "--dataset",
            dataset.to_str().unwrap(),
            "--run-root",
            root.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        run_ok(bin().args(&args));
        let report = std::fs::read_to_string(only_run_subdir(root).join("report.json")).unwrap();
        serde_json::from_str(&report).unwrap()
    };
    let srs = run("srs", &[], &tmp.path().join("r1"));
    let p5_off = run(
        "p5",
        &["--persona-enabled", "false"],
        &tmp.path().join("r2"),
    );
    assert_eq!(
        srs["grid"][0]["value"], p5_off["grid"][0]["value"],
        "metric values must match"
    );
    assert_eq!(srs["grid"][0]["n"], p5_off["grid"][0]["n"]);
}

#[test]
fn eval_run_directory_is_self_describing() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = synth(tmp.path(), "data.jsonl", 25, 6);
    let root = tmp.path().join("runs");
    run_ok(bin().args([
        "eval",
        "--method",
        "p5",
        "--dataset",
        dataset.to_str().unwrap(),
        "--run-root",
        root.to_str().unwrap(),
    ]));
    let run_dir = only_run_subdir(&root);
    for file in ["report.json", "report.txt", "report.csv", "manifest.json"] {
        assert!(run_dir.join(file).exists(), "{file} missing");
    }
    assert!(run_dir.join("rankings-p5_zero.jsonl").exists());

    // `report --verify` recomputes the metric from the dump.
    let out = run_ok(bin().args([
        "report",
        "--from",
        run_dir.to_str().unwrap(),
        "--verify",
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("verified 1 cells"), "got: {stdout}");
}

#[test]
fn config_precedence_flag_beats_file() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = synth(tmp.path(), "data.jsonl", 25, 2);
    let config_path = tmp.path().join("prsel.toml");
    std::fs::write(&config_path, "[grounding]\nk = 4\n").unwrap();

    let manifest_k = |extra: &[&str], root: &Path| -> u64 {
        let mut args = vec![
            "eval",
            "--method",
            "p5",
            "--dataset",
            dataset.to_str().unwrap(),
            "--config",
            config_path.to_str().unwrap(),
            "--run-root",
            root.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        run_ok(bin().args(&args));
        let manifest =
            std::fs::read_to_string(only_run_subdir(root).join("manifest.json")).unwrap();
        let value: serde_json::Value = serde_json::from_str(&manifest).unwrap();
        value["config"]["grounding"]["k"].as_u64().unwrap()
    };
    // File beats default.
    assert_eq!(manifest_k(&[], &tmp.path().join("rf")), 4);
    // Flag beats file.
    assert_eq!(manifest_k(&["--k", "1"], &tmp.path().join("rk")), 1);
}

#[test]
fn seq_render_emits_the_documented_layout() {
    let out = run_ok(bin().args([
        "seq",
        "render",
        "--utterance",
        "A:u1",
        "--utterance",
        "B:u2",
        "--response",
        "r",
        "--question",
        "what is your personality?",
        "--persona",
        "p1",
        "--persona",
        "p2",
        "--json",
    ]));
    let value: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("seq render --json prints JSON");
    let kinds: Vec<String> = value["segments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["kind"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(
        kinds,
        vec!["sep", "text", "sep", "text", "sep", "text", "sep", "text", "cls", "sep", "text"]
    );
    assert_eq!(value["segments"][3]["text"], "p1 p2");

    // Plain rendering shows the marks inline.
    let out = run_ok(bin().args([
        "seq", "render", "--utterance", "A:u1", "--response", "r",
    ]));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "[SEP] u1 [CLS] [SEP] r"
    );
}

#[test]
fn corpus_convert_parses_the_numbered_txt_format() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.txt");
    let cands: Vec<String> = (0..19)
        .map(|i| format!("no {i}"))
        .chain(std::iter::once("hi yourself".to_string()))
        .collect();
    std::fs::write(
        &raw,
        format!(
            "1 your persona: i like maps.\n2 hello there\thi yourself\t\t{}\n",
            cands.join("|")
        ),
    )
    .unwrap();
    let out_path = tmp.path().join("norm.jsonl");
    run_ok(bin().args([
        "corpus",
        "convert",
        "--from",
        "personachat-txt",
        "--input",
        raw.to_str().unwrap(),
        "--output",
        out_path.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let record: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(record["gold_index"], 19);
    assert_eq!(record["persona"][0], "i like maps.");
}

#[test]
fn train_then_eval_round_trip_through_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let train = synth(tmp.path(), "train.jsonl", 40, 1);
    let test = synth(tmp.path(), "test.jsonl", 20, 2);
    let ckpt = tmp.path().join("ckpt");
    run_ok(bin().args([
        "train",
        "--mode",
        "standard",
        "--train",
        train.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--learning-rate",
        "0.05",
        "--epochs",
        "1",
    ]));
    assert!(ckpt.join("head.json").exists());
    assert!(ckpt.join("meta.json").exists());
    let root = tmp.path().join("runs");
    let out = run_ok(bin().args([
        "eval",
        "--method",
        "srs",
        "--dataset",
        test.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--run-root",
        root.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("R20@1"));
}

#[test]
fn unknown_flags_and_missing_inputs_fail_with_nonzero_exit() {
    let out = bin().args(["eval", "--no-such-flag"]).output().unwrap();
    assert!(!out.status.success());

    let out = bin()
        .args(["eval", "--method", "srs", "--dataset", "/nonexistent.jsonl"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn run_root_env_var_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = synth(tmp.path(), "data.jsonl", 25, 3);
    let root = tmp.path().join("env-runs");
    run_ok(
        bin()
            .env("PRSEL_RUN_ROOT", root.to_str().unwrap())
            .args(["eval", "--method", "srs", "--dataset", dataset.to_str().unwrap()]),
    );
    assert!(root.exists());
    only_run_subdir(&root);
}

#[test]
fn repeats_flag_adds_mean_and_std_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = synth(tmp.path(), "data.jsonl", 25, 5);
    let root = tmp.path().join("runs");
    run_ok(bin().args([
        "eval",
        "--method",
        "srs",
        "--dataset",
        dataset.to_str().unwrap(),
        "--repeats",
        "2",
        "--run-root",
        root.to_str().unwrap(),
    ]));
    let report = std::fs::read_to_string(only_run_subdir(&root).join("report.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&report).unwrap();
    let configs: Vec<&str> = value["grid"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["config"].as_str().unwrap())
        .collect();
    assert_eq!(configs, vec!["srs#rep0", "srs#rep1", "srs mean", "srs std"]);
}

#[test]
fn report_show_defaults_prints_the_pinned_values() {
    let out = run_ok(bin().args(["report", "--show-defaults"]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("checkpoint_id = \"lexical-64\""));
    assert!(stdout.contains("k = 2"));
    assert!(stdout.contains("prompt_question = \"what is your personality?\""));
    assert!(stdout.contains("learning_rate = 1e-6") || stdout.contains("learning_rate = 0.000001"));
    assert!(stdout.contains("grad_clip = 10.0"));
}
