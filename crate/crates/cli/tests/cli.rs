use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use styledecomp::evaluation::bleu_corpus;
use styledecomp::textpipe::io::read_sentences;
use styledecomp::textpipe::style_oracle;

const TINY: [&str; 10] = [
    "--set", "embed_dim=8", "--set", "hidden_dim=12", "--set", "latent_dim=4", "--set", "disc_hidden_dim=8", "--set",
    "latent_disc_hidden_dim=8",
];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_styledecomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

/// Path as a `&str` that outlives temporaries in argument lists.
fn p(path: &Path) -> &'static str {
    Box::leak(path.to_str().unwrap().to_owned().into_boxed_str())
}

#[test]
fn synth_writes_aligned_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--quiet", "synth", "--out", p(dir.path())]);
    for name in ["train.txt", "train.labels", "eval.txt", "eval.labels", "eval.refs"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert_eq!(line_count(&dir.path().join("train.txt")), 2000);
    assert_eq!(line_count(&dir.path().join("train.labels")), 2000);
    let n_eval = line_count(&dir.path().join("eval.txt"));
    assert_eq!(n_eval, 500);
    assert_eq!(line_count(&dir.path().join("eval.labels")), n_eval);
    assert_eq!(line_count(&dir.path().join("eval.refs")), n_eval);
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["--seed", "12", "--quiet", "synth", "--n", "50", "--n-eval", "20", "--out", p(d.path())]);
    }
    for name in ["train.txt", "train.labels", "eval.txt", "eval.labels", "eval.refs"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
}

#[test]
fn synth_rejects_bad_entanglement() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--entanglement", "1.5", "--out", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("must be in [0,1]"));
}

#[test]
fn train_sae_writes_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("exp");
    let mut args = vec!["--quiet", "train", "--variant", "sae", "--epochs", "1", "--set", "synth_n=40", "--out", p(&out)];
    args.extend(TINY);
    ok(&args);
    assert!(out.join("config.resolved").exists());
    assert!(out.join("run_0/checkpoint.bin").exists());
    assert_eq!(line_count(&out.join("run_0/metrics.jsonl")), 1);
    assert!(!out.join("run_1").exists());
    let resolved = fs::read_to_string(out.join("config.resolved")).unwrap();
    assert!(resolved.contains("variant = sae"));
    assert!(resolved.contains("embed_dim = 8"));
}

#[test]
fn invalid_variant_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["train", "--variant", "vae", "--out", p(dir.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["baseline", "latent-disc", "sae", "sae-latent-disc"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn unknown_config_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    fs::write(&cfg, "epochs = 1\n# note\nwarmup = 3\n").unwrap();
    let out = run(&["train", "--config", p(&cfg), "--out", p(&dir.path().join("exp"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("warmup"), "{err}");
}

#[test]
fn same_flags_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let mut args = vec!["--quiet", "--seed", "5", "train", "--epochs", "2", "--set", "synth_n=30", "--out", p(&out)];
        args.extend(TINY);
        ok(&args);
        outputs.push(out);
    }
    for file in ["run_0/checkpoint.bin", "run_0/metrics.jsonl"] {
        assert_eq!(fs::read(outputs[0].join(file)).unwrap(), fs::read(outputs[1].join(file)).unwrap(), "{file}");
    }
}

/// Four small runs evaluated on a synthetic eval split.
#[test]
fn four_runs_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["--quiet", "synth", "--n", "60", "--n-eval", "120", "--out", p(&data)]);
    let exp = dir.path().join("exp");
    let mut args = vec![
        "--quiet",
        "train",
        "--runs",
        "4",
        "--epochs",
        "1",
        "--data",
        p(&data.join("train.txt")),
        "--labels",
        p(&data.join("train.labels")),
        "--out",
        p(&exp),
    ];
    args.extend(TINY);
    ok(&args);
    for i in 0..4 {
        assert!(exp.join(format!("run_{i}/metrics.jsonl")).exists());
        assert!(exp.join(format!("run_{i}/checkpoint.bin")).exists());
    }

    let cps: Vec<String> = (0..4)
        .map(|i| exp.join(format!("run_{i}/checkpoint.bin")).to_str().unwrap().to_string())
        .collect();
    let mut eval_args = vec!["--quiet", "eval", "--data", p(&data.join("eval.txt")), "--out", p(&exp)];
    for c in &cps {
        eval_args.extend(["--checkpoint", c.as_str()]);
    }
    ok(&eval_args);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(exp.join("eval/report.json")).unwrap()).unwrap();
    for field in [
        "probe_accuracy",
        "bleu",
        "transfer_accuracy",
        "mean_cosine_distance",
        "mean_kl",
        "probe_accuracy_std",
        "bleu_std",
        "transfer_accuracy_std",
        "mean_cosine_distance_std",
        "mean_kl_std",
        "n_runs",
        "runs",
    ] {
        assert!(report.get(field).is_some(), "missing {field}");
    }
    assert_eq!(report["n_runs"], 4);
    for i in 0..4 {
        assert!(exp.join(format!("eval/latents_{i}.txt")).exists());
        let csv = fs::read_to_string(exp.join(format!("eval/projection_{i}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("x,y,label"));
        assert_eq!(csv.lines().count(), 121);
    }

    // Per-run BLEU matches a standalone computation on the emitted outputs.
    let refs = read_sentences(&data.join("eval.refs")).unwrap();
    for i in 0..4 {
        let outs = read_sentences(&exp.join(format!("eval/transfer_{i}.txt"))).unwrap();
        let expected = bleu_corpus(&outs, &refs).unwrap();
        let got = report["runs"][i]["bleu"].as_f64().unwrap();
        assert!((got - expected).abs() <= 1e-12, "run {i}: {got} vs {expected}");
    }

    // Without references BLEU is null and the rest is still reported.
    let bare = dir.path().join("bare");
    fs::create_dir_all(&bare).unwrap();
    fs::copy(data.join("eval.txt"), bare.join("eval.txt")).unwrap();
    fs::copy(data.join("eval.labels"), bare.join("eval.labels")).unwrap();
    let out2 = dir.path().join("exp2");
    ok(&["--quiet", "eval", "--checkpoint", &cps[0], "--data", p(&bare.join("eval.txt")), "--out", p(&out2)]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out2.join("eval/report.json")).unwrap()).unwrap();
    assert!(report["bleu"].is_null());
    assert!(report["probe_accuracy"].is_number());
    assert!(report.get("probe_accuracy_std").is_none());
}

#[test]
fn transfer_preserves_line_count_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["--quiet", "synth", "--n", "40", "--n-eval", "25", "--out", p(&data)]);
    let exp = dir.path().join("exp");
    let mut args = vec!["--quiet", "train", "--epochs", "1", "--set", "synth_n=40", "--out", p(&exp)];
    args.extend(TINY);
    ok(&args);
    let cp = exp.join("run_0/checkpoint.bin");
    let input = data.join("eval.txt");
    let mut files = Vec::new();
    for name in ["a.txt", "b.txt"] {
        let out = dir.path().join(name);
        ok(&["--quiet", "transfer", "--checkpoint", p(&cp), "--input", p(&input), "--out", p(&out)]);
        files.push(out);
    }
    assert_eq!(line_count(&files[0]), line_count(&input));
    assert_eq!(fs::read(&files[0]).unwrap(), fs::read(&files[1]).unwrap());

    // Unknown words are fine.
    let odd = dir.path().join("odd.txt");
    fs::write(&odd, "zzzz qqqq\n").unwrap();
    fs::write(dir.path().join("odd.labels"), "1\n").unwrap();
    let out = dir.path().join("odd.out");
    ok(&[
        "--quiet",
        "transfer",
        "--checkpoint",
        p(&cp),
        "--input",
        p(&odd),
        "--labels",
        p(&dir.path().join("odd.labels")),
        "--out",
        p(&out),
    ]);
    assert_eq!(line_count(&out), 1);
}

#[test]
fn missing_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    fs::write(&input, "a b\n").unwrap();
    let out = run(&[
        "transfer",
        "--checkpoint",
        p(&dir.path().join("none.bin")),
        "--input",
        p(&input),
        "--out",
        p(&dir.path().join("out.txt")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("none.bin"));
}

#[test]
fn memorized_sentence_changes_style() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["--quiet", "synth", "--n", "200", "--n-eval", "10", "--entanglement", "0", "--out", p(&data)]);
    let exp = dir.path().join("exp");
    let mut args = vec![
        "--quiet",
        "train",
        "--epochs",
        "30",
        "--data",
        p(&data.join("train.txt")),
        "--labels",
        p(&data.join("train.labels")),
        "--out",
        p(&exp),
    ];
    args.extend(TINY);
    ok(&args);
    let first = fs::read_to_string(data.join("train.txt")).unwrap().lines().next().unwrap().to_string();
    let label = fs::read_to_string(data.join("train.labels")).unwrap().lines().next().unwrap().trim().parse::<usize>().unwrap();
    let input = dir.path().join("one.txt");
    fs::write(&input, format!("{first}\n")).unwrap();
    let out = dir.path().join("one.out");
    ok(&["--quiet", "transfer", "--checkpoint", p(&exp.join("run_0/checkpoint.bin")), "--input", p(&input), "--out", p(&out)]);
    let rewritten: Vec<String> = fs::read_to_string(&out).unwrap().split_whitespace().map(String::from).collect();
    assert_eq!(style_oracle(&rewritten), Some(1 - label), "{first} -> {rewritten:?}");
}
