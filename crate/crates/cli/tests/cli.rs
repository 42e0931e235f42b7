use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn nf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noiseforge"))
        .args(args)
        .env_remove("NOISEFORGE_LLM_KEY")
        .env_remove("NOISEFORGE_EMBED_KEY")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = nf(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn clean_fixture(method: &str, parallelism: &str, out: &Path) -> Value {
    let corpus = fixture("fr_en_20.jsonl");
    let tape = fixture("fr_en_20.cassette.jsonl");
    let stdout = ok(&[
        "clean", "--method", method, "--in", s(&corpus), "--cassette", s(&tape), "--mock-embed",
        "--parallelism", parallelism, "--out", s(out),
    ]);
    serde_json::from_str(&stdout).unwrap()
}

#[test]
fn help_lists_subcommands_and_flags() {
    let top = ok(&["--help"]);
    for sub in ["ingest", "clean", "noise-report", "similarity-report", "augment", "score", "judge", "human-eval"] {
        assert!(top.contains(sub), "missing {sub} in:\n{top}");
    }
    let clean = ok(&["clean", "--help"]);
    for flag in ["--method", "--cassette", "--record", "--mock-embed", "--threshold", "--max-iters", "--parallelism"] {
        assert!(clean.contains(flag), "missing {flag}");
    }
}

#[test]
fn clean_replays_deterministically_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let stats = clean_fixture("monolingual", "1", &a);
    clean_fixture("monolingual", "4", &b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(stats["samples"], 20);
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 20);
}

#[test]
fn correction_runs_without_any_service() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.jsonl");
    let corpus = fixture("fr_en_20.jsonl");
    ok(&["clean", "--method", "correction", "--in", s(&corpus), "--mock-embed", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("the question"), "builtin corrector left 'teh':\n{text}");
}

#[test]
fn ingest_then_noise_report() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt, corpus) = (dir.path().join("s.txt"), dir.path().join("t.txt"), dir.path().join("c.jsonl"));
    fs::write(&src, "salut 😂\nmerci\n").unwrap();
    fs::write(&tgt, "hi 😂 lol\nthanks\n").unwrap();
    ok(&["ingest", "--src", s(&src), "--tgt", s(&tgt), "--src-lang", "fr", "--tgt-lang", "en", "--out", s(&corpus)]);
    assert_eq!(fs::read_to_string(&corpus).unwrap().lines().count(), 2);

    let csv = dir.path().join("noise.csv");
    ok(&["noise-report", "--in", &format!("tiny={}", s(&corpus)), "--out", s(&csv)]);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("emoji"));
    assert!(lines.next().unwrap().starts_with("tiny,"));
}

#[test]
fn score_writes_gain_csv() {
    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let refs = w("refs.txt", "the cat sat on the mat\nit is a nice day today\n");
    let base = w("base.txt", "the cat sat on a mat\nit is a nice day\n");
    let sys = w("sys.txt", "the cat sat on the mat\nit is a nice day\n");
    let csv = dir.path().join("gain.csv");
    let stdout = ok(&[
        "score", "--baseline", s(&base), "--system", &format!("clean={}", s(&sys)), "--refs", s(&refs),
        "--out", s(&csv),
    ]);
    let avg: Value = serde_json::from_str(&stdout).unwrap();
    assert!(avg["average_gain"]["test"].as_f64().unwrap() > 0.0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.lines().nth(1).unwrap().contains("clean"));
}

#[test]
fn similarity_and_augment_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cleaned = dir.path().join("mono.jsonl");
    clean_fixture("monolingual", "2", &cleaned);
    let csv = dir.path().join("sim.csv");
    ok(&["similarity-report", "--cleaned", s(&cleaned), "--mock-embed", "--out", s(&csv)]);
    // Header plus one row per metric.
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 6);

    let aug = dir.path().join("aug");
    let corpus = fixture("fr_en_20.jsonl");
    ok(&["augment", "--in", s(&corpus), "--kind", "char", "--seed", "3", "--out-dir", s(&aug)]);
    assert_eq!(fs::read_to_string(aug.join("char.jsonl")).unwrap().lines().count(), 40);
    let stats: Value = serde_json::from_str(&fs::read_to_string(aug.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["char"]["status"], "built");
}

#[test]
fn human_eval_build_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["human-eval".to_string(), "build".into()];
    for m in ["bilingual", "monolingual", "translation"] {
        let p = dir.path().join(format!("{m}.jsonl"));
        clean_fixture(m, "2", &p);
        args.extend(["--cleaned".into(), p.to_str().unwrap().into()]);
    }
    let comps = dir.path().join("comparisons");
    args.extend(["--n", "10", "--seed", "5", "--out", s(&comps)].map(String::from));
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let counts: Value = serde_json::from_str(&ok(&argv)).unwrap();
    assert_eq!(counts, serde_json::json!({"file1": 10, "file2": 10, "file3": 10}));

    // One vote per comparison in file1, all for option A.
    let votes: String = fs::read_to_string(comps.join("file1.jsonl"))
        .unwrap()
        .lines()
        .map(|line| {
            let c: Value = serde_json::from_str(line).unwrap();
            format!(
                "{{\"comparison_id\":{},\"voter\":\"ann\",\"choice\":\"first\",\"timestamp\":0}}\n",
                c["comparison_id"]
            )
        })
        .collect();
    let vpath = dir.path().join("votes.jsonl");
    fs::write(&vpath, votes).unwrap();
    let summary: Value = serde_json::from_str(&ok(&[
        "human-eval", "aggregate", "--comparisons", s(&comps), "--votes", s(&vpath),
    ]))
    .unwrap();
    let pairs = summary["pairs"].as_array().unwrap();
    let total: u64 = pairs.iter().map(|p| p["overall"]["total"].as_u64().unwrap()).sum();
    assert_eq!(total, 10);
}

#[test]
fn missing_endpoint_is_a_structured_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixture("fr_en_20.jsonl");
    let out = nf(&[
        "clean", "--method", "bilingual", "--in", s(&corpus), "--mock-embed", "--out",
        s(&dir.path().join("x.jsonl")),
    ]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("llm"));
}

#[test]
fn bad_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("nf.toml");
    fs::write(&cfg, "[gate]\nthreshhold = 0.5\n").unwrap();
    let out = nf(&["--config", s(&cfg), "score", "--baseline", "x", "--system", "y", "--refs", "z"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}
