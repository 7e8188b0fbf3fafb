use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
seed = 7

[data]
synth_per_class = 160

[data.curation]
per_class_cap = 100
test_pair_count = 15

[[classifier.members]]
featurizer = { ngram_min = 1, ngram_max = 3, hash_dim = 4096, use_word_unigrams = false }
train = { epochs = 3 }

[[classifier.members]]
featurizer = { ngram_min = 2, ngram_max = 4, hash_dim = 8192, use_word_unigrams = true }
train = { epochs = 3, seed = 2 }

[retry]
max_retries = 0
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dialect-refine"))
}

fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    bin().arg("--config").arg(config).arg("--out").arg(out).args(args).output().unwrap()
}

fn ok(config: &Path, out: &Path, args: &[&str]) -> String {
    let o = run(config, out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn pipeline(root: &Path) -> PathBuf {
    let config = root.join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    let out = root.join("run");
    for step in [
        &["synth"][..],
        &["curate"],
        &["train"],
        &["ensemble-search"],
        &["index"],
        &["refine"],
        &["report"],
        &["hard-subset"],
    ] {
        ok(&config, &out, step);
    }
    out
}

/// Relative path → bytes for every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn traces(out: &Path) -> Vec<Value> {
    let mut all = Vec::new();
    for e in std::fs::read_dir(out.join("traces")).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        all.extend(text.lines().map(|l| serde_json::from_str::<Value>(l).unwrap()));
    }
    all
}

#[test]
fn full_pipeline_is_reproducible_and_reports_match_traces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (out_a, out_b) = (pipeline(a.path()), pipeline(b.path()));

    let (snap_a, snap_b) = (snapshot(&out_a), snapshot(&out_b));
    for name in
        ["data/corpus.jsonl", "models/ensemble.bin", "reports/summary.csv", "reports/table5.md", "reports/table6.md"]
    {
        assert!(snap_a.contains_key(Path::new(name)), "missing {name}");
    }
    assert_eq!(snap_a.keys().collect::<Vec<_>>(), snap_b.keys().collect::<Vec<_>>());
    for (k, v) in &snap_a {
        assert!(v == &snap_b[k], "{} differs between identical runs", k.display());
    }

    // recompute TDR / DFS / attempts per (model, method) straight from the JSON
    let mut groups: BTreeMap<(String, String), Vec<Value>> = BTreeMap::new();
    for t in traces(&out_a) {
        groups.entry((t["model"].as_str().unwrap().into(), t["method"].as_str().unwrap().into())).or_default().push(t);
    }
    assert_eq!(groups.len(), 6);
    let mut summary = csv::Reader::from_path(out_a.join("reports/summary.csv")).unwrap();
    let headers = summary.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let mut rows = 0;
    for rec in summary.records() {
        let rec = rec.unwrap();
        let ts = &groups[&(rec[col("model")].to_owned(), rec[col("method")].to_owned())];
        let n = ts.len() as f64;
        let tdr = ts.iter().filter(|t| t["final_label"] == t["target"]).count() as f64 / n;
        let dfs = ts.iter().map(|t| t["dfs"].as_f64().unwrap()).sum::<f64>() / n;
        let attempts = ts.iter().map(|t| t["attempts"].as_array().unwrap().len() as f64).sum::<f64>() / n;
        let num = |c: &str| rec[col(c)].parse::<f64>().unwrap();
        assert!((num("tdr") - tdr).abs() < 1e-12);
        assert!((num("dfs_mean") - dfs).abs() < 1e-9);
        assert!((num("mean_attempts") - attempts).abs() < 1e-12);
        assert_eq!(rec[col("items")].parse::<usize>().unwrap(), ts.len());
        rows += 1;
    }
    assert_eq!(rows, 6);

    // hard subset: first attempt failed under every refining method
    let mut hard: Option<Vec<String>> = None;
    for ((_, method), ts) in &groups {
        if !method.contains('+') {
            continue;
        }
        let mut ids: Vec<String> = ts
            .iter()
            .filter(|t| t["attempts"][0]["verified"] == Value::Bool(false))
            .map(|t| t["item_id"].as_str().unwrap().to_owned())
            .collect();
        ids.sort();
        hard = Some(match hard {
            None => ids,
            Some(prev) => prev.into_iter().filter(|i| ids.contains(i)).collect(),
        });
    }
    let mut written: Vec<String> = std::fs::read_to_string(out_a.join("data/hard_subset.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["id"].as_str().unwrap().to_owned())
        .collect();
    written.sort();
    assert_eq!(written, hard.unwrap());

    let md = std::fs::read_to_string(out_a.join("reports/table5.md")).unwrap();
    assert!(md.starts_with("| Metric | Method | responsive | Model Avg |"));
    assert!(md.contains("- seed: 7"));
}

#[test]
fn evaluate_scores_rows_without_a_classifier() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    std::fs::write(&config, "seed = 1\n").unwrap();
    let input = dir.path().join("rows.jsonl");
    std::fs::write(&input, "{\"variant\":\"h\",\"hypothesis\":\"a b c d\",\"reference\":\"a b c d\"}\n").unwrap();
    let stdout = ok(&config, &dir.path().join("out"), &["evaluate", "--input", input.to_str().unwrap()]);
    assert!(stdout.contains("| h |"));
    let csv = std::fs::read_to_string(dir.path().join("out/reports/evaluate.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().contains(",100.0"), "{csv}");
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seed = \"nope\"\n").unwrap();
    assert_eq!(run(&bad, &out, &["synth"]).status.code(), Some(2));
    assert_eq!(bin().arg("no-such-command").output().unwrap().status.code(), Some(2));

    let good = dir.path().join("good.toml");
    std::fs::write(&good, SMALL).unwrap();
    assert_eq!(run(&good, &out, &["curate"]).status.code(), Some(3), "no corpus yet");
    assert_eq!(run(&good, &out, &["refine", "--method", "ZS+Q"]).status.code(), Some(2));

    // a reachable pipeline with an unreachable model server
    for step in ["synth", "curate", "train", "ensemble-search"] {
        ok(&good, &out, &[step]);
    }
    let http = dir.path().join("http.toml");
    let with_http = SMALL.to_owned()
        + "\n[backend]\nkind = \"http\"\nendpoint = \"http://127.0.0.1:9/v1/chat/completions\"\nmodel = \"m\"\ntimeout_ms = 2000\n";
    std::fs::write(&http, with_http).unwrap();
    let o = run(&http, &out, &["refine", "--method", "ZS"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn print_config_round_trips_and_honours_overrides() {
    let o = bin().args(["--seed", "99", "print-config"]).output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("seed = 99\n"));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, &text).unwrap();
    let again = bin().arg("--config").arg(&path).arg("print-config").output().unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
    assert!(bin().arg("--help").output().unwrap().status.success());
}
