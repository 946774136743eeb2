use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/four-area").join(name)
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/four-area")
}

fn langflow<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_langflow"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn langflow")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "langflow failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Corpus bundle, model and attribution for the fixture, built in `dir`.
fn prepare(dir: &Path) {
    ok(langflow([
        "preprocess",
        "--input",
        p(&fixture("records.jsonl")),
        "--stopwords",
        p(&fixture("stopwords.txt")),
        "--out",
        p(&dir.join("corpus")),
        "--min-df",
        "2",
        "--years",
        "1990-2009",
    ]));
    train(dir, "model.json");
    ok(langflow([
        "infer",
        "--corpus",
        p(&dir.join("corpus")),
        "--model",
        p(&dir.join("model.json")),
        "--out",
        p(&dir.join("attr.jsonl")),
    ]));
}

fn train(dir: &Path, out: &str) -> Output {
    ok(langflow([
        "train",
        "--config",
        p(&fixture("run.conf")),
        "--corpus",
        p(&dir.join("corpus")),
        "--taxonomy",
        p(&fixture("taxonomy.tsv")),
        "--out",
        p(&dir.join(out)),
    ]))
}

fn analyze(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "analyze".to_string(),
        "--corpus".into(),
        p(&dir.join("corpus")).into(),
        "--taxonomy".into(),
        p(&fixture("taxonomy.tsv")).into(),
        "--attribution".into(),
        p(&dir.join("attr.jsonl")).into(),
        "--out".into(),
        p(&dir.join("analysis")).into(),
        "--series".into(),
        "all".into(),
        "--resamples".into(),
        "200".into(),
        "--seed".into(),
        "5".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    langflow(args)
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn analyze_matches_golden_files() {
    let tmp = TempDir::new().unwrap();
    prepare(tmp.path());
    ok(analyze(tmp.path(), &[]));

    let produced = tmp.path().join("analysis");
    let mut names: Vec<String> = fs::read_dir(&produced)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["chord.jsonl", "matrix-1990s.tsv", "matrix-2000s.tsv", "matrix-all.tsv", "scores.tsv", "series.tsv", "verdicts-all.tsv"]
    );
    let golden = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(&golden).unwrap();
        for n in &names {
            fs::copy(produced.join(n), golden.join(n)).unwrap();
        }
    }
    for n in &names {
        let want = fs::read_to_string(golden.join(n)).unwrap_or_else(|e| panic!("golden {n}: {e}"));
        let got = fs::read_to_string(produced.join(n)).unwrap();
        assert_eq!(got, want, "{n} differs from its golden copy (rerun with UPDATE_GOLDEN=1 if intended)");
    }

    // The planted direction: A's vocabulary is injected into B, C and D.
    let scores = data_rows(&produced.join("scores.tsv"));
    let a = scores.iter().find(|r| r[0] == "A").unwrap();
    assert_eq!(a[2], "3");
}

#[test]
fn every_artifact_starts_with_provenance() {
    let tmp = TempDir::new().unwrap();
    prepare(tmp.path());
    ok(analyze(tmp.path(), &["--score-buckets", "buckets"]));
    let d = tmp.path();
    for f in ["corpus/vocab.tsv", "corpus/docs.tsv", "corpus/diagnostics.tsv", "analysis/matrix-all.tsv", "analysis/verdicts-1990s.tsv", "analysis/scores.tsv"] {
        let text = fs::read_to_string(d.join(f)).unwrap();
        assert!(text.starts_with("# tool: langflow "), "{f}");
        assert!(text.contains("\n# command: "), "{f}");
    }
    for f in ["attr.jsonl", "analysis/chord.jsonl"] {
        let text = fs::read_to_string(d.join(f)).unwrap();
        assert!(text.starts_with("{\"provenance\":"), "{f}");
    }
    let model = fs::read_to_string(d.join("model.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&model).unwrap();
    assert_eq!(v["provenance"]["seed"], 3);
    assert!(v["provenance"]["inputs"]["corpus"].as_str().unwrap().starts_with("sha256:"));
    let scores = data_rows(&d.join("analysis/scores.tsv"));
    assert_eq!(scores.len(), 1 + 4 * 2, "one row per area per decade");
}

#[test]
fn train_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    prepare(tmp.path());
    train(tmp.path(), "again.json");
    let a = fs::read(tmp.path().join("model.json")).unwrap();
    let b = fs::read(tmp.path().join("again.json")).unwrap();
    assert!(a == b, "model files differ between identical runs");
}

#[test]
fn validate_family_is_consistent() {
    let tmp = TempDir::new().unwrap();
    prepare(tmp.path());
    let out = tmp.path().join("consistency.tsv");
    ok(langflow([
        "validate",
        "--config",
        p(&fixture("run.conf")),
        "--corpus",
        p(&tmp.path().join("corpus")),
        "--taxonomy",
        p(&fixture("taxonomy.tsv")),
        "--family",
        "2,4,8",
        "--out",
        p(&out),
    ]));
    let rows = data_rows(&out);
    assert_eq!(rows[0], ["model", "K=2", "K=4", "K=8"]);
    for (i, row) in rows[1..].iter().enumerate() {
        for (j, cell) in row[1..].iter().enumerate() {
            let r: f64 = cell.parse().unwrap();
            if i != j {
                assert!(r >= 0.9, "{} vs {}: {r}", rows[0][i + 1], rows[0][j + 1]);
            }
        }
    }
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn failures_report_a_class_and_exit_status() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();

    let missing = langflow(["train", "--corpus", "/nonexistent", "--taxonomy", "x", "--out", p(&d.join("m"))]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).starts_with("error[CONFIG]: "));
    assert_eq!(stderr(&missing).lines().count(), 1);

    let usage = langflow(["analyze", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(stderr(&usage).starts_with("error[CONFIG]: "));

    let bad_config = d.join("bad.conf");
    fs::write(&bad_config, "sweeps\n").unwrap();
    let parsed = langflow(["train", "--config", p(&bad_config)]);
    assert_eq!(parsed.status.code(), Some(2));

    prepare(d);
    let partial = d.join("partial.tsv");
    fs::write(&partial, "a.1\tA\tbroad-1\n").unwrap();
    let unmapped = langflow([
        "train",
        "--corpus",
        p(&d.join("corpus")),
        "--taxonomy",
        p(&partial),
        "--out",
        p(&d.join("m.json")),
    ]);
    assert_eq!(unmapped.status.code(), Some(3));
    assert!(stderr(&unmapped).starts_with("error[DATA]: unmapped subject codes"));

    let bad_alpha = langflow([
        "train",
        "--corpus",
        p(&d.join("corpus")),
        "--taxonomy",
        p(&fixture("taxonomy.tsv")),
        "--out",
        p(&d.join("m.json")),
        "--alpha",
        "-1",
    ]);
    assert_eq!(bad_alpha.status.code(), Some(2));
}

#[test]
fn stages_refuse_mismatched_inputs_unless_forced() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    prepare(d);
    let edited = d.join("taxonomy.tsv");
    let mut text = fs::read_to_string(fixture("taxonomy.tsv")).unwrap();
    text.push_str("# edited\n");
    fs::write(&edited, text).unwrap();
    let (corpus, attr, forced) = (d.join("corpus"), d.join("attr.jsonl"), d.join("forced"));
    let args = |force: bool| {
        let mut a = vec![
            "analyze",
            "--corpus",
            p(&corpus),
            "--taxonomy",
            p(&edited),
            "--attribution",
            p(&attr),
            "--out",
            p(&forced),
            "--resamples",
            "20",
        ];
        if force {
            a.push("--force");
        }
        a
    };
    let refused = langflow(args(false));
    assert_eq!(refused.status.code(), Some(2));
    assert!(stderr(&refused).contains("digest mismatch for taxonomy"));
    ok(langflow(args(true)));
}

#[test]
fn command_line_flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    prepare(d);
    ok(langflow([
        "train",
        "--config",
        p(&fixture("run.conf")),
        "--corpus",
        p(&d.join("corpus")),
        "--taxonomy",
        p(&fixture("taxonomy.tsv")),
        "--out",
        p(&d.join("short.json")),
        "--sweeps",
        "40",
        "--burn-in",
        "20",
    ]));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("short.json")).unwrap()).unwrap();
    let config = &v["provenance"]["config"];
    assert_eq!(config["sweeps"], "40");
    assert_eq!(config["burn-in"], "20");
    assert_eq!(config["topics-per-label"], "2");
}

#[test]
fn cluster_subjects_writes_a_loadable_taxonomy() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    prepare(d);
    ok(langflow([
        "cluster-subjects",
        "--corpus",
        p(&d.join("corpus")),
        "--out",
        p(&d.join("tax")),
        "--areas",
        "2",
    ]));
    let rows = data_rows(&d.join("tax/taxonomy.tsv"));
    assert_eq!(rows.len(), 4);
    let areas: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(areas.len(), 2);

    // Re-cut the saved dendrogram with a curation that names a new broad area.
    let curation = d.join("curation.tsv");
    fs::write(&curation, "*\tarea-1\tsciences\n").unwrap();
    ok(langflow([
        "cluster-subjects",
        "--dendrogram",
        p(&d.join("tax/dendrogram.tsv")),
        "--out",
        p(&d.join("recut")),
        "--areas",
        "2",
        "--curation",
        p(&curation),
    ]));
    let recut = data_rows(&d.join("recut/taxonomy.tsv"));
    assert!(recut.iter().any(|r| r[1] == "area-1" && r[2] == "sciences"));
}

#[test]
fn synth_output_round_trips_through_preprocess() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(langflow(["synth", "--out", p(&d.join("raw")), "--areas", "3", "--docs-per-area", "10", "--tokens-per-doc", "30", "--inject", "A:B:0.1-0.3", "--seed", "1"]));
    let out = ok(langflow([
        "preprocess",
        "--input",
        p(&d.join("raw/records.jsonl")),
        "--stopwords",
        p(&d.join("raw/stopwords.txt")),
        "--out",
        p(&d.join("corpus")),
        "--min-df",
        "1",
        "--years",
        "1980-2010",
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("30 documents"));
    let diag = data_rows(&d.join("corpus/diagnostics.tsv"));
    assert_eq!(diag.len(), 1, "header only: nothing skipped");
    let bad = langflow(["synth", "--out", p(&d.join("x")), "--inject", "A:Q:0.1"]);
    assert_eq!(bad.status.code(), Some(2));
}
