use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_postmortem"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn postmortem")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic corpus shared by most tests.
fn corpus(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("corpus.jsonl");
    let out = run(&["gen-synth", "--profiles", "60", "--seed", "3", "--out", s(&path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

fn write_lines(dir: &TempDir, name: &str, lines: &[String]) -> PathBuf {
    let path = dir.path().join(name);
    let mut body = lines.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn gen_synth_is_deterministic_and_validates() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let out = run(&["gen-synth", "--seed", "7", "--out", s(&a)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("profiles 200 comments "));
    assert_eq!(code(&run(&["gen-synth", "--seed", "7", "--out", s(&b)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let cfg = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk-200.json");
    let c = dir.path().join("c.jsonl");
    assert_eq!(code(&run(&["gen-synth", "--config", s(&cfg), "--out", s(&c)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    assert_eq!(code(&run(&["gen-synth", "--profiles", "0", "--out", s(&b)])), 2);
    let unwritable = dir.path().join("missing-dir").join("x.jsonl");
    assert_eq!(code(&run(&["gen-synth", "--out", s(&unwritable)])), 2);
}

#[test]
fn stats_report_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let r1 = dir.path().join("r1.json");
    let r2 = dir.path().join("r2.json");
    assert_eq!(code(&run(&["stats", "--corpus", s(&c), "--out", s(&r1)])), 0);
    assert_eq!(code(&run(&["stats", "--corpus", s(&c), "--out", s(&r2)])), 0);
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());

    let report: serde_json::Value = serde_json::from_slice(&fs::read(&r1).unwrap()).unwrap();
    assert!(report["stats"]["post_comments"].as_u64().unwrap() > 0);
    assert!(report["stats"]["pre_comments"].as_u64().unwrap() > 0);
    assert_eq!(report["top_ngrams"].as_array().unwrap().len(), 3);
    for m in report["metrics"].as_array().unwrap() {
        let d = m["test"]["effect_size_d"].as_f64().unwrap();
        assert_eq!(m["flagged"].as_bool().unwrap(), d.abs() > 0.2);
        assert!(m["test"]["corrected_p"].as_f64().unwrap() >= m["test"]["p_value"].as_f64().unwrap());
    }

    assert_eq!(code(&run(&["stats", "--corpus", s(&dir.path().join("nope.jsonl"))])), 2);
    let alive = write_lines(
        &dir,
        "alive.jsonl",
        &[r#"{"comment_id":"a","profile_id":"p","timestamp":1,"text":"hey"}"#.to_string()],
    );
    assert_eq!(code(&run(&["stats", "--corpus", s(&alive)])), 2);
}

#[test]
fn train_cv_and_flag_validation() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let model = dir.path().join("lr.json");
    let out = run(&[
        "train", "--corpus", s(&c), "--model", "lr", "--features", "combined", "--unit", "profile", "--out", s(&model),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("mean F1"));
    let saved: serde_json::Value = serde_json::from_slice(&fs::read(&model).unwrap()).unwrap();
    assert_eq!(saved["format_version"], 1);
    assert_eq!(saved["kind"], "lr");

    let out = run(&["cv", "--corpus", s(&c), "--model", "baseline", "--select-k", "100"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    assert!(stdout(&out).contains("mean F1"));

    assert_eq!(code(&run(&["cv", "--corpus", s(&c), "--folds", "1"])), 1);
    assert_eq!(code(&run(&["cv", "--corpus", s(&c), "--model", "forest"])), 1);
    assert_eq!(code(&run(&["cv", "--corpus", s(&c), "--features", "pixels"])), 1);
    assert_eq!(code(&run(&["cv", "--corpus", s(&c), "--unit", "page"])), 1);
    assert_eq!(code(&run(&["train", "--corpus", s(&c)])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn cv_reports_and_grid() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let report = dir.path().join("cv.json");
    assert_eq!(code(&run(&["cv", "--corpus", s(&c), "--model", "nb", "--folds", "5", "--out", s(&report)])), 0);
    let r: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["folds"], 5);
    assert_eq!(r["per_fold"].as_array().unwrap().len(), 5);
    assert_eq!(r["config"]["model"]["kind"], "nb");

    let grid = dir.path().join("grid.json");
    let out = run(&[
        "grid", "--corpus", s(&c), "--model", "nb", "--folds", "3", "--select-k", "0,50", "--out", s(&grid),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let g: serde_json::Value = serde_json::from_slice(&fs::read(&grid).unwrap()).unwrap();
    let reports = g["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 6);
    let best = g["best_index"].as_u64().unwrap() as usize;
    let top = reports.iter().map(|r| r["mean"]["f1"].as_f64().unwrap()).fold(f64::MIN, f64::max);
    assert_eq!(reports[best]["mean"]["f1"].as_f64().unwrap(), top);
    assert_eq!(g["best"], reports[best]["config"]);
}

#[test]
fn classify_preserves_order_and_checks_models() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let baseline = dir.path().join("baseline.json");
    assert_eq!(code(&run(&["train", "--corpus", s(&c), "--model", "baseline", "--out", s(&baseline)])), 0);
    let input = write_lines(
        &dir,
        "in.jsonl",
        &[
            r#"{"id":"x","text":"rip bro"}"#.to_string(),
            r#"{"id":"y","text":"gripping story"}"#.to_string(),
            r#"{"id":"z","text":"R.I.P. angel"}"#.to_string(),
        ],
    );
    let preds = dir.path().join("preds.jsonl");
    assert_eq!(code(&run(&["classify", "--model", s(&baseline), "--in", s(&input), "--out", s(&preds)])), 0);
    let rows: Vec<serde_json::Value> = fs::read_to_string(&preds)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let got: Vec<(&str, &str)> = rows.iter().map(|r| (r["id"].as_str().unwrap(), r["label"].as_str().unwrap())).collect();
    assert_eq!(got, vec![("x", "post"), ("y", "pre"), ("z", "post")]);
    assert_eq!(rows[0]["score"], 1.0);

    let empty = write_lines(&dir, "empty.jsonl", &[]);
    let out_empty = dir.path().join("empty-preds.jsonl");
    assert_eq!(code(&run(&["classify", "--model", s(&baseline), "--in", s(&empty), "--out", s(&out_empty)])), 0);
    assert_eq!(fs::read(&out_empty).unwrap(), b"");

    // a linear model whose weights no longer match its feature space
    let lr = dir.path().join("lr.json");
    assert_eq!(code(&run(&["train", "--corpus", s(&c), "--folds", "2", "--out", s(&lr)])), 0);
    let mut m: serde_json::Value = serde_json::from_slice(&fs::read(&lr).unwrap()).unwrap();
    m["parameters"]["weights"].as_array_mut().unwrap().pop();
    let broken = dir.path().join("broken.json");
    fs::write(&broken, m.to_string()).unwrap();
    assert_eq!(code(&run(&["classify", "--model", s(&broken), "--in", s(&input), "--out", s(&preds)])), 2);
    assert_eq!(code(&run(&["classify", "--model", s(&lr), "--in", s(&dir.path().join("none")), "--out", s(&preds)])), 2);
}

#[test]
fn early_curve_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = run(&["early", "--corpus", s(&c), "--model", "nb", "--out", s(&a)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("m=1"));
    assert_eq!(code(&run(&["early", "--corpus", s(&c), "--model", "nb", "--out", s(&b)])), 0);
    let csv = fs::read_to_string(&a).unwrap();
    assert_eq!(csv, fs::read_to_string(&b).unwrap());
    assert!(csv.starts_with("m,fraction\n1,"));
    assert!(csv.contains("\n\nday,fraction\n0,"));
    assert_eq!(code(&run(&["early", "--corpus", s(&c), "--test-fraction", "0", "--out", s(&a)])), 1);
}

#[test]
fn compare_reports() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let report = |name: &str, model: &str, folds: &str| {
        let p = dir.path().join(name);
        let out = run(&["cv", "--corpus", s(&c), "--model", model, "--folds", folds, "--out", s(&p)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        p
    };
    let nb = report("nb.json", "nb", "5");
    let base = report("base.json", "baseline", "5");
    let base10 = report("base10.json", "baseline", "10");

    let out = run(&["compare", "--report-a", s(&nb), "--report-b", s(&nb)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("degenerate"));
    assert_eq!(code(&run(&["compare", "--report-a", s(&nb), "--report-b", s(&base10)])), 2);

    let out = run(&["compare", "--report-a", s(&nb), "--report-b", s(&base)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let f1 = |p: &Path| -> Vec<f64> {
        let r: serde_json::Value = serde_json::from_slice(&fs::read(p).unwrap()).unwrap();
        r["per_fold"].as_array().unwrap().iter().map(|m| m["f1"].as_f64().unwrap()).collect()
    };
    let t = postmortem::evaluation::paired_ttest(&f1(&nb), &f1(&base)).unwrap();
    assert!(stdout(&out).contains(&format!("t {:.4}", t.statistic)), "{}", stdout(&out));
    assert!(stdout(&out).contains(&format!("p {:.4}", t.p_value)));
}

#[test]
fn recall_only_mode() {
    let dir = TempDir::new().unwrap();
    let c = corpus(&dir);
    let baseline = dir.path().join("baseline.json");
    assert_eq!(code(&run(&["train", "--corpus", s(&c), "--model", "baseline", "--out", s(&baseline)])), 0);
    let record = |i: usize, text: &str| {
        format!(r#"{{"comment_id":"c{i}","profile_id":"p{}","timestamp":{},"text":"{text}","death_time":100}}"#, i % 2, 200 + i)
    };
    let rips = write_lines(&dir, "rips.jsonl", &(0..6).map(|i| record(i, "rip friend")).collect::<Vec<_>>());
    let out = run(&["recall-only", "--model", s(&baseline), "--corpus", s(&rips)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("recall 1.0000"));

    let texts = ["rip", "miss you", "rip buddy", "heaven"];
    let mixed = write_lines(
        &dir,
        "mixed.jsonl",
        &texts.iter().enumerate().map(|(i, t)| record(i, t)).collect::<Vec<_>>(),
    );
    let out = run(&["recall-only", "--model", s(&baseline), "--corpus", s(&mixed)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("predicted_post 2 recall 0.5000"), "{}", stdout(&out));

    let empty = write_lines(&dir, "empty.jsonl", &[]);
    assert_eq!(code(&run(&["recall-only", "--model", s(&baseline), "--corpus", s(&empty)])), 2);
}
