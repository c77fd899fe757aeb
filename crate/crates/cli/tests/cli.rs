use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use confscore::review_data::{write_meta_csv, write_meta_json, write_reviews_csv, write_reviews_json};
use confscore::synthetic::{feasible_assignment, forms, FormConfig};

fn confscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_confscore")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = confscore(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(dir: &Path, papers: usize) -> (PathBuf, PathBuf) {
    let fx = forms(&FormConfig::uniform(papers, 3, papers / 4, papers / 10, 3));
    let reviews = dir.join("reviews.csv");
    let metas = dir.join("metas.csv");
    write_reviews_csv(fs::File::create(&reviews).unwrap(), &fx.reviews).unwrap();
    write_meta_csv(fs::File::create(&metas).unwrap(), &fx.metas).unwrap();
    (reviews, metas)
}

fn rows(path: &Path) -> usize {
    csv::Reader::from_path(path).unwrap().records().count()
}

fn accepted(path: &Path) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "decision").unwrap();
    r.records().filter(|rec| &rec.as_ref().unwrap()[col] == "accept").count()
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let (reviews, metas) = fixture(dir.path(), 100);
    let out = dir.path().join("out");
    let stdout = ok(&[
        "pipeline", "--input", s(&reviews), "--meta", s(&metas), "--out", s(&out),
        "--acceptance-rate", "30", "--grid-points", "5", "--samples", "100", "--seed", "4", "--dequantize",
    ]);
    assert!(stdout.contains("100 papers, 30 slots, 30 accepted"), "{stdout}");
    for name in ["scores.csv", "decisions.csv", "decisions_cal.csv", "gray_area.csv", "fit.json", "fig2_acceptance.svg", "summary.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    assert_eq!(accepted(&out.join("decisions.csv")), 30);
}

#[test]
fn config_file_values_override_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (reviews, metas) = fixture(dir.path(), 80);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "acceptance_rate = 25.0\ncalibrate = false\nout = \"from-config\"\n").unwrap();
    ok(&[
        "pipeline", "--config", s(&cfg), "--input", s(&reviews), "--meta", s(&metas),
        "--acceptance-rate", "50", "--out", s(&dir.path().join("from-flags")),
    ]);
    let out = dir.path().join("from-config");
    assert_eq!(accepted(&out.join("decisions.csv")), 20);
    assert!(!out.join("decisions_cal.csv").exists());
    assert!(!dir.path().join("from-flags").exists());
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (reviews, metas) = fixture(dir.path(), 60);
    let out = dir.path().join("out");
    let o = s(&out);

    ok(&["validate", "--input", s(&reviews), "--meta", s(&metas), "--out", o]);
    assert!(out.join("validation.json").is_file());

    ok(&["score", "--input", s(&reviews), "--meta", s(&metas), "--out", o]);
    assert_eq!(rows(&out.join("scores.csv")), 60);

    ok(&["dequantize", "--input", s(&reviews), "--out", o, "--lambda", "1.5"]);
    assert_eq!(rows(&out.join("reviews.csv")), 180);

    let cal = dir.path().join("cal");
    ok(&["calibrate", "--input", s(&reviews), "--meta", s(&metas), "--out", s(&cal), "--grid-points", "4", "--samples", "50"]);
    for name in ["scores.csv", "reviews.csv", "decisions_cal.csv", "fit.json", "fig1_histogram.csv", "fig3_meta.svg"] {
        assert!(cal.join(name).is_file(), "{name} missing");
    }

    let ranked = dir.path().join("ranked");
    let stdout = ok(&["rank", "--input", s(&cal.join("scores.csv")), "--out", s(&ranked), "--acceptance-rate", "40"]);
    assert!(stdout.starts_with("24 of 60 papers accepted, 24 under the calibrated index"), "{stdout}");

    let stdout = ok(&[
        "report", "--input", s(&ranked.join("decisions.csv")), "--calibrated", s(&ranked.join("decisions_cal.csv")), "--out", s(&ranked),
    ]);
    assert!(stdout.starts_with("agree-accept"));
    assert_eq!(rows(&ranked.join("gray_area.csv")), 60);
}

#[test]
fn json_tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let fx = forms(&FormConfig::uniform(40, 3, 10, 4, 3));
    let reviews = dir.path().join("reviews.json");
    let metas = dir.path().join("metas.json");
    write_reviews_json(fs::File::create(&reviews).unwrap(), &fx.reviews).unwrap();
    write_meta_json(fs::File::create(&metas).unwrap(), &fx.metas).unwrap();
    let out = dir.path().join("out");
    ok(&["score", "--input", s(&reviews), "--meta", s(&metas), "--out", s(&out), "--format", "json"]);
    let stdout = ok(&["rank", "--input", s(&out.join("scores.json")), "--out", s(&out), "--format", "json"]);
    assert!(stdout.starts_with("16 of 40 papers accepted"), "{stdout}");
    assert!(out.join("decisions.json").is_file());
}

#[test]
fn assign_meets_constraints_on_a_feasible_instance() {
    let dir = tempfile::tempdir().unwrap();
    let (inst, cons) = feasible_assignment(12, 24, 0.5, 5);
    let sources = dir.path().join("sources.csv");
    let mut w = csv::Writer::from_path(&sources).unwrap();
    w.write_record(["reviewer_id", "paper_id", "bid", "subject_relevance", "tpms"]).unwrap();
    for ((p, r), src) in &inst.sources {
        let tpms = src.tpms.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([r.as_str(), p.as_str(), &src.bid.to_string(), &src.subject.to_string(), &tpms]).unwrap();
    }
    w.flush().unwrap();
    let tags = dir.path().join("tags.csv");
    let mut w = csv::Writer::from_path(&tags).unwrap();
    w.write_record(["reviewer_id", "tag"]).unwrap();
    for (r, t) in &inst.tags {
        w.write_record([r.as_str(), &t.to_string()]).unwrap();
    }
    w.flush().unwrap();
    let conflicts = dir.path().join("conflicts.csv");
    let mut w = csv::Writer::from_path(&conflicts).unwrap();
    w.write_record(["reviewer_id", "paper_id"]).unwrap();
    for (p, r) in &inst.conflicts {
        w.write_record([r.as_str(), p.as_str()]).unwrap();
    }
    w.flush().unwrap();

    let out = dir.path().join("out");
    ok(&[
        "assign", "--input", s(&sources), "--tags", s(&tags), "--conflicts", s(&conflicts), "--out", s(&out),
        "--max-load", &cons.max_load.to_string(),
    ]);
    assert_eq!(rows(&out.join("assignment.csv")), 12 * 4);
    let audit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("assignment_audit.json")).unwrap()).unwrap();
    assert_eq!(audit["feasible"], true);
    assert!(audit["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn failures_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = confscore(&["score", "--input", s(&dir.path().join("absent.csv")), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));

    let out = confscore(&["score", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--input is required"));

    let (reviews, metas) = fixture(dir.path(), 20);
    let out = confscore(&["pipeline", "--input", s(&reviews), "--meta", s(&metas), "--acceptance-rate", "0"]);
    assert!(!out.status.success());

    let dup = dir.path().join("dup.csv");
    let text = fs::read_to_string(&reviews).unwrap();
    let first_row = text.lines().nth(1).unwrap();
    fs::write(&dup, format!("{text}{first_row}\n")).unwrap();
    let out = confscore(&["validate", "--input", s(&dup), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}
