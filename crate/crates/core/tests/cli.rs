use std::path::Path;
use std::process::{Command, Output};

fn voices(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voices"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DATA: [&str; 8] = [
    "--embeddings",
    "data/embeddings.bin",
    "--annotations",
    "data/annotations.jsonl",
    "--metadata",
    "data/metadata.csv",
    "--ground-truth",
    "data/ground_truth.csv",
];

fn with_data<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(DATA.iter()).chain(tail).copied().collect()
}

fn synth(dir: &Path) {
    let o = voices(&["synth", "--profile", "gwsd", "--seed", "3", "--format", "bin", "--out", "data"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn stage_by_stage_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    for f in ["embeddings.bin", "annotations.jsonl", "metadata.csv", "ground_truth.csv"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }

    let o = voices(&with_data(&["reduce"], &["--method", "pca", "--n-components", "2", "--out", "reduced.csv"]), d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(d.join("reduced.csv.json").exists());

    let o = voices(&["cluster", "--input", "reduced.csv", "--k", "3", "--seed", "1", "--out", "labels.csv"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = voices(
        &with_data(&["validate"], &["--reduced", "reduced.csv", "--assignment", "labels.csv", "--out", "report.json"]),
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("Silhouette") && table.contains("DB Index"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["validation"]["n_clusters"], 3);
    assert!(report["validation"]["ari"].as_f64().unwrap() > 0.9);

    let o = voices(
        &with_data(&["report"], &["--reduced", "reduced.csv", "--assignment", "labels.csv", "--svg", "--out", "rep"]),
        d,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["report.json", "report.txt", "scatter.svg"] {
        assert!(d.join("rep").join(f).exists(), "{f}");
    }
    let text = std::fs::read_to_string(d.join("rep/report.txt")).unwrap();
    for tag in ["majority", "minority", "inter-minority"] {
        assert!(text.contains(tag), "{tag} missing from report");
    }
}

#[test]
fn sweep_writes_its_outputs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let sets = [
        "--set", "sweep.methods=[\"pca\"]",
        "--set", "sweep.n_components={ min = 2, max = 2 }",
        "--set", "sweep.k={ min = 2, max = 6 }",
        "--set", "sweep.mode=\"grid\"",
    ];
    let o = voices(&with_data(&["sweep"], &[&sets[..], &["--out", "sw"]].concat()), d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["sweep.jsonl", "config.toml", "summary.txt", "best_reduced.csv", "best_assignment.csv"] {
        assert!(d.join("sw").join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(d.join("sw/sweep.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 5);

    let o = voices(&with_data(&["sweep"], &[&sets[..], &["--resume", "--out", "sw"]].concat()), d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let again = std::fs::read_to_string(d.join("sw/sweep.jsonl")).unwrap();
    assert_eq!(again.lines().count(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let o = voices(&["--help"], d);
    assert_eq!(code(&o), 0);
    let o = voices(&["frobnicate"], d);
    assert_eq!(code(&o), 1);

    let o = voices(&["--set", "cluster.k=\"three\"", "cluster", "--input", "x.csv", "--out", "y.csv"], d);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cluster.k"), "{}", stderr(&o));

    let o = voices(&["cluster", "--input", "missing.csv", "--out", "y.csv"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.csv"));

    synth(d);
    let o = voices(&with_data(&["reduce"], &["--method", "pca", "--n-components", "2", "--out", "r.csv"]), d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = voices(&["cluster", "--input", "r.csv", "--k", "1", "--out", "one.csv"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = voices(&with_data(&["validate"], &["--reduced", "r.csv", "--assignment", "one.csv"]), d);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("silhouette undefined"));
}
