use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn caw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caw")).args(args).output().expect("spawn caw")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn records(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn train_tiny(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--dataset",
        "synthetic:pairwise:12:8",
        "--M",
        "4",
        "--m",
        "2",
        "--dims",
        "6",
        "--epochs",
        "2",
        "--lr",
        "1e-3",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    caw(&args)
}

#[test]
fn missing_dataset_is_input_error() {
    let o = caw(&["train", "--dataset", "/definitely/missing.csv", "--out", "/tmp/unused-caw-out"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/missing.csv"));
}

#[test]
fn malformed_rows_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    fs::write(&path, "0 1 1.0\n1 2 oops\n").unwrap();
    let o = caw(&["ingest", "--dataset", path.to_str().unwrap(), "--format", "edge-list"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.txt") && err.contains('2'), "{err}");
}

#[test]
fn bad_flags_are_input_errors() {
    let o = caw(&["sample", "--dataset", "synthetic:pairwise:2:3", "--node", "0", "--M", "8", "--tree", "4,4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = caw(&["sample", "--dataset", "synthetic:pairwise:2:3", "--node", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
    let o = caw(&["train", "--dataset", "synthetic:pairwise:2:3", "--r-train", "0.9", "--r-val", "0.5", "--out", "/tmp/unused-caw-out"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_writes_headers_and_all_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = train_tiny(&out, &["--mode", "ind", "--mask-fraction", "0.2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["history.tsv", "metrics.tsv", "model.ckpt", "split.manifest"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(out.join("metrics.tsv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("# caw train"));
    assert!(lines.next().unwrap().starts_with("# config {"));
    let rows = records(&metrics);
    assert_eq!(rows[0], ["part", "class", "n_pos", "n_neg", "auc", "ap"]);
    let classes: BTreeSet<(&str, &str)> = rows[1..].iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    for part in ["val", "test"] {
        for class in ["all", "transductive", "inductive", "new-old", "new-new"] {
            assert!(classes.contains(&(part, class)), "{part} {class}");
        }
    }
    let history = records(&fs::read_to_string(out.join("history.tsv")).unwrap());
    assert_eq!(history.len(), 3);
}

#[test]
fn same_seed_same_history() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(train_tiny(&a, &[]).status.success());
    assert!(train_tiny(&b, &["--sequential"]).status.success());
    let strip = |p: &Path| records(&fs::read_to_string(p).unwrap());
    assert_eq!(strip(&a.join("history.tsv")), strip(&b.join("history.tsv")));
    assert_eq!(strip(&a.join("metrics.tsv")), strip(&b.join("metrics.tsv")));
}

#[test]
fn sample_isolated_node_is_all_padding() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.txt");
    fs::write(&path, "a b 1\nb c 2\nz y 50\n").unwrap();
    let o = caw(&["sample", "--dataset", path.to_str().unwrap(), "--node", "z", "--t", "10", "--M", "3", "--m", "2", "--alpha", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = records(&stdout(&o));
    let raw: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "raw").collect();
    assert_eq!(raw.len(), 3);
    for r in raw {
        assert!(r[3].starts_with("z@10"), "{}", r[3]);
        assert_eq!(r[3].matches("_@").count(), 2, "{}", r[3]);
    }
}

#[test]
fn sample_honors_tree() {
    let o = caw(&[
        "sample",
        "--dataset",
        "synthetic:triadic:30:300",
        "--node",
        "0",
        "--with",
        "1",
        "--tree",
        "4,4,4",
        "--M",
        "64",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = records(&stdout(&o));
    let walks = |side: &str| rows.iter().filter(|r| r[0] == "shape" && r[1] == side).count();
    assert_eq!(walks("u"), 64);
    assert_eq!(walks("v"), 64);
    assert!(rows.iter().filter(|r| r[0] == "shape").all(|r| r[3].matches("->").count() == 3));
}

#[test]
fn motifs_reject_attention() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("attn");
    assert!(train_tiny(&out, &["--agg", "attn"]).status.success());
    let o = caw(&["motifs", "--checkpoint", out.join("model.ckpt").to_str().unwrap(), "--dataset", "synthetic:pairwise:12:8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn motif_ratios_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mean");
    assert!(train_tiny(&out, &[]).status.success());
    let ckpt = out.join("model.ckpt");
    let manifest = out.join("split.manifest");
    for shape in ["caw", "aw"] {
        let o = caw(&[
            "motifs",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--dataset",
            "synthetic:pairwise:12:8",
            "--split",
            manifest.to_str().unwrap(),
            "--shape",
            shape,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rows = records(&stdout(&o));
        assert_eq!(rows[0][0], "shape");
        let sum = |col: usize| rows[1..].iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>();
        assert!((sum(4) - 1.0).abs() < 1e-4, "{shape} pos {}", sum(4));
        assert!((sum(5) - 1.0).abs() < 1e-4, "{shape} neg {}", sum(5));
        let logits: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
        assert!(logits.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn bench_iterations_within_bound() {
    let o = caw(&["bench", "--nodes", "50", "--tau", "0.1", "--horizon", "1000", "--calls", "5000", "--points", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = records(&stdout(&o));
    let kv: BTreeMap<&str, &str> = rows.iter().filter(|r| r.len() == 2).map(|r| (r[0].as_str(), r[1].as_str())).collect();
    let it: f64 = kv["mean_iterations"].parse().unwrap();
    assert!(it <= 11.0, "{it}");
    assert_eq!(kv["tau_over_alpha"], "5");
}

#[test]
fn ingest_roundtrips_through_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ing");
    let o = caw(&["ingest", "--dataset", "synthetic:triadic:20:100", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let events = out.join("events.txt");
    let again = caw(&["ingest", "--dataset", events.to_str().unwrap(), "--format", "edge-list"]);
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    let first = records(&fs::read_to_string(out.join("stats.tsv")).unwrap());
    let second = records(&stdout(&again));
    let pick = |rows: &[Vec<String>], k: &str| rows.iter().find(|r| r[0] == k).map(|r| r[1].clone());
    for k in ["events", "train_events", "val_events", "test_events"] {
        assert_eq!(pick(&first, k), pick(&second, k), "{k}");
    }
}

#[test]
fn presets_listed() {
    let o = caw(&["presets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().count() == 7 && text.contains("uci\t"));
}
