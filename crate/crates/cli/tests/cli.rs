use std::path::Path;
use std::process::{Command, Output};

use latent_twd::data::{load_matrix, TableFormat};
use latent_twd::oracle::GeneralTree;
use latent_twd::{normalize_rows, twd_matrix, DistanceMatrixOut, WeightedBinaryTree};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-twd"))
        .current_dir(dir)
        .env_remove("LATENT_TWD_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn payload(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn newick(dir: &Path, name: &str) -> WeightedBinaryTree {
    WeightedBinaryTree::from_newick(&payload(&read(dir, name))).unwrap()
}

#[test]
fn synth_outputs_have_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "hier-docs",
            "--n",
            "100",
            "--seed",
            "1",
            "--output-dir",
            "docs",
        ],
    );
    let x = load_matrix(d.join("docs/X.csv"), TableFormat::Csv).unwrap();
    assert_eq!((x.nrows(), x.ncols()), (100, 8));
    assert!(read(d, "docs/labels.csv").starts_with("# latent-twd"));
    let truth = GeneralTree::from_newick(&payload(&read(d, "docs/truth.nwk"))).unwrap();
    assert_eq!(truth.leaves().len(), 8);

    ok(d, &["synth", "tree-gauss", "--n", "20", "--output-dir", "gauss"]);
    let x = load_matrix(d.join("gauss/X.csv"), TableFormat::Csv).unwrap();
    assert_eq!(x.ncols(), 15);
    assert!(!d.join("gauss/labels.csv").exists());

    ok(
        d,
        &[
            "synth",
            "hier-docs",
            "--n",
            "100",
            "--seed",
            "1",
            "--output-dir",
            "again",
        ],
    );
    assert_eq!(read(d, "docs/X.csv"), read(d, "again/X.csv"));
}

#[test]
fn unknown_synth_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["synth", "words"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tree_then_distances_match_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "hier-docs", "--n", "60", "--output-dir", "."]);
    ok(
        d,
        &[
            "tree-build",
            "--input",
            "X.csv",
            "--output",
            "tree.nwk",
            "--spectrum",
            "spec.csv",
        ],
    );
    let text = read(d, "tree.nwk");
    assert!(text.contains("# config: epsilon_factor=2 max_scale=7 seed=0 landmark_tau=none"));
    let t = newick(d, "tree.nwk");
    assert_eq!(t.num_leaves(), 8);
    assert!(read(d, "spec.csv").lines().any(|l| l.starts_with("index,eigval")));

    ok(d, &["tree-build", "--input", "X.csv", "--output", "tree2.nwk"]);
    assert_eq!(text, read(d, "tree2.nwk"));

    ok(
        d,
        &["dist", "--input", "X.csv", "--tree", "tree.nwk", "--output", "w.csv"],
    );
    let w = DistanceMatrixOut::read_csv(std::fs::File::open(d.join("w.csv")).unwrap()).unwrap();
    let x = load_matrix(d.join("X.csv"), TableFormat::Csv).unwrap();
    let lib = twd_matrix(&t.reorder_leaves(x.col_ids()).unwrap(), &normalize_rows(&x).unwrap()).unwrap();
    assert_eq!(w.matrix(), lib.matrix());
    assert_eq!(w.ids(), x.row_ids());
}

#[test]
fn single_scale_distances_and_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("x.tsv"), "id\ta\tb\tc\nr1\t1\t2\t0\nr2\t1\t2\t0\nr3\t0\t1\t3\n").unwrap();
    ok(
        d,
        &["dist", "--input", "x.tsv", "--single-scale", "2", "--output", "w.csv"],
    );
    let w = DistanceMatrixOut::read_csv(std::fs::File::open(d.join("w.csv")).unwrap()).unwrap();
    assert_eq!(w.get(0, 1), 0.0);
    assert!(w.get(0, 2) > 0.0);
    assert_eq!(w.get(0, 2), w.get(2, 0));
    assert!(read(d, "w.csv").contains("# single_scale: 2"));
}

#[test]
fn mismatched_tree_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("x.csv"), "a,b,c\n1,2,0\n0,1,3\n").unwrap();
    std::fs::write(d.join("t.nwk"), "((a:1,b:1):1,d:1);").unwrap();
    let out = run(d, &["dist", "--input", "x.csv", "--tree", "t.nwk", "--output", "w.csv"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tree_decode:"));
    assert!(!d.join("w.csv").exists());
}

#[test]
fn one_feature_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("x.csv"), "a\n1\n2\n").unwrap();
    let out = run(d, &["tree-build", "--input", "x.csv", "--output", "t.nwk"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("t.nwk").exists());
    let leftovers = std::fs::read_dir(d).unwrap().count();
    assert_eq!(leftovers, 1);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "hier-docs", "--n", "40", "--output-dir", "."]);
    std::fs::write(d.join("cfg.json"), r#"{"epsilon_factor": 1.0, "max_scale": 3}"#).unwrap();
    ok(
        d,
        &[
            "--config",
            "cfg.json",
            "tree-build",
            "--input",
            "X.csv",
            "--output",
            "a.nwk",
            "--max-scale",
            "5",
        ],
    );
    assert!(read(d, "a.nwk").contains("epsilon_factor=1 max_scale=5"));
    std::fs::write(d.join("bad.json"), r#"{"eps": 1.0}"#).unwrap();
    let out = run(
        d,
        &[
            "--config",
            "bad.json",
            "tree-build",
            "--input",
            "X.csv",
            "--output",
            "b.nwk",
        ],
    );
    assert!(!out.status.success());
    let out = run(
        d,
        &[
            "tree-build",
            "--input",
            "X.csv",
            "--output",
            "c.nwk",
            "--max-scale",
            "20",
        ],
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("config:"));
}

#[test]
fn threads_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "hier-docs", "--n", "30", "--output-dir", "."]);
    ok(
        d,
        &["--threads", "2", "tree-build", "--input", "X.csv", "--output", "a.nwk"],
    );
    let out = Command::new(env!("CARGO_BIN_EXE_latent-twd"))
        .current_dir(d)
        .env("LATENT_TWD_THREADS", "1")
        .args(["tree-build", "--input", "X.csv", "--output", "b.nwk"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read(d, "a.nwk"), read(d, "b.nwk"));
}

#[test]
fn eval_knn_writes_report_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "hier-docs", "--n", "60", "--output-dir", "."]);
    ok(d, &["tree-build", "--input", "X.csv", "--output", "t.nwk"]);
    ok(d, &["dist", "--input", "X.csv", "--tree", "t.nwk", "--output", "w.csv"]);
    let out = ok(
        d,
        &[
            "eval-knn",
            "--dist",
            "w.csv",
            "--labels",
            "labels.csv",
            "--output",
            "knn.csv",
            "--ks",
            "1,3,5",
        ],
    );
    let csv = payload(&read(d, "knn.csv"));
    assert_eq!(csv.lines().next(), Some("k,mean_accuracy,std_accuracy"));
    assert_eq!(csv.lines().count(), 4);
    assert!(read(d, "knn.txt").contains("best k="));
    assert!(String::from_utf8_lossy(&out.stdout).contains("best k="));

    std::fs::write(d.join("short.csv"), "a\nb\n").unwrap();
    let out = run(
        d,
        &[
            "eval-knn",
            "--dist",
            "w.csv",
            "--labels",
            "short.csv",
            "--output",
            "k2.csv",
        ],
    );
    assert!(String::from_utf8_lossy(&out.stderr).contains("eval:"));
}

#[test]
fn oracle_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.csv"), "0,3\n2,0\n").unwrap();
    std::fs::write(d.join("dirac1.csv"), "1\n0\n").unwrap();
    std::fs::write(d.join("dirac2.csv"), "0\n1\n").unwrap();
    let out = ok(
        d,
        &[
            "oracle",
            "ot",
            "--cost",
            "c.csv",
            "--mu",
            "dirac1.csv",
            "--nu",
            "dirac2.csv",
        ],
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "3");

    std::fs::write(d.join("t.nwk"), "((a:1,b:2)x:0.5,c:3)r;").unwrap();
    std::fs::write(d.join("mu.csv"), "a,0.5\nb,0.5\n").unwrap();
    std::fs::write(d.join("nu.csv"), "c,1\n").unwrap();
    let out = ok(
        d,
        &[
            "oracle",
            "tw-ref",
            "--tree",
            "t.nwk",
            "--mu",
            "mu.csv",
            "--nu",
            "nu.csv",
            "--check-ot",
        ],
    );
    let vals: Vec<f64> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    // a: 1 + 0.5 + 3, b: 2 + 0.5 + 3, half mass each
    assert!((vals[0] - 5.0).abs() < 1e-12);
    assert!((vals[0] - vals[1]).abs() < 1e-9);

    let out = run(
        d,
        &[
            "oracle",
            "ot",
            "--cost",
            "nope.csv",
            "--mu",
            "dirac1.csv",
            "--nu",
            "dirac2.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("I/O error"));
}

#[test]
fn repro_commands_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["repro", "synthetic-docs", "--output-dir", "docs"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy >= 0.95: PASS"));
    assert!(read(d, "docs/synthetic_docs.txt").contains("PASS"));

    ok(
        d,
        &[
            "repro",
            "toy-recovery",
            "--sizes",
            "10,32",
            "--seeds",
            "2",
            "--output",
            "toy.csv",
        ],
    );
    let text = read(d, "toy.csv");
    assert!(text.contains("epsilon_factor=0.1"));
    let body = payload(&text);
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("n,mean,seed_0,seed_1"));
    assert!(lines.next().unwrap().starts_with("10,"));
    ok(
        d,
        &[
            "repro",
            "toy-recovery",
            "--sizes",
            "10,32",
            "--seeds",
            "2",
            "--output",
            "toy2.csv",
        ],
    );
    assert_eq!(text, read(d, "toy2.csv"));
}

#[test]
fn bench_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["bench", "--sizes", "16,64", "--pairs", "4", "--output", "b.csv"]);
    let body = payload(&read(d, "b.csv"));
    assert_eq!(body.lines().count(), 3);
    assert!(body.starts_with("m,pairs,median_ns_per_pair"));
}
