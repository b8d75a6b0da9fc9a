use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pspt_core::fixtures::SIXTEEN_NODE;
use tempfile::TempDir;

fn pspt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pspt"))
        .args(args)
        .env_remove("PSPT_THREADS")
        .output()
        .expect("run pspt")
}

fn ok(args: &[&str]) -> String {
    let out = pspt(args);
    assert!(
        out.status.success(),
        "pspt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn edge_lines(text: &str) -> usize {
    text.lines().filter(|l| !l.starts_with('#')).count()
}

#[test]
fn gen_line_and_determinism() {
    let line = ok(&["gen", "line", "--n", "5"]);
    let edges: Vec<&str> = line.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(edges, vec!["0 1", "1 2", "2 3", "3 4"]);

    let a = ok(&["gen", "pa", "--n", "1000", "--m", "3", "--seed", "9"]);
    let b = ok(&["gen", "pa", "--n", "1000", "--m", "3", "--seed", "9"]);
    assert_eq!(a, b);
    assert_eq!(edge_lines(&a), 2991);
    let c = ok(&["gen", "pa", "--n", "1000", "--m", "3", "--seed", "10"]);
    assert_ne!(a, c);

    let grid = ok(&["gen", "grid", "--rows", "3", "--cols", "4", "--max-weight", "5"]);
    assert_eq!(edge_lines(&grid), 3 * 3 + 2 * 4);
    assert!(grid
        .lines()
        .filter(|l| !l.starts_with('#'))
        .all(|l| l.split(' ').count() == 3));
    assert!(!pspt(&["gen", "er", "--n", "10"]).status.success());
}

#[test]
fn build_and_query_sixteen_node() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "fig.txt", SIXTEEN_NODE);
    let idx = dir.path().join("fig.idx");
    let report = ok(&["build", "--graph", s(&g), "--alpha", "1.25", "--out", s(&idx)]);
    let row: Vec<&str> = report.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], &["16", "18", "8", "1.25", "5"]);

    let out = ok(&["query", "--index", s(&idx), "--graph", s(&g), "3", "1"]);
    assert_eq!(out, "distance,resolution,meeting_node,path\n2,intersection,1,3 2 1\n");
    let same = ok(&["query", "--index", s(&idx), "--graph", s(&g), "7", "7"]);
    assert_eq!(same, "distance,resolution,meeting_node,path\n0,trivial,,7\n");

    let unknown = pspt(&["query", "--index", s(&idx), "--graph", s(&g), "1", "404"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("404"));
}

#[test]
fn multi_path_query() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "ts.txt", "1 2\n2 3\n1 4\n4 5\n5 3\n");
    let idx = dir.path().join("ts.idx");
    ok(&["build", "--graph", s(&g), "--alpha", "4", "--out", s(&idx)]);
    let out = ok(&["query", "--index", s(&idx), "--graph", s(&g), "1", "3", "--multi"]);
    assert_eq!(out, "rank,length,path\n1,2,1 2 3\n2,3,1 4 5 3\n");
    let one = ok(&["query", "--index", s(&idx), "--graph", s(&g), "1", "3", "--multi=1"]);
    assert_eq!(one, "rank,length,path\n1,2,1 2 3\n");
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "fig.txt", SIXTEEN_NODE);
    let idx = dir.path().join("fig.idx");
    for alpha in ["0", "-2", "nan"] {
        let out = pspt(&["build", "--graph", s(&g), "--alpha", alpha, "--out", s(&idx)]);
        assert_eq!(out.status.code(), Some(2), "alpha {alpha}");
    }
    ok(&["build", "--graph", s(&g), "--alpha", "1", "--out", s(&idx)]);
    let out = pspt(&["bench", "--index", s(&idx), "--graph", s(&g), "--pairs", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(pspt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "fig.txt", SIXTEEN_NODE);
    let junk = write(&dir, "junk.idx", "not an index");
    let out = pspt(&["query", "--index", s(&junk), "--graph", s(&g), "1", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let missing = dir.path().join("nope.txt");
    let out = pspt(&["build", "--graph", s(&missing), "--out", s(&junk)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_index_bytes() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["gen", "pa", "--n", "3000", "--m", "4", "--max-weight", "3", "--seed", "2"]);
    let g = write(&dir, "pa.txt", &text);
    let one = dir.path().join("one.idx");
    let eight = dir.path().join("eight.idx");
    ok(&["build", "--threads", "1", "--graph", s(&g), "--alpha", "2", "--out", s(&one)]);
    let out = Command::new(env!("CARGO_BIN_EXE_pspt"))
        .args(["build", "--graph", s(&g), "--alpha", "2", "--out", s(&eight)])
        .env("PSPT_THREADS", "8")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read(&one).unwrap(), fs::read(&eight).unwrap());
}

#[test]
fn batch_is_partition_independent() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["gen", "pa", "--n", "2000", "--m", "3", "--seed", "4"]);
    let g = write(&dir, "pa.txt", &text);
    let idx = dir.path().join("pa.idx");
    ok(&["build", "--graph", s(&g), "--alpha", "2", "--out", s(&idx)]);
    let pairs: String = (0..200).map(|i| format!("{} {}\n", i * 7 % 2000, (i * 13 + 500) % 2000)).collect();
    let p = write(&dir, "pairs.txt", &pairs);
    let acct = dir.path().join("acct.csv");
    let run = |m: &str| {
        ok(&[
            "batch", "--index", s(&idx), "--graph", s(&g), "--pairs", s(&p), "--machines", m, "--paths",
            "--accounting", s(&acct),
        ])
    };
    let one = run("1");
    let sixteen = run("16");
    assert_eq!(one, sixteen);
    assert_eq!(one.lines().count(), 201);
    assert!(one.starts_with("u,v,distance,meeting_node,status,path\n"));

    let accounting = fs::read_to_string(&acct).unwrap();
    let mut lines = accounting.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<u64>> = lines
        .filter(|l| !l.starts_with("total"))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 16);
    for r in &rows {
        assert!(r[col("step1_entries")] <= r[col("storage_bound")]);
    }
}

#[test]
fn batch_flags_no_intersection() {
    let dir = TempDir::new().unwrap();
    let cycle: String = (0..12).map(|i| format!("{} {}\n", i, (i + 1) % 12)).collect();
    let g = write(&dir, "cycle.txt", &cycle);
    let idx = dir.path().join("cycle.idx");
    ok(&["build", "--graph", s(&g), "--alpha", "0.2", "--out", s(&idx)]);
    let p = write(&dir, "pairs.txt", "0 6\n3 3\n");
    let out = ok(&["batch", "--index", s(&idx), "--graph", s(&g), "--pairs", s(&p), "--accounting", s(&dir.path().join("a.csv"))]);
    assert_eq!(out, "u,v,distance,meeting_node,status\n0,6,,,no_intersection\n3,3,0,,trivial\n");
}

#[test]
fn eval_and_bench_reports() {
    let dir = TempDir::new().unwrap();
    let text = ok(&["gen", "pa", "--n", "1500", "--m", "3", "--seed", "5"]);
    let g = write(&dir, "pa.txt", &text);
    let args = ["eval", "--graph", s(&g), "--alphas", "0.25,1,4", "--node-sample", "40", "--rounds", "2", "--seed", "3"];
    let a = ok(&args);
    assert_eq!(a, ok(&args));
    assert_eq!(a.lines().count(), 4);
    assert!(a.starts_with("alpha,beta,tie_mode,seed,node_sample,rounds,pairs,"));
    let arb = ok(&["eval", "--graph", s(&g), "--alphas", "1", "--node-sample", "40", "--tie", "arbitrary"]);
    assert!(arb.lines().nth(1).unwrap().contains(",arbitrary,"));

    let idx = dir.path().join("pa.idx");
    ok(&["build", "--graph", s(&g), "--alpha", "4", "--out", s(&idx)]);
    let bench = ok(&["bench", "--index", s(&idx), "--graph", s(&g), "--pairs", "300"]);
    let lines: Vec<&str> = bench.lines().collect();
    assert_eq!(lines[0], "method,pairs,p50_us,p95_us,p99_us,mean_us");
    assert!(lines[1].starts_with("pspt,300,"));
    assert!(lines[2].starts_with("bidirectional,300,"));
}
