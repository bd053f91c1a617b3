use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dqest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dqest")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const TRAJ_HEADER: &str =
    "task_index,nominal,majority,chao92_total,vchao92_total,switch_total,xi_pos,xi_neg,coverage_hat,truth,flags\n";

#[test]
fn empty_vote_file_gives_header_only() {
    let dir = TempDir::new().unwrap();
    for body in ["", "task_id,worker_id,item_id,label\n"] {
        let votes = write(&dir, "votes.csv", body);
        let o = dqest(&["estimate", s(&votes), "--n-items", "5"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o), TRAJ_HEADER);
    }
}

#[test]
fn malformed_vote_reports_line_and_exit_two() {
    let dir = TempDir::new().unwrap();
    let votes = write(
        &dir,
        "votes.csv",
        "task_id,worker_id,item_id,label\n0,a,0,1\n0,a,1,maybe\n",
    );
    let o = dqest(&["estimate", s(&votes), "--n-items", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn duplicate_worker_vote_rejected() {
    let dir = TempDir::new().unwrap();
    let votes = write(
        &dir,
        "votes.csv",
        "task_id,worker_id,item_id,label\n0,a,0,1\n1,a,0,0\n",
    );
    let o = dqest(&["estimate", s(&votes), "--n-items", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn item_outside_universe_rejected() {
    let dir = TempDir::new().unwrap();
    let votes = write(&dir, "votes.csv", "task_id,worker_id,item_id,label\n0,a,7,1\n");
    let o = dqest(&["estimate", s(&votes), "--n-items", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("item_id 7"));
}

#[test]
fn unknown_scenario_key_named_in_error() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        &dir,
        "sc.json",
        r#"{"n_items":10,"n_dirty":2,"task_size":3,"n_tasks":4,"fp_rte":0.1}"#,
    );
    let o = dqest(&["simulate", s(&sc)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fp_rte"), "{}", stderr(&o));
}

#[test]
fn out_of_range_scenario_rejected() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        &dir,
        "sc.json",
        r#"{"n_items":10,"n_dirty":20,"task_size":3,"n_tasks":4}"#,
    );
    let o = dqest(&["simulate", s(&sc)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("n_dirty"));
}

#[test]
fn simulate_round_trips_through_estimate() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        &dir,
        "sc.json",
        r#"{"n_items":200,"n_dirty":20,"task_size":10,"n_tasks":40,"fp_rate":0.02,"fn_rate":0.1,"seed":9}"#,
    );
    let votes = dir.path().join("votes.csv");
    let truth = dir.path().join("truth.csv");
    let o = dqest(&[
        "simulate",
        s(&sc),
        "--permutations",
        "1",
        "--votes-out",
        s(&votes),
        "--truth-out",
        s(&truth),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let averaged = stdout(&o);

    let e = dqest(&["estimate", s(&votes), "--n-items", "200", "--truth", s(&truth)]);
    assert!(e.status.success(), "{}", stderr(&e));
    let traj = stdout(&e);

    // with one (identity) permutation the mean is the single run and std is 0
    let mut rdr = csv::Reader::from_reader(traj.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 40);
    let mut rdr = csv::Reader::from_reader(averaged.as_bytes());
    let mut checked = 0;
    for rec in rdr.records().map(Result::unwrap) {
        let k: usize = rec[0].parse().unwrap();
        let col = match &rec[1] {
            "nominal" => 1,
            "majority" => 2,
            "chao92" => 3,
            "vchao92" => 4,
            "switch" => 5,
            "xi_pos" => 6,
            "xi_neg" => 7,
            other => panic!("unexpected series {other}"),
        };
        assert_eq!(&rec[2], &rows[k - 1][col], "task {k} {}", &rec[1]);
        if !rec[2].is_empty() {
            assert_eq!(&rec[3], "0");
        }
        if col <= 5 {
            assert_eq!(&rec[4], &rows[k - 1][9]);
        }
        checked += 1;
    }
    assert_eq!(checked, 40 * 7);
}

#[test]
fn simulate_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let sc = write(
        &dir,
        "sc.json",
        r#"{"n_items":50,"n_dirty":5,"task_size":5,"n_tasks":10,"fn_rate":0.1,"seed":1}"#,
    );
    let a = stdout(&dqest(&["simulate", s(&sc), "--permutations", "2"]));
    let b = stdout(&dqest(&["simulate", s(&sc), "--permutations", "2", "--seed", "2"]));
    let c = stdout(&dqest(&["simulate", s(&sc), "--permutations", "2", "--seed", "1"]));
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn estimate_with_scores_adds_column() {
    let dir = TempDir::new().unwrap();
    let votes = write(
        &dir,
        "votes.csv",
        "task_id,worker_id,item_id,label\n0,a,0,1\n0,a,1,0\n1,b,0,1\n1,b,1,0\n",
    );
    let scores = write(&dir, "scores.csv", "item_id,score\n0,0.7\n1,0.6\n2,0.95\n3,0.1\n");
    let o = dqest(&[
        "estimate",
        s(&votes),
        "--n-items",
        "4",
        "--scores",
        s(&scores),
        "--alpha",
        "0.5",
        "--beta",
        "0.9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert!(lines.next().unwrap().ends_with("truth,perfect_heuristic_total,flags"));
    // one auto-dirty item on top of the switch total
    let last: Vec<&str> = out.lines().last().unwrap().split(',').collect();
    let switch: f64 = last[5].parse().unwrap();
    let perfect: f64 = last[10].parse().unwrap();
    assert_eq!(perfect, switch + 1.0);
}

#[test]
fn pairs_strata_from_cli() {
    let dir = TempDir::new().unwrap();
    let records = write(
        &dir,
        "records.csv",
        "record_id,name,city\n1,Acme Corp,Boston\n2,Acme Corp,Boston\n3,zzzzzzz,qqqq\n",
    );
    let o = dqest(&["pairs", s(&records)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "left_id,right_id,similarity,stratum");
    assert_eq!(lines.len(), 4);
    assert!(lines.contains(&"1,2,1,auto_dirty"), "{out}");
    assert!(lines.iter().any(|l| l.starts_with("1,3,") && l.ends_with("auto_clean")));
    assert!(lines.iter().any(|l| l.starts_with("2,3,") && l.ends_with("auto_clean")));
}

#[test]
fn pairs_rejects_duplicate_ids() {
    let dir = TempDir::new().unwrap();
    let records = write(&dir, "records.csv", "record_id,name\n1,a\n1,b\n");
    let o = dqest(&["pairs", s(&records)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duplicate record_id 1"));
}

#[test]
fn pairs_rejects_inverted_thresholds() {
    let dir = TempDir::new().unwrap();
    let records = write(&dir, "records.csv", "record_id,name\n1,a\n2,b\n");
    let o = dqest(&["pairs", s(&records), "--alpha", "0.9", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_file_is_input_error() {
    let o = dqest(&["estimate", "/nonexistent/votes.csv", "--n-items", "3"]);
    assert_eq!(o.status.code(), Some(2));
}
