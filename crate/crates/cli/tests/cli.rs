use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fairdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairdiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn ratio(s: &str) -> (i128, i128) {
    let (p, q) = s.split_once('/').unwrap_or((s, "1"));
    (p.parse().unwrap(), q.parse().unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn chore_even_paz_caps_every_cost() {
    let report = json(&fairdiv(&[
        "divide",
        "--protocol",
        "even-paz",
        "--mode",
        "chore",
        "--n",
        "81",
        "--seed",
        "1",
    ]));
    assert_eq!(report["proportionality"]["proportional"], true);
    let players = report["proportionality"]["players"].as_array().unwrap();
    assert_eq!(players.len(), 81);
    for p in players {
        let (num, den) = ratio(p["value"].as_str().unwrap());
        assert!(num * 81 <= den, "cost {num}/{den} above 1/81");
    }
    assert!(report["queries"]["total"].as_u64().unwrap() <= 81 * 7);
}

#[test]
fn cut_and_choose_asks_two_queries() {
    let report = json(&fairdiv(&[
        "divide",
        "--protocol",
        "cut-and-choose",
        "--n",
        "2",
        "--seed",
        "4",
    ]));
    assert_eq!(report["queries"]["total"], 2);
    assert_eq!(report["allocation"]["pieces"].as_array().unwrap().len(), 2);
}

#[test]
fn query_log_has_one_line_per_query() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let report = json(&fairdiv(&[
        "divide",
        "--n",
        "5",
        "--log",
        log.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(
        text.lines().count() as u64,
        report["queries"]["total"].as_u64().unwrap()
    );
    for line in text.lines() {
        let row: Value = serde_json::from_str(line).unwrap();
        assert!(row["kind"] == "eval" || row["kind"] == "cut");
    }
}

#[test]
fn budget_exhaustion_is_an_error() {
    let out = fairdiv(&["divide", "--n", "8", "--budget", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn valuations_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "v.json",
        r#"[
  {"type": "piecewise_constant", "segments": [{"end": "1", "density": "1"}]},
  {"type": "piecewise_constant", "segments": [{"end": "1/2", "density": "3/2"}, {"end": "1", "density": "1/2"}]}
]"#,
    );
    let report = json(&fairdiv(&[
        "divide",
        "--protocol",
        "cut-and-choose",
        "--valuations",
        &file,
    ]));
    assert_eq!(report["n"], 2);
    assert!(report["seed"].is_null());
}

#[test]
fn unnormalized_valuation_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "v.json",
        r#"[{"type": "piecewise_constant", "segments": [{"end": "1", "density": "2"}]}]"#,
    );
    let out = fairdiv(&["divide", "--valuations", &file]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[0]"));
}

#[test]
fn malformed_json_names_the_position() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "v.json",
        "[\n  {\"type\": \"piecewise_constant\",\n   \"segments\": [}\n]",
    );
    let out = fairdiv(&["divide", "--valuations", &file]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("v.json:3:"), "{err}");
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "v.json",
        r#"[{"type": "piecewise_constant", "segments": [{"end": "1", "density": "1"}]},
            {"type": "piecewise_constant", "segments": [{"end": 1, "density": "1"}]}]"#,
    );
    let out = fairdiv(&["divide", "--valuations", &file]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[1].segments[0].end"), "{err}");
}

#[test]
fn reduce_finds_enough_heavy_pieces() {
    let report = json(&fairdiv(&["reduce", "--n", "9", "--seed", "3"]));
    let required = report["required"].as_u64().unwrap();
    assert!(required >= 3);
    assert!(report["heavy_count"].as_u64().unwrap() >= required);
}

#[test]
fn reduce_rejects_non_dense_input() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(
        dir.path(),
        "v.json",
        r#"[
  {"type": "piecewise_constant", "segments": [{"end": "1/4", "density": "3"}, {"end": "1", "density": "1/3"}]},
  {"type": "piecewise_constant", "segments": [{"end": "1", "density": "1"}]}
]"#,
    );
    let out = fairdiv(&["reduce", "--valuations", &file]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scaling_csv_stays_under_n_log_n() {
    let out = fairdiv(&[
        "scaling", "--ns", "4,16,64", "--format", "csv", "--seeds", "0,1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("n,protocol,mode,seed,queries,ratio_nlogn,ratio_n2")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3 * 2 * 2);
    let even_paz: Vec<_> = rows.iter().filter(|r| r[1] == "even-paz").collect();
    assert_eq!(even_paz.len(), 6);
    for row in even_paz {
        assert!(row[5].parse::<f64>().unwrap() <= 2.0, "{row:?}");
    }
}

#[test]
fn scaling_single_n_gives_one_row_per_protocol() {
    let report = json(&fairdiv(&["scaling", "--ns", "32"]));
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["n"] == 32));
}

#[test]
fn adversary_refutes_a_short_game() {
    let report = json(&fairdiv(&[
        "adversary",
        "--k",
        "60",
        "--strategy",
        "greedy-dense",
        "--budget",
        "4",
    ]));
    assert_eq!(report["refutation"]["outcome"], "refuted");
    assert_eq!(report["vacuous"], false);
    assert_eq!(report["queries_used"], 4);
}

#[test]
fn adversary_refutes_a_blind_claim() {
    let report = json(&fairdiv(&["adversary", "--k", "60", "--budget", "0"]));
    assert_eq!(report["refutation"]["outcome"], "refuted");
}

#[test]
fn adversary_flags_vacuous_threshold() {
    let report = json(&fairdiv(&["adversary", "--k", "11"]));
    assert_eq!(report["threshold"], 0);
    assert_eq!(report["vacuous"], true);
    assert!(!report["notes"].as_array().unwrap().is_empty());
}

#[test]
fn adversary_rejects_small_k_unless_permissive() {
    assert_eq!(fairdiv(&["adversary", "--k", "5"]).status.code(), Some(2));
    let report = json(&fairdiv(&["adversary", "--k", "5", "--permissive-n"]));
    assert_eq!(report["k"], 5);
}

#[test]
fn adversary_transcript_matches_query_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let report = json(&fairdiv(&[
        "adversary",
        "--k",
        "60",
        "--strategy",
        "cut-probe",
        "--budget",
        "3",
        "--transcript",
        path.to_str().unwrap(),
    ]));
    let lines = std::fs::read_to_string(&path).unwrap().lines().count() as u64;
    assert_eq!(lines, report["queries_used"].as_u64().unwrap());
}

#[test]
fn unknown_strategy_is_rejected() {
    let out = fairdiv(&["adversary", "--k", "60", "--strategy", "psychic"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("psychic"));
}

#[test]
fn runs_are_deterministic() {
    for args in [
        &["divide", "--n", "12", "--seed", "9"][..],
        &["reduce", "--n", "6", "--seed", "2"][..],
        &[
            "adversary",
            "--k",
            "60",
            "--strategy",
            "random-probe",
            "--budget",
            "4",
            "--seed",
            "5",
        ][..],
    ] {
        assert_eq!(fairdiv(args).stdout, fairdiv(args).stdout, "{args:?}");
    }
}
