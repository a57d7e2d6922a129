use std::process::{Command, Output};
use std::time::Duration;

use loansim::interfaces::{csv, Client, ClientMessage, ServerMessage};
use loansim::{InterventionKind, InterventionSequence, Simulator};

fn loansim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loansim"))
        .args(args)
        .env_remove("SIMBANK_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn generate_matches_the_library() {
    let text = stdout(&loansim(&["generate", "--cases", "30", "--delta", "0.5", "--seed", "9"]));
    let active = InterventionSequence::parse("choose_procedure,set_interest_rate,time_contact_hq").unwrap();
    let log = Simulator::new(9).generate_log(30, 0.5, &active, 0).unwrap();
    let mut expected = Vec::new();
    csv::write_log(&mut expected, &log, false).unwrap();
    assert_eq!(text.as_bytes(), expected.as_slice());
}

#[test]
fn generate_to_file_with_hidden_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    let p = path.to_str().unwrap();
    stdout(&loansim(&["generate", "--cases", "10", "--out", p, "--include-hidden"]));
    let rows = csv::import_csv(&path).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.quality.is_some()));
}

#[test]
fn seed_comes_from_the_environment() {
    let run = |env: Option<&str>, args: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_loansim"));
        c.args(args).env_remove("SIMBANK_SEED");
        if let Some(v) = env {
            c.env("SIMBANK_SEED", v);
        }
        stdout(&c.output().unwrap())
    };
    let from_env = run(Some("5"), &["generate", "--cases", "5"]);
    assert_eq!(from_env, run(None, &["generate", "--cases", "5", "--seed", "5"]));
    assert_ne!(from_env, run(None, &["generate", "--cases", "5"]));
}

#[test]
fn config_file_sets_seed_and_process() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "seed = 5\n[process]\npriority_surcharge = 1000.0\n").unwrap();
    let with_cfg = stdout(&loansim(&["--config", path.to_str().unwrap(), "generate", "--cases", "5"]));
    assert_eq!(with_cfg, stdout(&loansim(&["generate", "--cases", "5", "--seed", "5"])));
    std::fs::write(&path, "[process]\nno_such_key = 1\n").unwrap();
    assert!(!loansim(&["--config", path.to_str().unwrap(), "generate"]).status.success());
}

#[test]
fn bank_evaluation_is_exactly_zero() {
    let text = stdout(&loansim(&[
        "evaluate", "--policy", "bank", "--interventions", "set_interest_rate", "--n-test", "200", "--reps", "2",
        "--json",
    ]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["mean"], 0.0);
    assert_eq!(v["std"], 0.0);
}

#[test]
fn unknown_policy_fails() {
    let out = loansim(&["evaluate", "--policy", "psychic"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("psychic"));
}

#[test]
fn counterfactuals_mark_one_oracle_branch() {
    let text = stdout(&loansim(&["counterfactuals", "--case", "3", "--interventions", "set_interest_rate", "--json"]));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 3);
    let best: Vec<_> = rows.iter().filter(|r| r["oracle"] == true).collect();
    assert_eq!(best.len(), 1);
    let max = rows.iter().map(|r| r["profit"].as_f64().unwrap()).fold(f64::MIN, f64::max);
    assert_eq!(best[0]["profit"].as_f64().unwrap(), max);
}

#[test]
fn sweep_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    stdout(&loansim(&[
        "sweep", "--policy", "random", "--interventions", "choose_procedure", "--delta-list", "0,0.5", "--n-test", "200",
        "--reps", "2", "--plot-data", path.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "delta,mean,ci_lo,ci_hi");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("0.500000,"));
}

#[test]
fn benchmark_prints_a_table() {
    let text = stdout(&loansim(&[
        "benchmark", "--interventions", "choose_procedure", "--policies", "bank,oracle", "--n-test", "200", "--reps", "1",
    ]));
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("bank") && lines[0].contains("oracle"));
    assert!(lines[1].starts_with("choose_procedure"));
}

#[test]
fn serve_answers_the_protocol() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_loansim"))
        .args(["serve", "--port", &port.to_string(), "--seed", "4"])
        .env_remove("SIMBANK_SEED")
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let mut client = None;
    for _ in 0..100 {
        if let Ok(c) = Client::connect(("127.0.0.1", port)) {
            client = Some(c);
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    let mut client = client.expect("server came up");
    let ready = client
        .send(&ClientMessage::Hello {
            interventions: vec![InterventionKind::ChooseProcedure],
            delta: 1.0,
        })
        .unwrap();
    assert!(matches!(ready, ServerMessage::Ready { seed: 4, .. }));
    client.send_raw(r#"{"op":"reset","case_nr":1}"#).unwrap();
    let done = client.send_raw(r#"{"op":"act","action":"standard"}"#).unwrap();
    let active = InterventionSequence::single(InterventionKind::ChooseProcedure);
    let mut local = Simulator::new(4).open_session(1, &active).unwrap();
    local.step("standard".parse().unwrap()).unwrap();
    match done {
        ServerMessage::Done { profit, .. } => assert_eq!(profit, local.result().unwrap().profit),
        other => panic!("unexpected {other:?}"),
    }
    child.kill().unwrap();
    child.wait().unwrap();
}
