use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use relgrid::cli::PlanFile;
use relgrid::planner::evaluate;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn relgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relgrid"))
        .current_dir(fixtures())
        .args(args)
        .output()
        .unwrap()
}

fn relgrid_out(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relgrid"))
        .current_dir(fixtures())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn error_line(o: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("not a JSON error line: {line}"))
}

fn payload(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let m = v["manifest"].as_object_mut().unwrap();
    assert!(m.remove("started_at").is_some());
    assert!(m.remove("finished_at").is_some());
    v
}

#[test]
fn help_exits_zero() {
    let o = relgrid(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["evaluate", "mcs", "indices", "scenarios", "plan", "advise"] {
        assert!(text.contains(sub), "{sub} missing from usage");
    }
}

#[test]
fn evaluate_writes_trace_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = relgrid_out(
        &[
            "evaluate",
            "--system",
            "three_bus.json",
            "--scenarios",
            "scenarios.csv",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let doc = payload(&tmp.path().join("evaluate.json"));
    assert_eq!(doc["manifest"]["subcommand"], "evaluate");
    assert_eq!(doc["manifest"]["inputs"].as_array().unwrap().len(), 2);
    assert!(doc["result"]["report"]["adequacy"]["lolp"].is_number());
    for name in ["trace_sunny.csv", "trace_overcast.csv", "index_summary.csv"] {
        assert!(tmp.path().join(name).exists(), "{name}");
    }
    let trace = std::fs::read_to_string(tmp.path().join("trace_sunny.csv")).unwrap();
    assert_eq!(trace.lines().count(), 49);
    assert!(trace.lines().next().unwrap().contains("soc_bess"));
}

#[test]
fn missing_column_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    std::fs::write(
        &csv,
        "scenario_id,probability,step,load_multiplier,pv_cf\ns,1,0,1,0.5\n",
    )
    .unwrap();
    let o = relgrid(&[
        "evaluate",
        "--system",
        "three_bus.json",
        "--scenarios",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_line(&o);
    assert_eq!(e["error"]["kind"], "input");
    assert!(e["error"]["message"].as_str().unwrap().contains("wind_cf"));
    assert_eq!(String::from_utf8_lossy(&o.stderr).trim().lines().count(), 1);
}

#[test]
fn bad_value_names_file_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("bad.csv");
    std::fs::write(
        &csv,
        "scenario_id,probability,step,load_multiplier,pv_cf,wind_cf\ns,1,0,1,0.5,0.1\ns,1,1,1,oops,0.1\n",
    )
    .unwrap();
    let o = relgrid(&[
        "evaluate",
        "--system",
        "three_bus.json",
        "--scenarios",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let msg = error_line(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.contains("bad.csv:3"), "{msg}");
    assert!(msg.contains("pv_cf"), "{msg}");
}

#[test]
fn mcs_is_reproducible_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "mcs",
        "--system",
        "three_bus.json",
        "--scenarios",
        "scenarios.csv",
        "--iterations",
        "300",
        "--seed",
        "5",
    ];
    assert_eq!(
        relgrid_out(&args, &tmp.path().join("a")).status.code(),
        Some(0)
    );
    assert_eq!(
        relgrid_out(&args, &tmp.path().join("b")).status.code(),
        Some(0)
    );
    let a = payload(&tmp.path().join("a/mcs.json"));
    let b = payload(&tmp.path().join("b/mcs.json"));
    assert_eq!(a.to_string(), b.to_string());
    assert_eq!(a["manifest"]["seed"], 5);
    assert_eq!(a["manifest"]["seed_source"], "cli");
    assert_eq!(
        std::fs::read(tmp.path().join("a/outage_log.csv")).unwrap(),
        std::fs::read(tmp.path().join("b/outage_log.csv")).unwrap()
    );
    let other = [
        "mcs",
        "--system",
        "three_bus.json",
        "--scenarios",
        "scenarios.csv",
        "--iterations",
        "300",
        "--seed",
        "6",
    ];
    assert_eq!(
        relgrid_out(&other, &tmp.path().join("c")).status.code(),
        Some(0)
    );
    assert_ne!(
        payload(&tmp.path().join("c/mcs.json"))["result"],
        a["result"]
    );
}

#[test]
fn mcs_nonsequential_marks_chronology() {
    let o = relgrid(&[
        "mcs",
        "--system",
        "radial_feeder.json",
        "--mode",
        "nonsequential",
        "--iterations",
        "1000",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["chronology"], "none");
    assert!(v["result"]["load_points"][0]["lambda"].is_null());
}

#[test]
fn mcs_config_errors() {
    let zero = relgrid(&[
        "mcs",
        "--system",
        "radial_feeder.json",
        "--iterations",
        "0",
        "--seed",
        "1",
    ]);
    assert_eq!(zero.status.code(), Some(2));
    let unseeded = relgrid(&[
        "mcs",
        "--system",
        "radial_feeder.json",
        "--iterations",
        "10",
    ]);
    assert_eq!(unseeded.status.code(), Some(2));
    assert!(error_line(&unseeded)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("--seed"));
    let short = relgrid(&[
        "mcs",
        "--system",
        "radial_feeder.json",
        "--iterations",
        "10",
        "--seed",
        "1",
        "--momentary-threshold",
        "0.5",
    ]);
    assert_eq!(short.status.code(), Some(2));
}

#[test]
fn generated_seed_is_recorded() {
    let o = relgrid(&[
        "mcs",
        "--system",
        "radial_feeder.json",
        "--iterations",
        "20",
        "--no-seed-ok",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["manifest"]["seed_source"], "generated");
    assert!(v["manifest"]["seed"].is_u64());
}

#[test]
fn momentary_threshold_moves_events_between_indices() {
    let run = |minutes: &str| -> Value {
        let o = relgrid(&[
            "mcs",
            "--system",
            "three_bus.json",
            "--scenarios",
            "scenarios.csv",
            "--iterations",
            "400",
            "--seed",
            "3",
            "--momentary-threshold",
            minutes,
        ]);
        assert_eq!(o.status.code(), Some(0));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let (short, long) = (run("1"), run("600"));
    let m = |v: &Value| {
        v["result"]["load_points"][2]["momentary_lambda"]
            .as_f64()
            .unwrap()
    };
    assert!(m(&long) > m(&short));
    assert_eq!(long["result"]["momentary_threshold_minutes"], 600.0);
}

#[test]
fn indices_report_and_meshed_refusal() {
    let tmp = tempfile::tempdir().unwrap();
    let o = relgrid_out(
        &[
            "indices",
            "--system",
            "three_bus.json",
            "--scenarios",
            "scenarios.csv",
            "--voll",
            "5",
        ],
        tmp.path(),
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(tmp.path().join("index_summary.csv")).unwrap();
    assert!(csv.starts_with("index,scope,value,unit,horizon"));
    for row in [
        "saifi,system",
        "lolp,system",
        "lambda_i,bus3,0.75",
        "interruption_cost,system",
    ] {
        assert!(csv.contains(row), "{row}");
    }

    let meshed = tmp.path().join("meshed.json");
    let mut model: Value = serde_json::from_str(
        &std::fs::read_to_string(fixtures().join("radial_feeder.json")).unwrap(),
    )
    .unwrap();
    model["load_points"][0]["supply_paths"] = serde_json::json!([["c1"], ["c2", "c3"]]);
    std::fs::write(&meshed, model.to_string()).unwrap();
    let o = relgrid(&["indices", "--system", meshed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("--mcs-iterations"));
    let o = relgrid(&[
        "indices",
        "--system",
        meshed.to_str().unwrap(),
        "--mcs-iterations",
        "200",
        "--seed",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn scenarios_from_history() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "scenarios",
        "--history",
        "history.csv",
        "--regimes",
        "3",
        "--days",
        "10",
        "--count",
        "2",
        "--seed",
        "8",
    ];
    let o = relgrid_out(&args, tmp.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let doc = payload(&tmp.path().join("scenarios.json"));
    assert_eq!(doc["result"]["scenarios"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(tmp.path().join("scenarios.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 240);

    let gap = tmp.path().join("gap.csv");
    std::fs::write(
        &gap,
        "timestamp,load_multiplier,pv_cf,wind_cf\n2023-01-01T00:00:00,1,0,0.3\n2023-01-01T02:00:00,1,0,0.3\n",
    )
    .unwrap();
    let o = relgrid(&[
        "scenarios",
        "--history",
        gap.to_str().unwrap(),
        "--regimes",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(error_line(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("2023-01-01T01:00:00"));
}

#[test]
fn plan_feasible_matches_enumeration() {
    let tmp = tempfile::tempdir().unwrap();
    let o = relgrid_out(&["plan", "plan_feasible.json"], tmp.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let doc = payload(&tmp.path().join("plan.json"));
    let result = &doc["result"];
    assert_eq!(result["status"], "feasible");
    assert_eq!(doc["manifest"]["seed_source"], "input");
    assert!(tmp.path().join("frontier.csv").exists());
    assert_eq!(
        result["stage_log"].as_array().unwrap().last().unwrap()["stage"],
        9
    );

    let loaded = PlanFile::load(&fixtures().join("plan_feasible.json")).unwrap();
    let mut inputs = loaded.inputs;
    inputs.mcs.as_mut().unwrap().seed = loaded.file.seed.unwrap();
    let lole_max = inputs.targets.lole_max.unwrap();
    let mut best: Option<(f64, f64, f64, usize)> = None;
    for i in 0..inputs.grid.size() {
        let e = evaluate(
            &inputs.grid.candidate(i),
            &inputs.template,
            &inputs.scenarios,
            &inputs.policy,
            inputs.mcs.as_ref(),
            &inputs.cost_model,
            &inputs.protection,
        )
        .unwrap();
        if e.lole_hours_per_year <= lole_max {
            let key = (
                e.lifecycle_cost(),
                e.eens_kwh_per_year,
                e.lole_hours_per_year,
                i,
            );
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    let expected = inputs.grid.candidate(best.unwrap().3);
    let chosen: relgrid::planner::DesignCandidate =
        serde_json::from_value(result["chosen"]["design"].clone()).unwrap();
    assert_eq!(chosen, expected);
}

#[test]
fn plan_infeasible_reports_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = relgrid_out(&["plan", "plan_infeasible.json"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_line(&o)["error"]["kind"], "infeasible");
    let doc = payload(&tmp.path().join("plan.json"));
    assert_eq!(doc["result"]["status"], "infeasible");
    assert!(doc["result"]["chosen"].is_null());
    let diag = &doc["result"]["diagnostic"];
    let min_lole = doc["result"]["evaluations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["eligible"].as_bool().unwrap())
        .map(|r| r["lole_hours_per_year"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(diag["lole_hours_per_year"].as_f64().unwrap(), min_lole);
}

#[test]
fn plan_malformed_json_reports_position() {
    let o = relgrid(&["plan", "malformed.json"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = error_line(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    assert!(msg.starts_with("malformed.json:3:"), "{msg}");
}

#[test]
fn advise_text_and_json() {
    let o = relgrid(&["advise", "--context", "regulatory"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("recommended: SAIFI + SAIDI + LOLE"));
    let o = relgrid(&["advise", "--context", "adequacy", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["result"]["rows"][0]["metrics"], "LOLP, LOLE, LPSP");
    assert!(v["result"]["rows"][0]["guidance"]
        .as_str()
        .unwrap()
        .starts_with("Combine LOLP/LOLE with EENS"));
    let o = relgrid(&["advise", "--context", "weather"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = error_line(&o)["error"]["message"]
        .as_str()
        .unwrap()
        .to_string();
    for ctx in [
        "topology-weak-points",
        "adequacy",
        "customer-service-quality",
        "cost-reliability-tradeoff",
        "regulatory",
    ] {
        assert!(msg.contains(ctx));
    }
}
