use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_transit-design"));
    c.env_remove("TRANSIT_DESIGN_OUT");
    c
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("td-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn city(dir: &Path) -> &'static str {
    ok(&["gen", "--rows", "3", "--cols", "4", "--seed", "1", "-o", "city.json"], dir);
    "city.json"
}

const SMALL: [&str; 6] = ["--routes", "2", "--max-len", "4", "--horizon", "3600"];

#[test]
fn gen_grid_counts_and_determinism() {
    let dir = scratch("gen");
    let a = ok(&["gen", "--rows", "3", "--cols", "3", "--seed", "4"], &dir);
    let b = ok(&["gen", "--rows", "3", "--cols", "3", "--seed", "4"], &dir);
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 9);
    assert_eq!(v["edges"].as_array().unwrap().len(), 12);

    let empty = ok(&["gen", "--rows", "3", "--cols", "3", "--demand-pairs", "0"], &dir);
    let v: Value = serde_json::from_str(&empty).unwrap();
    assert!(v["demand"].as_array().unwrap().is_empty());
    fs::write(dir.join("empty.json"), empty).unwrap();
    let info: Value = serde_json::from_str(&ok(&["inspect", "empty.json"], &dir)).unwrap();
    assert_eq!(info["kind"], "network");
    assert_eq!(info["nodes"], 9);
}

#[test]
fn design_is_reproducible_and_round_trips() {
    let dir = scratch("design");
    let net = city(&dir);
    let mut args = vec!["design", "--method", "random", "--network", net, "--seeds", "3"];
    args.extend(SMALL);
    ok(&[&args[..], &["--out", "a"]].concat(), &dir);
    ok(&[&args[..], &["--out", "b"]].concat(), &dir);
    for f in ["design_3.json", "evaluation_3.json", "summary.json", "config.json"] {
        assert_eq!(
            fs::read(dir.join("a").join(f)).unwrap(),
            fs::read(dir.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let config = read_json(dir.join("a/config.json"));
    assert_eq!(config["env"]["routes"], 2);
    assert_eq!(config["seeds"], json!([3]));

    let mut eval = vec!["evaluate", "--design", "a/design_3.json", "--network", net, "--seeds", "3", "--out", "e"];
    eval.extend(SMALL);
    ok(&eval, &dir);
    let report = read_json(dir.join("e/evaluation.json"));
    let design_reward = read_json(dir.join("a/evaluation_3.json"))["reward"].clone();
    assert_eq!(report["methods"][0]["runs"][0]["reward"], design_reward);

    let info: Value = serde_json::from_str(&ok(&["inspect", "a/design_3.json", "--network", net], &dir)).unwrap();
    assert_eq!(info["valid"], true);
}

#[test]
fn real_routes_are_echoed_verbatim() {
    let dir = scratch("real");
    ok(&["gen", "--rows", "4", "--cols", "4", "-o", "grid.json"], &dir);
    let mut net = read_json(dir.join("grid.json"));
    let routes: Vec<Value> = net["edges"]
        .as_array()
        .unwrap()
        .iter()
        .take(16)
        .map(|e| json!([e["u"], e["v"]]))
        .collect();
    net["real_routes"] = json!(routes);
    fs::write(dir.join("real.json"), net.to_string()).unwrap();
    ok(
        &["design", "--method", "real-routes", "--network", "real.json", "--horizon", "3600", "--out", "r"],
        &dir,
    );
    let d = read_json(dir.join("r/design_0.json"));
    assert_eq!(d["routes"], json!(routes));
    assert_eq!(d["method"], "real-routes");
}

#[test]
fn failures_are_machine_readable() {
    let dir = scratch("errors");
    let net = city(&dir);
    let out = run(&["design", "--method", "alphatransit", "--network", net, "--out", "x"], &dir);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("--checkpoint"));
    assert!(!dir.join("x").exists());

    let out = run(&["design", "--method", "random", "--network", net, "--set", "env.routes=0"], &dir);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("routes"));

    let out = run(&["nonsense"], &dir);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");

    let out = run(&["design", "--method", "real-routes", "--network", net], &dir);
    assert!(!out.status.success());
}

#[test]
fn compare_schema_and_isolation() {
    let dir = scratch("compare");
    let net = city(&dir);
    let mut args = vec!["compare", "--methods", "random,random,ga,real-routes", "--network", net, "--seeds", "2"];
    args.extend(SMALL);
    args.extend(["--set", "ga.generations=2", "--set", "ga.population=8", "--set", "ga.elitism=1"]);
    let out = run(&args, &dir.clone());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("runs/compare/comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "method,service_rate_mean,service_rate_std,wait_mean,wait_std,transfer_mean,transfer_std,\
journey_mean,journey_std,route_eff_mean,route_eff_std,fleet_mean,fleet_std,utilization_mean,utilization_std"
    );
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], lines[2]);
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 15);
        assert!(cells[2].is_empty() && cells[14].is_empty(), "std must be empty with one seed");
    }
    let report = read_json(dir.join("runs/compare/comparison.json"));
    assert_eq!(report["failures"][0]["method"], "real-routes");

    // Two seeds fill the deviation columns.
    let mut two = vec!["compare", "--methods", "random", "--network", net, "--seeds", "0,1", "--out", "two"];
    two.extend(SMALL);
    ok(&two, &dir);
    let csv = fs::read_to_string(dir.join("two/comparison.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(!row[12].is_empty());
}

#[test]
fn output_root_variable_is_honored() {
    let dir = scratch("outroot");
    let net = city(&dir);
    let out = bin()
        .args(["design", "--method", "demand-cover", "--network", net])
        .args(SMALL)
        .env("TRANSIT_DESIGN_OUT", dir.join("root"))
        .current_dir(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.join("root/design/design_0.json").exists());
}

#[test]
fn train_budget_zero_resume_and_design() {
    let dir = scratch("train");
    let net = city(&dir);
    fs::write(
        dir.join("small.json"),
        r#"{"train": {"net": {"hidden": 8, "widths": [8, 6], "heads": [2, 2], "actor": [8], "critic": [8]},
            "train_steps_per_iter": 4, "batch_size": 16, "checkpoint_every": 1},
           "search": {"iterations": 8}}"#,
    )
    .unwrap();
    let mut base = vec!["train", "--network", net, "--config", "small.json", "--workers", "2"];
    base.extend(SMALL);

    ok(&[&base[..], &["--steps", "0", "--out", "zero"]].concat(), &dir);
    assert!(dir.join("zero/checkpoint_000000.json").exists());
    assert_eq!(fs::read_to_string(dir.join("zero/log.jsonl")).unwrap(), "");

    ok(&[&base[..], &["--steps", "30", "--out", "t"]].concat(), &dir);
    ok(&[&base[..], &["--steps", "60", "--out", "t", "--resume", "t/latest.json"]].concat(), &dir);
    let steps: Vec<u64> = fs::read_to_string(dir.join("t/log.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["env_steps"].as_u64().unwrap())
        .collect();
    assert!(steps.len() >= 2);
    assert!(steps.windows(2).all(|w| w[1] > w[0]), "{steps:?}");
    assert!(*steps.last().unwrap() >= 60);

    let mut design = vec!["design", "--method", "alphatransit", "--checkpoint", "t/latest.json", "--network", net];
    design.extend(["--config", "small.json", "--out", "d"]);
    design.extend(SMALL);
    ok(&design, &dir);
    let info: Value = serde_json::from_str(&ok(&["inspect", "d/trace_0.json"], &dir)).unwrap();
    assert_eq!(info["kind"], "search-trace");
    let info: Value = serde_json::from_str(&ok(&["inspect", "t/latest.json"], &dir)).unwrap();
    assert_eq!(info["kind"], "checkpoint");
}

#[test]
fn space_estimate_matches_reference_counts() {
    let dir = scratch("space");
    let v: Value = serde_json::from_str(&ok(&["space", "--nodes", "143", "--edges", "243"], &dir)).unwrap();
    let per_route = v["per_route"].as_f64().unwrap();
    assert!((per_route / 1.24e5 - 1.0).abs() < 0.02);
    assert!((v["total_log10"].as_f64().unwrap() - 81.5).abs() < 0.05);
    let v: Value = serde_json::from_str(&ok(&["space", "--nodes", "2", "--edges", "1"], &dir)).unwrap();
    assert_eq!(v["degenerate"], true);
    assert!(v["total_log10"].is_null());
}
