use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wsn_myopic::coordinated::coord_mp;
use wsn_myopic::dp::ValueTable;
use wsn_myopic::sim::RunMetadata;
use wsn_myopic::ModelParams;

fn wsnmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsnmp"))
        .args(args)
        .env_remove("WSNMP_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (head, rows)
}

#[test]
fn policy_row_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = wsnmp(&[
        "policy", "--scheme", "coord-mp", "--lambda", "0.05", "--v", "0.9", "--sa", "20", "--theta", "0.25", "--b",
        "5", "--format", "csv", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = csv_rows(&out);
    assert_eq!(head, ["v", "t_active", "s_meas", "tie_prob", "agg_snr", "objective"]);
    assert_eq!(rows.len(), 1);
    let d = coord_mp(0.9, 0.05, &ModelParams::default(), &[]).unwrap().most_likely();
    assert_eq!(rows[0][1].parse::<usize>().unwrap(), d.t_active);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), d.s_meas);
}

#[test]
fn policy_table_on_stdout() {
    let o = wsnmp(&["policy", "--scheme", "coord-mp", "--lambda", "0.05", "--v", "0.1:1:4"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 5);
}

#[test]
fn lambda_above_threshold_is_rejected() {
    let o = wsnmp(&["policy", "--scheme", "coord-mp", "--lambda", "0.9", "--v", "0.9"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("--lambda") && e.contains("exceeds lambda_th"), "{e}");
}

#[test]
fn bad_flags_exit_two() {
    let o = wsnmp(&["policy", "--scheme", "coord-mp", "--lambda", "0.05", "--v", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--v"));
    let o = wsnmp(&["policy", "--scheme", "coord-mp", "--lambda", "0.05", "--v", "0.5", "--b", "30"]);
    assert_eq!(o.status.code(), Some(2));
    let o = wsnmp(&["policy", "--scheme", "fancy", "--lambda", "0.05", "--v", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let o = wsnmp(&["policy", "--scheme", "scmp", "--lambda", "0.05", "--v", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_channel_dec_uses_closed_form() {
    let o = wsnmp(&["policy", "--scheme", "dec-mp", "--b", "1", "--lambda", "0.05", "--v", "0.9", "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().ends_with("closed-form-b1"));
    let o = wsnmp(&["policy", "--scheme", "dec-mp", "--lambda", "0.05", "--v", "0.9", "--format", "csv"]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("alternating-bisection"));
}

#[test]
fn sweep_is_deterministic_and_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let o = wsnmp(&["sweep", "--scheme", "coord-mp", "--seed", "42", "--lambdas", "0.4:0.001:20"]);
    assert_eq!(o.status.code(), Some(2), "descending range is rejected");
    let run = |name: &str, lambdas: &str| {
        let out = dir.path().join(name);
        let o = wsnmp(&[
            "sweep", "--scheme", "coord-mp", "--seed", "42", "--slots", "100000", "--lambdas", lambdas, "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let a = run("a", "0.001:0.4:20");
    let b = run("b", "0.001:0.4:20");
    let csv_a = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("results.csv")).unwrap());
    let (head, rows) = csv_rows(&a.join("results.csv"));
    assert_eq!(head, ["lambda", "mse", "per_sn_cost", "network_cost", "stderr_mse", "stderr_cost", "seed"]);
    assert_eq!(rows.len(), 20);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(lambdas.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| r[6] == "42"));
    // Listing the multipliers out of order gives the same sorted file.
    let listed: Vec<String> = lambdas.iter().rev().map(|l| format!("{l:?}")).collect();
    let c = run("c", &listed.join(","));
    assert_eq!(csv_a, fs::read(c.join("results.csv")).unwrap());
}

#[test]
fn metadata_reruns_to_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = wsnmp(&[
        "simulate", "--scheme", "dec-mp", "--seed", "9", "--lambda", "0.03", "--slots", "5000", "--ns", "30",
        "--out", first.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let meta: RunMetadata = serde_json::from_str(&fs::read_to_string(first.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta.config.params.num_sns, 30);
    assert_eq!(meta.config.seed, 9);
    let second = dir.path().join("second");
    let o = wsnmp(&[
        "simulate", "--config", first.join("metadata.json").to_str().unwrap(), "--out", second.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(first.join("results.csv")).unwrap(),
        fs::read(second.join("results.csv")).unwrap()
    );
}

#[test]
fn simulate_requires_seed_and_chain() {
    let o = wsnmp(&["simulate", "--scheme", "coord-mp", "--lambda", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
    let o = wsnmp(&["simulate", "--scheme", "sdmp", "--seed", "1", "--lambda", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("chain"));
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    fs::write(&chain, r#"{"states": [0.5, 1.0], "transition": [[0.5, 0.5], [0.5, 0.5]]}"#).unwrap();
    let o = wsnmp(&[
        "simulate", "--scheme", "sdmp", "--seed", "1", "--lambda", "0.05", "--slots", "2000", "--ns", "100",
        "--chain", chain.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("sdmp lambda=0.05"));
}

#[test]
fn config_file_validation_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"scheme": "dec-mp", "seed": 1, "lambda": 0.05, "bogus": 1}"#).unwrap();
    let o = wsnmp(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
    let capped = dir.path().join("capped.json");
    fs::write(
        &capped,
        r#"{"scheme": "dec-mp", "seed": 1, "lambda": 0.05, "slots": 100, "solver": {"max_outer": 1}}"#,
    )
    .unwrap();
    let o = wsnmp(&["simulate", "--config", capped.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("did not converge"));
}

#[test]
fn trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t");
    let o = wsnmp(&[
        "simulate", "--scheme", "coord-mp", "--seed", "3", "--lambda", "0.05", "--slots", "50", "--trajectory",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = csv_rows(&out.join("trajectory.csv"));
    assert_eq!(head[0], "slot");
    assert_eq!(rows.len(), 50);
}

#[test]
fn dp_writes_value_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("vt.json");
    let o = wsnmp(&["dp", "--scheme", "coord", "--lambda", "0.05", "--nv", "200", "--horizon", "100", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t: ValueTable = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.stages(), 100);
    assert_eq!(t.v_nodes.len(), 200);
    let o = wsnmp(&["dp", "--scheme", "dec", "--lambda", "0.05", "--sa", "inf", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn structure_csv() {
    let o = wsnmp(&["structure", "--scheme", "coord-mp", "--lambda", "0.0859"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "v,t_active,zeta,s_meas,agg_snr");
    let rows: Vec<(f64, usize)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 97);
    let first_active = rows.iter().find(|r| r.1 > 0).unwrap().0;
    assert!((first_active - 0.33).abs() < 0.03, "{first_active}");
}

#[test]
fn thread_env_var() {
    let run = |val: &str| {
        Command::new(env!("CARGO_BIN_EXE_wsnmp"))
            .args(["policy", "--scheme", "dec-mp", "--lambda", "0.05", "--v", "0.9"])
            .env("WSNMP_THREADS", val)
            .output()
            .unwrap()
    };
    assert!(run("2").status.success());
    let o = run("zero");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("WSNMP_THREADS"));
}
