use std::path::Path;
use std::process::{Command as Process, Output};

use serde_json::Value;
use surf_cli::{parse_args, Command, Format, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_OK};

fn surf(args: &[&str]) -> Output {
    Process::new(env!("CARGO_BIN_EXE_surf")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn parses_simulate_invocation() {
    let plan = parse_args(["simulate", "--dist", "geom:0.5", "--n", "1000", "--seed", "42"]).unwrap();
    assert_eq!(plan.command, Command::Simulate);
    assert_eq!(plan.spec.as_deref(), Some("geom:0.5"));
    assert_eq!(plan.n, Some(1000));
    assert_eq!(plan.seed, 42);
    assert_eq!(plan.format, Format::Json);
    assert!(plan.out.is_none());
}

#[test]
fn parses_exact_csv_invocation() {
    let plan = parse_args(["exact", "--dist", "zipf:0.5", "--n", "1e5", "--format", "csv", "--out", "r.csv"]).unwrap();
    assert_eq!(plan.command, Command::Exact);
    assert_eq!(plan.n, Some(100_000));
    assert_eq!(plan.format, Format::Csv);
    assert_eq!(plan.out.as_deref(), Some(Path::new("r.csv")));
}

#[test]
fn rejects_bad_invocations() {
    let cases: &[&[&str]] = &[
        &["simulate", "--dist", "geom:1.5", "--n", "10"],
        &["simulate", "--dist", "geom:0.5"],
        &["simulate", "--dist", "geom:0.5", "--n", "0"],
        &["simulate", "--dist", "geom:0.5", "--n", "10", "--bogus"],
        &["exact", "--dist", "zipf:0.5", "--n", "10", "--format", "csv"],
        &["oracle", "--dist", "geom:0.5", "--n", "3", "--format", "csv", "--out", "x"],
        &["verify", "--dist", "geom:0.5"],
        &["verify", "--dist", "geom:0.5", "--n", "10", "--sizes", "10,20"],
        &["simulate", "--dist", "geom:0.5", "--n", "10", "--threads", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        let err = parse_args(args.iter().copied()).unwrap_err();
        assert_eq!(err.exit_code, EXIT_ERROR, "{args:?}");
    }
    assert_eq!(parse_args(["--help"]).unwrap_err().exit_code, EXIT_OK);
    assert_eq!(parse_args(["--version"]).unwrap_err().exit_code, EXIT_OK);
}

#[test]
fn binary_exit_codes() {
    let out = surf(&["simulate", "--dist", "geom:0.5"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--n"));
    let out = surf(&["simulate", "--dist", "geom:1.5", "--n", "10"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert_eq!(surf(&["--help"]).status.code(), Some(EXIT_OK));
    let out = surf(&["oracle", "--dist", "geom:0.5", "--n", "3"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR), "infinite support is a runtime error");
}

#[test]
fn simulate_json_is_deterministic() {
    let args = ["simulate", "--dist", "geom:0.5", "--n", "1000", "--seed", "42"];
    let a = surf(&args);
    let b = surf(&args);
    assert_eq!(a.status.code(), Some(EXIT_OK));
    assert_eq!(a.stdout, b.stdout);
    let v = json_of(&a);
    assert_eq!(v["provenance"]["seed"], 42);
    assert_eq!(v["provenance"]["n"], 1000);
    assert_eq!(v["provenance"]["spec"], "geom:0.5");
    let stats = &v["stats"];
    for key in ["M", "O", "H", "H0", "S0", "L0", "N", "N1", "largest_tree", "max_degree", "profile_of_zero"] {
        assert!(!stats[key].is_null(), "missing {key}");
    }
    assert!(stats["M"].as_u64().unwrap() <= stats["O"].as_u64().unwrap());
    let hist: u64 = stats["tree_size_histogram"].as_object().unwrap().values().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(hist, stats["M"].as_u64().unwrap());
    let other = surf(&["simulate", "--dist", "geom:0.5", "--n", "1000", "--seed", "43"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn simulate_replications_and_csv_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv");
    let out = surf(&[
        "simulate",
        "--dist",
        "zipf:0.5",
        "--n",
        "500",
        "--reps",
        "5",
        "--format",
        "csv",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("seed,M,O,H"));
    let meta = read_json(&dir.path().join("sim.csv.meta.json"));
    assert_eq!(meta["provenance"]["spec"], "zipf:0.5");
    assert_eq!(meta["provenance"]["seed"], 42);

    let json = json_of(&surf(&["simulate", "--dist", "zipf:0.5", "--n", "500", "--reps", "5"]));
    let reps = json["realizations"].as_array().unwrap();
    assert_eq!(reps.len(), 5);
    let first_row: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first_row[0], reps[0]["seed"].to_string());
    assert_eq!(first_row[1], reps[0]["stats"]["M"].to_string());
}

#[test]
fn trace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("run.trc");
    let direct =
        surf(&["simulate", "--dist", "logheavy", "--n", "2000", "--seed", "7", "--trace-out", trace.to_str().unwrap()]);
    assert_eq!(direct.status.code(), Some(EXIT_OK));
    let replay = surf(&["simulate", "--trace-in", trace.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&replay.stderr));
    assert_eq!(direct.stdout, replay.stdout);

    std::fs::write(&trace, b"not a trace").unwrap();
    assert_eq!(surf(&["simulate", "--trace-in", trace.to_str().unwrap()]).status.code(), Some(EXIT_ERROR));
}

#[test]
fn exact_json_and_csv() {
    let v = json_of(&surf(&["exact", "--dist", "geom:0.5", "--n", "100"]));
    let r = v["series"]["r"].as_array().unwrap();
    assert_eq!(r.len(), 101);
    for x in &r[1..] {
        assert!((x.as_f64().unwrap() - 0.5).abs() <= 1e-12);
    }
    assert_eq!(v["summary"]["survival_probability"], 0.5);
    assert!((v["summary"]["EO"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let out = surf(&["exact", "--dist", "zipf:0.5", "--n", "50", "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 52);
    let meta = read_json(&dir.path().join("r.csv.meta.json"));
    assert!(meta["summary"]["EM"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn oracle_agrees_with_exact() {
    let spec = "table:0.5,0.25,0.125,0.125";
    let oracle = json_of(&surf(&["oracle", "--dist", spec, "--n", "6"]));
    let exact = json_of(&surf(&["exact", "--dist", spec, "--n", "6"]));
    let result = &oracle["result"];
    assert_eq!(result["arithmetic"], "rational");
    for (key, series) in [("r", "r"), ("rhat", "Rhat")] {
        for t in 0..=6 {
            let a = result[key][t]["value"].as_f64().unwrap();
            let b = exact["series"][series][t].as_f64().unwrap();
            assert!((a - b).abs() <= 1e-12, "{key}_{t}: {a} vs {b}");
        }
    }
    let em = result["em"]["value"].as_f64().unwrap();
    assert!((em - exact["summary"]["EM"]["value"].as_f64().unwrap()).abs() <= 1e-12);

    let small = json_of(&surf(&["oracle", "--dist", "table:1/3,1/3,1/3", "--n", "2"]));
    assert_eq!(small["result"]["em"]["exact"], "13/9");
    let over = surf(&["oracle", "--dist", "table:1/3,1/3,1/3", "--n", "6", "--budget", "100"]);
    assert_eq!(over.status.code(), Some(EXIT_ERROR));
}

#[test]
fn verify_passes_on_geometric() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("verify.json");
    let out =
        surf(&["verify", "--dist", "geom:0.5", "--sizes", "1e3,1e4", "--reps", "200", "--out", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stdout));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("o-mean") && table.contains("PASS"));
    let v = read_json(&json);
    assert_eq!(v["report"]["seed"], 42);
    assert!(v["report"]["checks"].as_array().unwrap().iter().all(|c| c["verdict"] != "fail"));
}

#[test]
fn experiment_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "# small experiment\ndist = geom:0.5\nsizes = 100, 1000\nreps = 300\nseed = 5\nstats = M, O, H, profile:2\nchecks = o-mean\n",
    )
    .unwrap();
    let path = cfg.to_str().unwrap();
    let out = surf(&["experiment", "--config", path]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["report"]["seed"], 5);
    assert_eq!(v["report"]["statistics"].as_array().unwrap().len(), 8);
    assert_eq!(v["report"]["checks"][0]["name"], "o-mean");

    let overridden = json_of(&surf(&["experiment", "--config", path, "--seed", "6", "--reps", "50"]));
    assert_eq!(overridden["report"]["seed"], 6);
    assert_eq!(overridden["report"]["reps"], 50);
    let threaded = surf(&["experiment", "--config", path, "--threads", "3"]);
    assert_eq!(threaded.stdout, out.stdout);

    std::fs::write(&cfg, "dist = geom:0.5\ndist = zipf:0.5\n").unwrap();
    assert_eq!(surf(&["experiment", "--config", path]).status.code(), Some(EXIT_ERROR));
}

#[test]
fn failing_check_sets_exit_code() {
    // a distribution whose renewal limit is far from the tolerance at a tiny horizon
    let out = surf(&["verify", "--dist", "zipf:0.5", "--n", "3", "--reps", "20"]);
    let code = out.status.code().unwrap();
    assert!(code == EXIT_OK || code == EXIT_CHECK_FAILED, "{code}");
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code == EXIT_CHECK_FAILED, table.contains("FAIL"));
}
