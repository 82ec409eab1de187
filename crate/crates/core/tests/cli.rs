mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture_path, FIXTURE_POLICY, FIXTURE_V};
use serde_json::Value;

fn ezdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ezdp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn constant_model_json(rho: f64, gamma: f64) -> String {
    format!(
        r#"{{"name": "constant", "n_states": 1, "n_actions": 1, "feasible": [[0]],
            "utility": [[2.5]], "transition": [[[1.0]]],
            "beta": 0.9, "rho": {rho}, "gamma": {gamma}}}"#
    )
}

#[test]
fn solve_constant_model_reports_utility() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", &constant_model_json(0.5, 0.75));
    let out = dir.path().join("r.json");
    let res = ezdp(&[
        "solve",
        &model,
        "--tol",
        "1e-13",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let r = read_json(&out);
    assert!((r["result"]["v_star"]["values"][0].as_f64().unwrap() - 2.5).abs() < 1e-10);
    assert!(r["result"]["bellman_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(r["provenance"]["model_name"], "constant");
    assert_eq!(r["provenance"]["tolerance"].as_f64(), Some(1e-13));
}

#[test]
fn solve_fixture_matches_oracle_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("trace.csv");
    let res = ezdp(&[
        "solve",
        fixture_path("two_state.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--trace-csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let r = read_json(&out);
    for s in 0..2 {
        let v = r["result"]["v_star"]["values"][s].as_f64().unwrap();
        assert!((v - FIXTURE_V[s]).abs() < 1e-8);
        assert_eq!(
            r["result"]["policy"][s].as_u64().unwrap() as usize,
            FIXTURE_POLICY[s]
        );
    }
    let trace = std::fs::read_to_string(&csv).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,step_norm,apriori,aposteriori"));
    let n = r["result"]["iterations"].as_u64().unwrap() as usize;
    assert_eq!(lines.count(), n);
}

#[test]
fn report_is_deterministic_apart_from_clock() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture_path("two_state.json");
    let mut reports = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}.json"));
        assert_eq!(
            ezdp(&[
                "solve",
                model.to_str().unwrap(),
                "--out",
                out.to_str().unwrap()
            ])
            .status
            .code(),
            Some(0)
        );
        let mut r = read_json(&out);
        let p = r["provenance"].as_object_mut().unwrap();
        p.remove("started_at");
        p.remove("elapsed_seconds");
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn numbers_round_trip_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    ezdp(&[
        "solve",
        fixture_path("two_state.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let m = common::load_fixture();
    let sol = ezdp::solve(&m, &ezdp::SolveOptions::default()).unwrap();
    let r = read_json(&out);
    for s in 0..2 {
        assert_eq!(
            r["result"]["w_star"]["values"][s]
                .as_f64()
                .unwrap()
                .to_bits(),
            sol.w_star.values[s].to_bits()
        );
    }
}

#[test]
fn mixed_regime_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", &constant_model_json(0.5, 2.0));
    let res = ezdp(&["solve", &model]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("unsupported parameter regime"));
    assert_eq!(ezdp(&["classify", &model]).status.code(), Some(3));
    assert_eq!(
        ezdp(&["eval", &model, "--random", "3", "--seed", "1"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn validation_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = constant_model_json(0.5, 0.75).replace("[[[1.0]]]", "[[[0.9]]]");
    let model = write(dir.path(), "m.json", &bad);
    assert_eq!(ezdp(&["solve", &model]).status.code(), Some(2));
    let unknown = constant_model_json(0.5, 0.75).replace("\"name\"", "\"colour\": 1, \"name\"");
    let model = write(dir.path(), "u.json", &unknown);
    assert_eq!(ezdp(&["solve", &model]).status.code(), Some(2));
    assert_eq!(
        ezdp(&["solve", "/nonexistent/model.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn iteration_cap_exits_with_code_4() {
    let res = ezdp(&[
        "solve",
        fixture_path("two_state.json").to_str().unwrap(),
        "--max-iter",
        "3",
    ]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn classify_prints_case_and_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = ezdp(&["classify", fixture_path("two_state.json").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("Case1, θ=0.5,"), "{text}");
    assert!(text.contains("δ=0.9486832980505"));

    let model = write(dir.path(), "c3.json", &constant_model_json(1.25, 1.5));
    let text = String::from_utf8(ezdp(&["classify", &model]).stdout).unwrap();
    assert!(
        text.starts_with("Case3, θ=2,") && text.contains("δ=0.9"),
        "{text}"
    );

    let model = write(dir.path(), "t1.json", &constant_model_json(0.75, 0.75));
    let text = String::from_utf8(ezdp(&["classify", &model]).stdout).unwrap();
    assert!(
        text.starts_with("ThetaOne routed to Case2 machinery"),
        "{text}"
    );
}

#[test]
fn bounds_examples_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b1.json");
    assert_eq!(
        ezdp(&["bounds", "--example", "1", "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let r = read_json(&out)["result"].clone();
    assert!((r["param_star"].as_f64().unwrap() - 4.10707).abs() < 1e-3);
    assert!((r["product"].as_f64().unwrap() - 424.197).abs() < 0.5);
    assert!((r["banach_l"].as_f64().unwrap() - 19.4868).abs() < 1e-3);
    assert_eq!(r["winner"], "Banach");

    let out = dir.path().join("b2.json");
    assert_eq!(
        ezdp(&["bounds", "--example", "2", "--out", out.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    let r = read_json(&out)["result"].clone();
    assert!((r["param_star"].as_f64().unwrap() - 0.378544).abs() < 1e-4);
    assert!((r["rate_only"]["param"].as_f64().unwrap() - 0.47904076).abs() < 1e-6);
    assert!((r["banach_l"].as_f64().unwrap() - 50.0).abs() < 1e-9);

    assert_ne!(ezdp(&["bounds", "--example", "3"]).status.code(), Some(0));
}

#[test]
fn bounds_without_boundary_condition_exits_with_code_5() {
    // Du's theorem needs a convex or concave operator; Case 2 is neither
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", &constant_model_json(0.75, 0.5));
    let res = ezdp(&["bounds", &model]);
    assert_eq!(
        res.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn eval_stationary_optimal_plan_reaches_v_star() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", &format!("[{:?}]", FIXTURE_POLICY));
    let out = dir.path().join("e.json");
    let res = ezdp(&[
        "eval",
        fixture_path("two_state.json").to_str().unwrap(),
        "--policy-file",
        &plan,
        "--horizon",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let r = read_json(&out)["result"].clone();
    assert_eq!(r["horizon_values"].as_array().unwrap().len(), 5);
    assert_eq!(r["monotone_direction"], "Increasing");
    for s in 0..2 {
        assert!((r["limit_value"]["values"][s].as_f64().unwrap() - FIXTURE_V[s]).abs() < 1e-9);
    }
}

#[test]
fn eval_random_audit_passes_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let res = ezdp(&[
        "eval",
        fixture_path("two_state.json").to_str().unwrap(),
        "--random",
        "100",
        "--seed",
        "42",
        "--tol",
        "1e-12",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let r = read_json(&out)["result"].clone();
    assert_eq!(r["plans_checked"], 101);
    assert!(r["worst_margin"].as_f64().unwrap() >= -1e-9);
}

#[test]
fn eval_rejects_infeasible_plan() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write(dir.path(), "plan.json", "[[0, 7]]");
    let res = ezdp(&[
        "eval",
        fixture_path("two_state.json").to_str().unwrap(),
        "--policy-file",
        &plan,
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn library_entry_point_returns_exit_codes() {
    assert_eq!(
        ezdp::cli::run([
            "ezdp",
            "classify",
            fixture_path("two_state.json").to_str().unwrap()
        ]),
        0
    );
    assert_eq!(ezdp::cli::run(["ezdp", "solve"]), 2);
}
