use std::process::{Command, Output};

use serde_json::Value;

fn patdens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_patdens")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("patdens-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn count_prints_scalar() {
    let o = patdens(&["count", "--pattern", "10", "--word", "0100101"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "4\n");
    let d = json(&patdens(&["density", "--pattern", "10", "--word", "0100101", "--format", "json"]));
    assert_eq!(d["density"], "0.190476190476");
}

#[test]
fn invalid_arguments_exit_two() {
    for args in [
        &["count", "--pattern", "12", "--word", "01"][..],
        &["frobnicate"],
        &["interval", "--tau", "1010", "--rho1", "1.5"],
        &["limitshape", "--targets", "rho1=0.5,rho110=0.45"],
        &["brbr", "--n", "10", "--ones", "11"],
    ] {
        assert_eq!(patdens(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solver_budget_exhaustion_exits_three() {
    let cfg = tmp("budget.toml");
    std::fs::write(&cfg, "newton_evaluations = 1\n").unwrap();
    let o = patdens(&[
        "--config",
        cfg.to_str().unwrap(),
        "limitshape",
        "--targets",
        "rho1=0.5,rho110=0.3",
        "--grid",
        "200",
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_is_read_and_checked() {
    let cfg = tmp("seed.toml");
    std::fs::write(&cfg, "seed = 3\n").unwrap();
    let args = ["brbr", "--n", "16", "--ones", "8", "--restarts", "2", "--steps", "20000"];
    let from_file = patdens(&[&["--config", cfg.to_str().unwrap()][..], &args].concat());
    let from_flag = patdens(&[&["--seed", "3"][..], &args].concat());
    assert_eq!(json(&from_file), json(&from_flag));
    std::fs::write(&cfg, "sead = 3\n").unwrap();
    assert_eq!(patdens(&["--config", cfg.to_str().unwrap(), "count", "--pattern", "1", "--word", "1"]).status.code(), Some(2));
}

#[test]
fn seeded_output_is_byte_stable_across_thread_counts() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_patdens"))
            .env("PATDENS_THREADS", threads)
            .args(["--seed", "5", "brbr", "--n", "24", "--ones", "12", "--restarts", "4", "--steps", "50000"])
            .output()
            .unwrap()
            .stdout
    };
    let one = run("1");
    assert!(!one.is_empty());
    assert_eq!(one, run("1"));
    assert_eq!(one, run("4"));
}

#[test]
fn cvalue_example() {
    let v = json(&patdens(&["cvalue", "--tau", "1010", "--grid", "1000"]));
    let c: f64 = v["C_numeric"].as_str().unwrap().parse().unwrap();
    assert!((c - 1.624023).abs() < 0.005 * 1.624023);
    assert!(v["argmax_measure"]["cells"][0]["w"].is_string());
    let closed = json(&patdens(&["cvalue", "--tau", "1010", "--closed-form"]));
    assert_eq!(closed["C_closed"], "1.62402339884");
}

#[test]
fn limitshape_writes_curve_and_sidecar() {
    let csv = tmp("f.csv");
    let svg = tmp("f.svg");
    let o = patdens(&[
        "limitshape",
        "--targets",
        "rho1=0.5,rho110=0.3333",
        "--grid",
        "2000",
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,f\n"));
    assert_eq!(text.lines().count(), 2001);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["coeffs"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn heisenberg_example() {
    let v = json(&patdens(&["heisenberg", "--mask", "010", "--word", "0110", "--check-minors"]));
    assert_eq!(v["first_row_equals_counts"], true);
    assert_eq!(v["matrix"][0][0], "1");
    for m in v["min_minor_by_order"].as_array().unwrap() {
        assert!(!m["min"].as_str().unwrap().starts_with('-'));
    }
}

#[test]
fn sample_writes_trace() {
    let csv = tmp("chain.csv");
    let o = patdens(&[
        "--seed", "7", "sample", "--n", "300", "--pattern", "110", "--target", "0.3333", "--pattern", "1", "--target",
        "0.5", "--sweeps", "50", "--burn-in", "10", "--out", csv.to_str().unwrap(),
    ]);
    let v = json(&o);
    assert_eq!(v["drift_mismatches"], 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().next().unwrap().ends_with("dW_to_reference"), "{text}");
}

#[test]
fn relations_and_independence() {
    let v = json(&patdens(&["relations", "--word", "0110100110010110"]));
    assert_eq!(v["all_hold"], true);
    assert!(v["relations"].as_array().unwrap().iter().all(|r| r["pass"] == true));
    let r = json(&patdens(&["independence", "--patterns", "1,10,100,110", "--generic", "8"]));
    assert_eq!(r["rank"], 4);
}

#[test]
fn count_table_and_blocks() {
    let v = json(&patdens(&["count", "--word", "0100101", "--max-len", "2"]));
    assert_eq!(v["counts"]["01"], "8");
    assert_eq!(v["counts"]["10"], "4");
    assert_eq!(stdout(&patdens(&["count", "--pattern", "1010", "--blocks", "13,13,13,13"])), "28561\n");
    assert_eq!(patdens(&["count", "--pattern", "10"]).status.code(), Some(2));
}

#[test]
fn measure_densities_moments_entropy() {
    assert_eq!(stdout(&patdens(&["density", "--pattern", "10", "--measure", "0.3:1,0.7:0"])), "0.42\n");
    let v = json(&patdens(&["density", "--measure", "0.5:1,0.5:0", "--moments", "1", "--entropy"]));
    assert_eq!(v["moments"][1]["moment"], "0.125");
    assert_eq!(v["entropy"], "0");
    let atoms = patdens(&["density", "--pattern", "10", "--measure", "0.5:1,0.5:0|0.5:0.1"]);
    assert_eq!(atoms.status.code(), Some(2));
    assert_eq!(stdout(&patdens(&["wasserstein", "--measure-a", "0.5:1,0.5:0", "--measure-b", "0.5:0,0.5:1"])), "0.25\n");
    let m = json(&patdens(&["wasserstein", "--word-a", "10"]));
    assert_eq!(m["measure"]["cells"][0]["v"], "1");
    let r = json(&patdens(&["wasserstein", "--measure-a", "1:0.5", "--refine", "100,1000", "--pattern", "10"]));
    assert_eq!(r["decreasing"], true);
}

#[test]
fn stationarity_and_extremal() {
    let a = json(&patdens(&["cvalue", "--tau", "1010", "--el-check", "analytic"]));
    assert_eq!(a["stationary"], true);
    let u = json(&patdens(&["cvalue", "--tau", "1010", "--el-check", "uniform"]));
    assert_eq!(u["stationary"], false);
    let e = json(&patdens(&["interval", "--tau", "1010", "--rho1", "0.5", "--extremal"]));
    let r: f64 = e["extremal_rho_1010"].as_str().unwrap().parse().unwrap();
    assert!((r - 0.75 / std::f64::consts::E.powi(2)).abs() < 1e-4);
}

#[test]
fn forward_map_and_deck_tools() {
    let v = json(&patdens(&["limitshape", "--coeffs=-3.10795,0,12.42"]));
    let r110: f64 = v["densities"]["rho_110"].as_str().unwrap().parse().unwrap();
    assert!((r110 - 1.0 / 3.0).abs() < 1e-3);
    assert!(v["det"].as_str().unwrap().starts_with('-'));
    let nd = "1".repeat(13) + &"0".repeat(13) + &"1".repeat(13) + &"0".repeat(13);
    let d = json(&patdens(&["brbr", "--n", "52", "--ones", "26", "--initial", &nd, "--evaluate"]));
    assert_eq!(d["exact_count"], "28561");
    let h = json(&patdens(&["heisenberg", "--mask", "010", "--word", "0110", "--upper-right", "3"]));
    assert_eq!(h["upper_right_minor"]["value"], "2");
    assert_eq!(patdens(&["sample", "--n", "100", "--pattern", "1", "--target", "1"]).status.code(), Some(2));
}
