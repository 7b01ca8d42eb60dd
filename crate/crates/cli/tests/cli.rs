//! End-to-end binary behavior: exit codes, error naming, CSV shape and
//! determinism, config handling.

use std::path::PathBuf;
use std::process::{Command, Output};

fn kfunc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfunc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("kfunc-cli-{}-{name}", std::process::id()))
}

/// Parses a CSV body into rows of f64 columns, skipping the header.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|line| {
            line.split(',')
                .map(|cell| cell.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

#[test]
fn help_exits_zero() {
    let out = kfunc(&["--help"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("usage: kfunc"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = kfunc(&["--seed", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing subcommand"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = kfunc(&["deriv", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--frobnicate"));
}

#[test]
fn zero_k_exits_two_and_names_the_precondition() {
    let out = kfunc(&["deriv", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nonzero"), "{}", stderr(&out));
}

#[test]
fn verify_passes_and_emits_stable_csv() {
    let a = tmp("verify-a.csv");
    let b = tmp("verify-b.csv");
    for path in [&a, &b] {
        let out = kfunc(&[
            "verify",
            "--grid-n",
            "32",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stdout(&out).contains("all 26 identities passed"));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b, "verify CSV not byte-stable");
}

#[test]
fn injected_failure_exits_one_and_is_visible() {
    let out = kfunc(&["verify", "--grid-n", "32", "--inject-failure"]);
    assert_eq!(out.status.code(), Some(1));
    let table = stdout(&out);
    assert!(table.contains("broken-constraint-fixture"));
    assert!(table.contains("FAIL"));
}

#[test]
fn deriv_matches_the_affine_closed_form() {
    let out = kfunc(&["deriv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_eq!(body.lines().next(), Some("x,rho,grad,k_deriv"));
    for row in rows(&body) {
        let (x, kd) = (row[0], row[3]);
        assert!((kd - (2.0 * x - 7.0 / 6.0)).abs() < 1e-4, "node {x}");
    }
}

#[test]
fn deriv_point_weight_zeroes_the_pinned_node() {
    let out = kfunc(&["deriv", "--grid-n", "16", "--weight", "point:0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_eq!(rows(&body)[0][3], 0.0);
}

#[test]
fn deriv_split_appends_the_split_columns() {
    let out = kfunc(&["deriv", "--split"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    assert_eq!(body.lines().next(), Some("x,rho,grad,k_deriv,n_part,shape_part"));
    for row in rows(&body) {
        assert!((row[5] - 13.0 / 6.0).abs() < 1e-4, "shape part {}", row[5]);
        // The split reassembles the gradient exactly.
        assert!((row[4] + row[5] - row[2]).abs() < 1e-12);
    }
}

#[test]
fn constraint_functional_derivative_vanishes() {
    let out = kfunc(&["deriv", "--functional", "k-sin", "--grid-n", "64"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for row in rows(&stdout(&out)) {
        assert!(row[3].abs() <= 1e-10, "k-functional leak {}", row[3]);
    }
}

#[test]
fn gateaux_csv_has_the_summary_rows() {
    let out = kfunc(&["gateaux", "--grid-n", "64"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    for kind in [
        "estimate",
        "extrapolated",
        "inner-product",
        "residual",
        "last-diff",
        "path-ratio",
        "converged",
    ] {
        assert!(body.lines().any(|l| l.starts_with(kind)), "missing {kind}");
    }
}

#[test]
fn gateaux_flags_a_nonconverged_schedule() {
    let out = kfunc(&[
        "gateaux",
        "--functional",
        "quartic",
        "--eps",
        "0.5,0.25",
        "--rel-tol",
        "1e-12",
        "--grid-n",
        "32",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let body = stdout(&out);
    let converged = body
        .lines()
        .find(|l| l.starts_with("converged"))
        .expect("converged row");
    assert!(converged.ends_with("0.0000000000000000e0"), "{converged}");
    assert!(stderr(&out).contains("not converged"));
}

#[test]
fn flow_trace_is_byte_stable_and_plots() {
    let a = tmp("flow-a.csv");
    let b = tmp("flow-b.csv");
    let plot = tmp("flow.svg");
    for path in [&a, &b] {
        let out = kfunc(&[
            "flow",
            "--grid-n",
            "32",
            "--out",
            path.to_str().unwrap(),
            "--plot",
            plot.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(stderr(&out).contains("status converged"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("polyline"));
}

#[test]
fn config_file_loads_and_flags_win() {
    let path = tmp("scenario.conf");
    std::fs::write(
        &path,
        "seed = 4\n[grid]\nn = 32\n[constraint]\nk = 2\n[field]\nprofile = constant:2\n",
    )
    .unwrap();
    let out = kfunc(&["deriv", "--config", path.to_str().unwrap(), "--grid-n", "16"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(rows(&stdout(&out)).len(), 16, "flag should override config n");
}

#[test]
fn bad_config_names_the_offender() {
    let path = tmp("bad.conf");
    std::fs::write(&path, "[grid]\nnodes = 7\n").unwrap();
    let out = kfunc(&["deriv", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key `nodes`"), "{}", stderr(&out));
}

#[test]
fn off_set_field_is_a_config_error_unless_extended() {
    let args = ["deriv", "--field", "constant:3", "--grid-n", "16"];
    let out = kfunc(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("off the constraint set"), "{}", stderr(&out));

    let out = kfunc(&["deriv", "--field", "constant:3", "--grid-n", "16", "--extend"]);
    assert!(out.status.success(), "{}", stderr(&out));
    // constant:3 retracts to the uniform unit-mass field, a stationary
    // point of the square functional.
    for row in rows(&stdout(&out)) {
        assert!(row[3].abs() < 1e-12);
    }
}
