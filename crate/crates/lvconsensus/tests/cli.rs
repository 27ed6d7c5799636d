//! Black-box tests of the command-line surface: output formats, exit codes,
//! spec loading, and cross-process reproducibility.

use std::io::Write as _;
use std::process::{Command, Output};

use lvconsensus::simulate::parse_dump;

const BIN: &str = env!("CARGO_BIN_EXE_lvconsensus");

/// Matched both-die chain: rho = a/(a+b) exactly, so expected values in the
/// assertions below are known in closed form.
const MATCHED: &str = "alpha0=0.5,alpha1=0.5,gamma0=1,gamma1=1,mode=sd";
const COMPETITION: &str = "alpha0=0.5,alpha1=0.5,beta=1,delta=1,mode=sd";

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is utf-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is utf-8")
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    assert!(out.status.success(), "--help must exit 0");
    let text = stdout_of(&out);
    for name in [
        "estimate",
        "sweep",
        "threshold",
        "couple-check",
        "nice-chain",
        "exact",
        "ode",
        "simulate",
    ] {
        assert!(text.contains(name), "help must mention `{name}`");
    }
}

#[test]
fn inline_and_file_specs_agree() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("model.spec");
    let mut file = std::fs::File::create(&path).expect("create spec file");
    writeln!(file, "# matched both-die chain").expect("write");
    for line in ["alpha0=0.5", "alpha1=0.5", "gamma0=1", "gamma1=1", "mode=sd"] {
        writeln!(file, "{line}").expect("write");
    }
    drop(file);

    let common = ["--init", "6,4", "--trials", "2000", "--seed", "9"];
    let inline = run(&[&["estimate", "--spec", MATCHED], &common[..]].concat());
    let from_file = run(&[
        &["estimate", "--spec", path.to_str().expect("utf-8 path")],
        &common[..],
    ]
    .concat());
    assert!(inline.status.success(), "inline spec run failed");
    assert!(from_file.status.success(), "file spec run failed");
    assert_eq!(
        inline.stdout, from_file.stdout,
        "the spec file must reproduce the inline run byte for byte"
    );
}

#[test]
fn json_estimate_parses_with_expected_fields() {
    let out = run(&[
        "estimate",
        "--spec",
        MATCHED,
        "--init",
        "6,4",
        "--trials",
        "2000",
        "--seed",
        "9",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(value["n"], 10);
    assert_eq!(value["delta0"], 2);
    let rho = value["estimate"]["rho_hat"].as_f64().expect("rho_hat is a number");
    assert!((0.0..=1.0).contains(&rho), "rho_hat {rho} out of range");
    assert_eq!(
        value["estimate"]["trials"].as_u64(),
        Some(2000),
        "trial count must round-trip"
    );
}

#[test]
fn thread_count_does_not_change_the_bytes() {
    let base = [
        "estimate",
        "--spec",
        COMPETITION,
        "--init",
        "30,20",
        "--trials",
        "4000",
        "--seed",
        "5",
    ];
    let one = run(&[&base[..], &["--threads", "1"]].concat());
    let two = run(&[&base[..], &["--threads", "2"]].concat());
    assert!(one.status.success() && two.status.success());
    assert_eq!(
        one.stdout, two.stdout,
        "estimates must not depend on the worker count"
    );
}

#[test]
fn dump_round_trips_and_ends_in_consensus() {
    let out = run(&[
        "simulate",
        "--spec",
        COMPETITION,
        "--init",
        "9,6",
        "--seed",
        "3",
        "--dump",
    ]);
    assert!(out.status.success());
    let events = parse_dump(&stdout_of(&out)).expect("dump output must parse");
    assert!(!events.is_empty(), "a (9,6) start cannot be at consensus");
    for (i, event) in events.iter().enumerate() {
        assert_eq!(event.step, i as u64 + 1, "steps must be consecutive from 1");
    }
    let last = events.last().expect("nonempty");
    assert!(
        last.after.is_consensus(),
        "final dumped state {:?} must be consensus",
        last.after
    );
}

#[test]
fn exact_reports_closed_form_value_at_a_state() {
    let out = run(&[
        "exact",
        "--spec",
        MATCHED,
        "--xmax",
        "8",
        "--at",
        "2,1",
        "--skip-truncation-check",
    ]);
    assert!(out.status.success());
    let err = stderr_of(&out);
    assert!(
        err.contains("rho(2, 1) = 0.666666666667"),
        "expected the 2/3 closed form in the report, got:\n{err}"
    );
}

#[test]
fn exact_json_includes_the_grid() {
    let out = run(&[
        "exact",
        "--spec",
        MATCHED,
        "--xmax",
        "8",
        "--at",
        "2,1",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(value["xmax"], 8);
    assert_eq!(
        value["rho"].as_array().map(Vec::len),
        Some(9),
        "grid must have xmax + 1 rows"
    );
    let rho21 = value["at"]["rho"].as_f64().expect("rho at the probe");
    assert!(
        (rho21 - 2.0 / 3.0).abs() < 1e-9,
        "rho(2,1) should be 2/3, got {rho21}"
    );
}

#[test]
fn ode_csv_has_the_requested_grid() {
    let out = run(&[
        "ode",
        "--spec",
        COMPETITION,
        "--x0",
        "0.4",
        "--x1",
        "0.2",
        "--dt",
        "0.25",
        "--horizon",
        "1",
    ]);
    assert!(out.status.success());
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.first().copied(), Some("t,x0,x1"));
    assert_eq!(lines.len(), 6, "header plus five grid points");
    assert!(
        lines[1].starts_with("0"),
        "first row must be the initial time, got {}",
        lines[1]
    );
}

#[test]
fn invalid_specs_exit_2() {
    for spec in [
        "alpha0=-1,alpha1=0.5,mode=sd",
        "alpha0=0.5,alpha1=0.5,mode=sideways",
        "alpha0=0.5,alpha1=0.5,flavor=3,mode=sd",
    ] {
        let out = run(&["estimate", "--spec", spec, "--init", "6,4", "--trials", "10"]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "spec `{spec}` should exit 2, stderr:\n{}",
            stderr_of(&out)
        );
    }
}

#[test]
fn missing_spec_file_exits_1() {
    let out = run(&[
        "estimate",
        "--spec",
        "/nonexistent/path/to/model.spec",
        "--init",
        "6,4",
        "--trials",
        "10",
    ]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "an unreadable spec file is an I/O failure, stderr:\n{}",
        stderr_of(&out)
    );
}

#[test]
fn failed_assertion_exits_3_with_a_fail_line() {
    let out = run(&[
        "estimate",
        "--spec",
        MATCHED,
        "--init",
        "6,4",
        "--trials",
        "2000",
        "--seed",
        "9",
        "--assert-rho-min",
        "0.99",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_of(&out);
    assert!(
        err.contains("FAIL rho-min"),
        "expected a FAIL verdict line, got:\n{err}"
    );
}

#[test]
fn passing_assertion_prints_pass_and_exits_0() {
    let out = run(&[
        "estimate",
        "--spec",
        MATCHED,
        "--init",
        "6,4",
        "--trials",
        "2000",
        "--seed",
        "9",
        "--assert-ci-contains",
        "0.6",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let err = stderr_of(&out);
    assert!(
        err.contains("PASS ci-contains"),
        "expected a PASS verdict line, got:\n{err}"
    );
}

#[test]
fn unreachable_threshold_target_exits_3() {
    let out = run(&[
        "threshold",
        "--spec",
        MATCHED,
        "--n",
        "100",
        "--target",
        "0.999",
        "--trials",
        "200",
        "--seed",
        "5",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "an unbracketed target is a failed search, stderr:\n{}",
        stderr_of(&out)
    );
}

#[test]
fn threshold_reports_delta_star() {
    let out = run(&[
        "threshold",
        "--spec",
        MATCHED,
        "--n",
        "64",
        "--target",
        "0.9",
        "--trials",
        "400",
        "--seed",
        "5",
    ]);
    assert!(out.status.success(), "stderr:\n{}", stderr_of(&out));
    assert!(
        stderr_of(&out).contains("delta_star"),
        "summary line must name the threshold"
    );
    let text = stdout_of(&out);
    assert_eq!(
        text.lines().next(),
        Some("delta0,rho_hat,ci_low,ci_high"),
        "probe table header"
    );
    assert!(text.lines().count() > 1, "probe table must have rows");
}

#[test]
fn couple_check_without_a_phase_exits_2() {
    let out = run(&["couple-check", "--spec", COMPETITION]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_with_an_infeasible_cell_exits_2() {
    let out = run(&[
        "sweep",
        "--spec",
        COMPETITION,
        "--n",
        "4",
        "--gap",
        "fixed:6",
        "--trials",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = stdout_of(&out);
    assert_eq!(
        text.lines().count(),
        1,
        "only the header is written when every cell fails:\n{text}"
    );
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("estimate.csv");
    let args = [
        "estimate",
        "--spec",
        MATCHED,
        "--init",
        "6,4",
        "--trials",
        "1000",
        "--seed",
        "9",
    ];
    let to_stdout = run(&args);
    let to_file = run(&[&args[..], &["--out", path.to_str().expect("utf-8 path")]].concat());
    assert!(to_stdout.status.success() && to_file.status.success());
    assert!(
        to_file.stdout.is_empty(),
        "--out must divert the table away from stdout"
    );
    let written = std::fs::read(&path).expect("output file exists");
    assert_eq!(written, to_stdout.stdout, "file and stdout must agree");
}
