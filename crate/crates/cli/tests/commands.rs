use std::process::Command;

fn dualcr(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dualcr"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).expect("utf-8 output"),
    )
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).expect("valid json")
}

#[test]
fn decomposable_function_on_two_sphere_exits_zero() {
    let (code, out) = dualcr(&[
        "test-decomp",
        "--surface",
        "sphere:n=2",
        "--u",
        "z1^2+3*w2",
        "--points",
        "20",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["summary"]["classification"], "decomposable-consistent");
    assert_eq!(v["points"].as_array().unwrap().len(), 20);
    assert!(v["points"][0]["lambda"].is_array());
}

#[test]
fn product_on_three_sphere_is_rejected() {
    let (code, out) = dualcr(&[
        "test-decomp",
        "--surface",
        "sphere:n=3",
        "--u",
        "z1*w1",
        "--points",
        "20",
    ]);
    assert_eq!(code, 2);
    assert_eq!(json(&out)["summary"]["classification"], "rejected");
}

#[test]
fn ellipsoid_structure_checks_pass() {
    let (code, out) = dualcr(&[
        "check-structure",
        "--surface",
        "ellipsoid:2,1",
        "--points",
        "10",
    ]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["summary"]["passed"], true);
    assert!(v["summary"]["max_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = [
        "test-decomp",
        "--surface",
        "ellipsoid:3,1,0.5",
        "--u",
        "z1^3+w2*w3",
        "--points",
        "8",
        "--seed",
        "7",
    ];
    let (a_code, a) = dualcr(&args);
    let (b_code, b) = dualcr(&args);
    assert_eq!(a_code, b_code);
    assert_eq!(a, b);
}

#[test]
fn report_written_to_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let (code, out) = dualcr(&[
        "dual-map",
        "--surface",
        "sphere:n=2",
        "--points",
        "3",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn incidence_and_sphere_commands() {
    let (code, _) = dualcr(&[
        "incidence-check",
        "--surface",
        "ellipsoid:2,1",
        "--points",
        "5",
    ]);
    assert_eq!(code, 0);
    let (code, _) = dualcr(&[
        "sphere-plh",
        "--n",
        "3",
        "--u",
        "z1+conj(z2)^2",
        "--points",
        "5",
    ]);
    assert_eq!(code, 0);
    let (code, _) = dualcr(&[
        "sphere-plh",
        "--n",
        "2",
        "--u",
        "z1*conj(z2)",
        "--points",
        "5",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(
        dualcr(&["test-decomp", "--surface", "bogus", "--u", "z1"]).0,
        1
    );
    assert_eq!(dualcr(&["test-decomp", "--surface", "sphere:n=2"]).0, 1);
    assert_eq!(
        dualcr(&[
            "test-decomp",
            "--surface",
            "sphere:n=2",
            "--u",
            "z1",
            "--order",
            "3"
        ])
        .0,
        1
    );
    assert_eq!(dualcr(&["incidence-check", "--surface", "sphere:n=3"]).0, 1);
    assert_eq!(dualcr(&["test-decomp", "--points", "many"]).0, 1);
    assert_eq!(dualcr(&["no-such-command"]).0, 1);
    assert_eq!(dualcr(&["--help"]).0, 0);
}
