//! End-to-end runs of the `nlft-lab` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nlft_lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlft-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NLFT_LAB_THREADS")
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn check<'a>(summary: &'a Value, report: &str, name: &str) -> &'a Value {
    summary["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["report"] == report && c["name"] == name)
        .unwrap_or_else(|| panic!("no check {report}.{name}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_free_case_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlft_lab(&["verify", "--preset", "free", "--t", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(s["pass"], true);
    for c in s["checks"].as_array().unwrap() {
        assert!(
            c.get("name").is_some()
                && c.get("value").is_some()
                && c.get("tolerance").is_some()
                && c.get("pass").is_some()
        );
        if c["name"].as_str().unwrap().ends_with("_residual") && !c["tolerance"].is_null() {
            assert!(c["value"].as_f64().unwrap() < 1e-12, "{c}");
        }
    }
}

#[test]
fn parseval_constant_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlft_lab(&["parseval", "--potential", "constant:q=1,T=1"], dir.path());
    let residual = check(&summary(dir.path()), "parseval", "residual")["value"].as_f64().unwrap();
    println!("parseval residual {residual:e}");
    assert!(residual < 1e-6, "residual {residual:e}");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn parseval_constant_matches_half_pi_form() {
    let dir = tempfile::tempdir().unwrap();
    nlft_lab(&["parseval", "--potential", "constant:q=1,T=1"], dir.path());
    let s = summary(dir.path());
    assert!(check(&s, "parseval", "residual_pi_over_2")["value"].as_f64().unwrap() < 1e-8);
}

#[test]
fn zeros_constant_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = nlft_lab(&["zeros", "--potential", "constant:q=1", "--t", "1", "--rect", "-4,4,-3,-0.01"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(dir.path());
    assert_eq!(check(&s, "zeros", "count_minus_oracle")["value"], 0.0);
    assert_eq!(check(&s, "zeros", "winding_count")["value"], 2.0);
    let csv = fs::read_to_string(dir.path().join("zeros.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn every_command_writes_a_summary() {
    for args in [
        &["nlft", "--potential", "constant:q=1,T=1"][..],
        &["kernels", "--potential", "constant:q=1,T=1", "--grid", "20:40:2"],
        &["converge", "--preset", "powerdecay", "--grid", "10:40:4"],
        &["freecase"],
    ] {
        let dir = tempfile::tempdir().unwrap();
        let o = nlft_lab(args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&o.stdout));
        assert_eq!(summary(dir.path())["command"], args[0]);
    }
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    fs::write(&cfg, "[tolerances]\n\"free_case.max_theta_error\" = 1e-30\n").unwrap();
    let o = nlft_lab(&["freecase", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(check(&summary(&dir.path().join("out")), "free_case", "max_theta_error")["pass"], false);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &str, &str); 5] = [
        ("verify", "[params]\nnope = 1\n", "params.nope"),
        ("verify", "[tolerances]\n\"identities.max_det_residual\" = -1\n", "tolerances.identities.max_det_residual"),
        (
            "verify",
            "potential = \"constant:q=1\"\n[tolerances]\n\"identities.bogus\" = 1e-3\n",
            "tolerances.identities.bogus",
        ),
        ("zeros", "[potential]\nkind = \"constant\"\nq = \"one\"\n", "potential.q"),
        ("nlft", "potential = \"constant:q=1\"\n[grids]\ns = \"1:0\"\n", "grids.s"),
    ];
    for (cmd, text, path) in cases {
        let file = dir.path().join("bad.toml");
        fs::write(&file, text).unwrap();
        let o = nlft_lab(&[cmd, "--config", file.to_str().unwrap()], &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(path), "{path} not in {}", stderr(&o));
    }
    let o = nlft_lab(&["zeros", "--potential", "constant:q=1", "--rect", "1,2,3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--rect"));
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn thread_count_from_environment_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_nlft-lab"))
            .args(["verify", "--preset", "oscillating", "--t", "3", "--seed", "5", "--out"])
            .arg(&out)
            .env("NLFT_LAB_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        read_dir_sorted(&out)
    };
    assert_eq!(run("1"), run("3"));
    let o = Command::new(env!("CARGO_BIN_EXE_nlft-lab"))
        .args(["freecase", "--out"])
        .arg(&out)
        .env("NLFT_LAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--threads"));
}

#[test]
fn seed_changes_random_samples_only() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    nlft_lab(&["verify", "--preset", "free", "--t", "1", "--seed", "1"], &a);
    nlft_lab(&["verify", "--preset", "free", "--t", "1", "--seed", "2"], &b);
    assert_ne!(fs::read(a.join("identities.csv")).unwrap(), fs::read(b.join("identities.csv")).unwrap());
}

#[test]
fn csv_uses_seventeen_digits_and_lf() {
    let dir = tempfile::tempdir().unwrap();
    nlft_lab(&["nlft", "--potential", "constant:q=1,T=1", "--grid", "0:1:3"], dir.path());
    let text = fs::read_to_string(dir.path().join("nlft.csv")).unwrap();
    assert!(!text.contains('\r'));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let mantissa = row[1].split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17);
    let re_a: f64 = row[1].parse().unwrap();
    assert!((re_a - 1f64.cosh()).abs() < 1e-15);
}
