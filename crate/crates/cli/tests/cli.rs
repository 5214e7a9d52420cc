//! End-to-end exercises of the command-line contract: exit codes, file
//! outputs and determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hjgraph"))
}

struct Fixture {
    dir: PathBuf,
}

impl Fixture {
    fn new(name: &str) -> Fixture {
        let dir = std::env::temp_dir().join(format!("hjgraph_cli_{}_{name}", std::process::id()));
        std::fs::remove_dir_all(&dir).ok();
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("segment.json"),
            r#"{ "vertices": ["a", "b"], "edges": [{ "u": "a", "v": "b", "len": 1.0 }] }"#,
        )
        .unwrap();
        Fixture { dir }
    }

    fn write_config(&self, name: &str, body: &str) -> PathBuf {
        let p = self.dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

impl Drop for Fixture {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.dir).ok();
    }
}

const EIKONAL_CONFIG: &str = r#"{
    "graph": "segment.json",
    "hamiltonian": { "form": "eikonal", "f": 0.0 },
    "u0": "x",
    "grid": { "h": 0.05, "dt": 0.05, "T": 1.0 },
    "route": "auto"
}"#;

const POWER_CONFIG: &str = r#"{
    "graph": "segment.json",
    "hamiltonian": { "form": "power", "alpha": 2.0, "a": 1.0, "f": 0.0 },
    "u0": "abs(x - 0.5)",
    "grid": { "h": 0.05, "dt": 0.05, "T": 1.0 },
    "route": "auto"
}"#;

fn exit_of(out: &std::process::Output) -> i32 {
    out.status.code().expect("process exited")
}

#[test]
fn audit_power_passes() {
    let fx = Fixture::new("audit_power");
    let cfg = fx.write_config("problem.json", POWER_CONFIG);
    let report = fx.path("audit.json");
    let out = bin()
        .args(["audit", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let body = std::fs::read_to_string(&report).unwrap();
    assert!(body.contains("\"route\": \"general\""));
    assert!(body.contains("h1_coercive"));
    assert!(body.contains("\"L0\""));
    assert!(body.contains("\"L1\""));
    assert!(body.contains("\"R\""));
}

#[test]
fn audit_route_mismatch_exits_2() {
    let fx = Fixture::new("audit_mismatch");
    let cfg = fx.write_config(
        "problem.json",
        &EIKONAL_CONFIG.replace("\"auto\"", "\"general\""),
    );
    let out = bin().args(["audit", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(exit_of(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("coercivity"), "stderr: {stderr}");
}

#[test]
fn malformed_config_exits_64() {
    let fx = Fixture::new("malformed");
    let cfg = fx.write_config("problem.json", "{ not json ");
    let out = bin().args(["audit", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(exit_of(&out), 64);
}

#[test]
fn unknown_subcommand_exits_64() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(exit_of(&out), 64);
}

fn solve_into(cfg: &Path, out_dir: &Path) {
    let out = bin()
        .args(["solve", "--config"])
        .arg(cfg)
        .arg("--out")
        .arg(out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_writes_slices_and_reruns_identically() {
    let fx = Fixture::new("solve_determinism");
    let cfg = fx.write_config("problem.json", EIKONAL_CONFIG);
    let out1 = fx.path("run1");
    let out2 = fx.path("run2");
    solve_into(&cfg, &out1);
    solve_into(&cfg, &out2);

    let mut names: Vec<String> = std::fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    // 20 slices plus the manifest.
    assert_eq!(names.len(), 21);
    assert!(names.contains(&"manifest.json".to_string()));
    for name in &names {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn check_all_kinds_pass_on_solver_output() {
    let fx = Fixture::new("check_pass");
    let cfg = fx.write_config("problem.json", EIKONAL_CONFIG);
    let field = fx.path("field");
    solve_into(&cfg, &field);
    let out = bin()
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--field")
        .arg(&field)
        .args(["--kinds", "all", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for kind in ["bounds", "initial", "lipschitz", "monge", "curve", "comparison", "equivalence", "dpp"] {
        assert!(field.join(format!("verdict_{kind}.json")).exists(), "missing {kind}");
    }
    let residuals = std::fs::read_to_string(field.join("residual_report.json")).unwrap();
    for key in ["\"route\"", "\"k\"", "\"points\"", "\"aggregate\"", "\"median_abs\"", "\"plateau_ok\""] {
        assert!(residuals.contains(key), "residual report lacks {key}");
    }
}

#[test]
fn check_general_route_field() {
    let fx = Fixture::new("check_general");
    let cfg = fx.write_config("problem.json", POWER_CONFIG);
    let field = fx.path("field");
    solve_into(&cfg, &field);
    let out = bin()
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--field")
        .arg(&field)
        .args(["--kinds", "bounds,monge,dpp,curve"])
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn corrupted_field_fails_with_exit_1() {
    let fx = Fixture::new("check_corrupt");
    let cfg = fx.write_config("problem.json", EIKONAL_CONFIG);
    let field = fx.path("field");
    solve_into(&cfg, &field);
    // Replace one slice with garbage values, keeping the format intact.
    let victim = field.join("slice_00010.csv");
    let body = std::fs::read_to_string(&victim).unwrap();
    let mangled: String = body
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                line.to_string()
            } else {
                let parts: Vec<&str> = line.split(',').collect();
                let boosted = format!("{}", parts[3].parse::<f64>().unwrap() + 5.0);
                format!("{},{},{},{}", parts[0], parts[1], parts[2], boosted)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&victim, mangled + "\n").unwrap();
    let out = bin()
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--field")
        .arg(&field)
        .args(["--kinds", "dpp,monge"])
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 1);
}

#[test]
fn mismatched_problem_exits_65() {
    let fx = Fixture::new("check_mismatch");
    let cfg = fx.write_config("problem.json", EIKONAL_CONFIG);
    let field = fx.path("field");
    solve_into(&cfg, &field);
    let other = fx.write_config("other.json", &EIKONAL_CONFIG.replace("\"x\"", "\"x*0.5\""));
    let out = bin()
        .args(["check", "--config"])
        .arg(&other)
        .arg("--field")
        .arg(&field)
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 65, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_kind_exits_64() {
    let fx = Fixture::new("check_badkind");
    let cfg = fx.write_config("problem.json", EIKONAL_CONFIG);
    let field = fx.path("field");
    solve_into(&cfg, &field);
    let out = bin()
        .args(["check", "--config"])
        .arg(&cfg)
        .arg("--field")
        .arg(&field)
        .args(["--kinds", "bounds,wibble"])
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 64);
}

#[test]
fn converge_prints_rate() {
    let fx = Fixture::new("converge");
    let cfg = fx.write_config("problem.json", POWER_CONFIG);
    let table = fx.path("table.csv");
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--grids", "0.04:0.04,0.02:0.02"])
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("observed rate"), "stdout: {stdout}");
    let body = std::fs::read_to_string(&table).unwrap();
    assert!(body.starts_with("h,dt,max_error"));
    assert_eq!(body.lines().count(), 3);
}

#[test]
fn converge_single_grid_reports_na() {
    let fx = Fixture::new("converge_single");
    let cfg = fx.write_config("problem.json", POWER_CONFIG);
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--grids", "0.05:0.05"])
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("n/a"), "stdout: {stdout}");
    assert_eq!(stdout.lines().filter(|l| l.contains(',')).count(), 2);
}

#[test]
fn converge_without_oracle_exits_3() {
    let fx = Fixture::new("converge_no_oracle");
    // Time-dependent forcing has no direct-formula oracle.
    let cfg = fx.write_config(
        "problem.json",
        &EIKONAL_CONFIG.replace("\"f\": 0.0", "\"f\": \"0.5 + t\""),
    );
    let out = bin()
        .args(["converge", "--config"])
        .arg(&cfg)
        .args(["--grids", "0.05:0.05"])
        .output()
        .unwrap();
    assert_eq!(exit_of(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no oracle"), "stderr: {stderr}");
}
