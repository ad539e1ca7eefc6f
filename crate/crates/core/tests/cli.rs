use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn ner(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ner")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(sub: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ner(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p
}

const SB: &str = r#"
[nucleus]
spin = "7/2"
q_moment_m2 = -4.9e-29
gamma_rad_s_T = 3.4890527e7

[field]
b0_T = 0.001
e_amp_V_m = 6.366055251057454e-4
omega_rad_s = "auto"

[efg]
mode = "given"
a_per_m = 8e19
c_V_m2 = -1e20
"#;

#[test]
fn gate_pi_pulse_duration() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("gate", &config("sb_pi_pulse.toml"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let schedule = json(&dir.path().join("schedule.json"));
    let d = schedule["segments"][0]["duration"].as_f64().unwrap();
    assert!((d * 1e6 - 730.78).abs() < 0.005, "{d}");
    assert_eq!(schedule["target"], "ROTATION");
    let report = json(&dir.path().join("report.json"));
    assert!(report["analytic"]["fidelity"].as_f64().unwrap() > 1.0 - 1e-12);
    assert!(report["full_dimensional"]["fidelity"].as_f64().unwrap() > 1.0 - 1e-4);
}

#[test]
fn perf_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("perf", &config("perf.toml"), dir.path(), &[]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("perf.txt")).unwrap();
    for v in ["11.57", "4.85", "12589.28"] {
        assert!(text.contains(v), "{text}");
    }
    let rows = json(&dir.path().join("perf.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["n_flips_rounded"].as_f64().unwrap(), 12589.28);
}

#[test]
fn simulate_without_field_is_static_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let text = SB.replace("e_amp_V_m = 6.366055251057454e-4", "e_amp_V_m = 0.0")
        + "\n[simulate]\nt_final_s = 1e-3\nsamples = 11\nframe = \"lab\"\n";
    let cfg = write_config(dir.path(), &text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run("simulate", &cfg, &a, &["--format", "csv"]).status.success());
    assert!(run("simulate", &cfg, &b, &["--format", "csv"]).status.success());
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("trajectory.csv")).unwrap());
    assert!(!a.join("trajectory.json").exists());
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("t_s,p_m7/2,p_m5/2,"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert!((r[1] - 1.0).abs() < 1e-12);
        assert!(r[2..9].iter().all(|p| p.abs() < 1e-12));
    }
    assert_eq!(json(&a.join("summary.json")), json(&b.join("summary.json")));
}

#[test]
fn simulate_off_resonance_has_nan_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let text = SB.replace("omega_rad_s = \"auto\"", "omega_rad_s = 3.0e6")
        + "\n[simulate]\nt_final_s = 1e-4\nsamples = 3\nframe = \"rotating\"\n";
    let cfg = write_config(dir.path(), &text);
    assert!(run("simulate", &cfg, dir.path(), &[]).status.success());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    assert_eq!(last.split(',').nth(9).unwrap(), "NaN");
    let traj = json(&dir.path().join("trajectory.json"));
    assert!(traj["rows"][1]["fidelity"].is_null());
}

#[test]
fn sweep_rows_in_grid_order_with_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = SB.to_string()
        + "\n[pulse]\nangle_rad = 1.0\n\n[sweep]\ne_amp_V_m = [1e-3, -1.0, 2e-3]\nb0_T = [0.001, 0.002]\n";
    let cfg = write_config(dir.path(), &text);
    let out = run("sweep", &cfg, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&dir.path().join("sweep.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r["index"].as_u64().unwrap(), i as u64);
        let bad = r["e_amp_V_m"].as_f64().unwrap() < 0.0;
        assert_eq!(r["status"] != "ok", bad, "{r}");
    }
    assert_eq!(rows[1]["b0_T"].as_f64().unwrap(), 0.002);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn efg_hydrogenic_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("efg", &config("efg_hydrogen_stark.toml"), dir.path(), &[]);
    assert!(out.status.success());
    let v = json(&dir.path().join("efg.json"));
    let bp = &v["metadata"]["b_prime_convergence"];
    assert_eq!(bp["n_prime_max"], 200);
    assert!(bp["converged"].as_bool().unwrap());
    assert!(v["coefficients"]["b_prime"].as_f64().unwrap() > 0.0);
    let rough = v["metadata"]["a_rough_per_m"].as_f64().unwrap();
    assert!((7.4e19..8.4e19).contains(&rough));
    assert_eq!(v["static_tensor"]["traceless_symmetric"], true);
}

#[test]
fn two_qubit_gates() {
    for (name, cfg) in [("CZ", "cz.toml"), ("CNOT", "cnot.toml")] {
        let dir = tempfile::tempdir().unwrap();
        let out = run("gate", &config(cfg), dir.path(), &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let r = json(&dir.path().join("report.json"));
        assert_eq!(r["target"], name);
        assert!(1.0 - r["ideal"]["fidelity"].as_f64().unwrap() < 1e-8);
        assert!(1.0 - r["simulated_subspace"]["fidelity"].as_f64().unwrap() < 1e-8);
        if name == "CZ" {
            assert!(1.0 - r["simulated_full"]["fidelity"].as_f64().unwrap() < 1e-9);
        } else {
            assert!(r["factorization_check"]["max_entry_deviation"].as_f64().unwrap() < 1e-9);
        }
    }
}

fn error_of(out: &Output) -> Value {
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    err["error"].clone()
}

#[test]
fn error_envelopes_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let cfg = write_config(dir.path(), &(SB.to_string() + "\nbogus = 1\n"));
    let out = run("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_of(&out)["class"], "config");

    let half = SB.replace("\"7/2\"", "\"1/2\"").replace("q_moment_m2 = -4.9e-29", "q_moment_m2 = 0.0")
        + "\n[pulse]\nangle_rad = 3.14\n";
    let cfg = write_config(dir.path(), &half);
    let out = run("gate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let e = error_of(&out);
    assert_eq!(e["class"], "physics");
    assert!(e["code"].is_string() && e["message"].is_string());

    let both = SB.to_string() + "\n[pulse]\nangle_rad = 1.0\nduration_s = 1e-3\n";
    let cfg = write_config(dir.path(), &both);
    assert_eq!(run("gate", &cfg, dir.path(), &[]).status.code(), Some(2));

    let stiff = SB.to_string() + "\n[integrator]\ntol = 1e-30\n\n[simulate]\nt_final_s = 1e-3\nsamples = 2\n";
    let cfg = write_config(dir.path(), &stiff);
    let out = run("simulate", &cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_of(&out)["code"], "integrator_stiffness");

    let missing = dir.path().join("nope.toml");
    assert_eq!(run("perf", &missing, dir.path(), &[]).status.code(), Some(2));
}

#[test]
fn seedless_flag_takes_no_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("perf.toml");
    assert!(run("perf", &cfg, dir.path(), &["--seedless"]).status.success());
    assert!(!run("perf", &cfg, dir.path(), &["--seedless=1"]).status.success());
    assert!(!run("perf", &cfg, dir.path(), &["--format", "xml"]).status.success());
}
