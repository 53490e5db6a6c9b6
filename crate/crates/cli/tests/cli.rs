use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_rydsim");

const SWEEP: &str = r#"
[lattice]
nx = 4
ny = 4

[interaction]
rb_over_a = 1.15

[schedule]
type = "linear_sweep"
delta_start_mhz = -5.0
delta_end_mhz = 5.0
rate_mhz_per_us = 10.0
omega_mhz = 2.0
end_ramp_us = 0.2

[shots]
n = 10000
seed = 7

[analysis]
fit_r_max = 2.9
"#;

const PHASE: &str = r#"
[lattice]
nx = 4
ny = 4

[phase_diagram]
omega_mhz = 1.0
rb_over_a = { lo = 1.0, hi = 1.9, n = 4 }
delta_over_omega = { lo = -1.0, hi = 4.0, n = 6 }
"#;

const KZ_SYNTHETIC: &str = r#"
[kz]
mode = "synthetic"
rates_mhz_per_us = [5.0, 10.0, 20.0, 40.0, 80.0]
delta_over_omega = { lo = -1.0, hi = 3.0, n = 41 }
omega_mhz = 1.0
delta_c_over_omega = 1.1
nu = 0.629
"#;

const KZ_SIMULATE: &str = r#"
[lattice]
nx = 4
ny = 4

[interaction]
rb_over_a = 1.15

[analysis]
fit_r_max = 2.9

[kz]
mode = "simulate"
rates_mhz_per_us = [10.0, 20.0, 40.0]
delta_over_omega = { lo = -0.5, hi = 2.5, n = 31 }
omega_mhz = 2.0
"#;

const QUENCH: &str = r#"
[lattice]
nx = 4
ny = 4

[interaction]
rb_over_a = 1.5

[schedule]
type = "linear_sweep"
delta_start_mhz = -5.0
delta_end_mhz = 5.0
rate_mhz_per_us = 10.0
omega_mhz = 2.0
end_ramp_us = 0.2

[quench]
omega_mhz = 1.0
t_us = 0.15
delta_mhz = [-10.0, -5.0, 0.0, 5.0, 10.0]
phi_scan = [0.0, 0.785, 1.571, 2.356, 3.142, 3.927, 4.712, 5.498]
fits = [{ d = 0, delta_mhz = 0.0 }, { d = 1, delta_mhz = 5.0 }]
"#;

const REARRANGE: &str = r#"
[rearrange]
rows = 30
cols = 34
target_rows = 15
target_cols = 15
load_probability = 0.5
instances = 1000
two_rounds = true
export_plans = 2
"#;

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
}

fn run(dir: &Path, name: &str, command: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, config).unwrap();
    let out = dir.join(name);
    let result = Command::new(BIN)
        .arg(command)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: result.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&result.stderr).into_owned(),
        out,
    }
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV output (provenance and header lines skipped).
fn csv_rows(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn assert_rerun_identical(command: &str, config: &str) {
    let tmp = tempfile::tempdir().unwrap();
    let a = run(tmp.path(), "a", command, config, &["--seed", "11"]);
    assert_eq!(a.code, 0, "{command}: {}", a.stderr);
    let b = run(tmp.path(), "b", command, config, &["--seed", "11", "--workers", "3"]);
    assert_eq!(b.code, 0, "{command}: {}", b.stderr);
    let (fa, fb) = (files(&a.out), files(&b.out));
    assert!(!fa.is_empty());
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{command}: {name} differs between reruns");
        let text = String::from_utf8_lossy(bytes);
        assert!(text.contains("config_sha256"), "{name} lacks the config hash");
        assert!(text.contains(env!("CARGO_PKG_VERSION")), "{name} lacks the version");
    }
}

#[test]
fn every_command_is_deterministic() {
    for (command, config) in [
        ("sweep", SWEEP),
        ("phase-diagram", PHASE),
        ("kz", KZ_SYNTHETIC),
        ("kz", KZ_SIMULATE),
        ("quench", QUENCH),
        ("rearrange", REARRANGE),
    ] {
        assert_rerun_identical(command, config);
    }
}

#[test]
fn sweep_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), "s", "sweep", SWEEP, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let p = json(r.out.join("perfect_order.json"));
    let prob = p["probability"].as_f64().unwrap();
    assert!(prob > 0.0 && prob < 1.0);
    assert_eq!(p["n_shots"], 10000);
    let xi = json(r.out.join("xi.json"));
    assert!(xi["fits"]["radial"]["xi"].as_f64().unwrap() > 0.0);
    assert_eq!(csv_rows(r.out.join("shots.csv")).len(), 10000);
    // another seed gives other shots
    let other = run(tmp.path(), "t", "sweep", SWEEP, &["--seed", "8"]);
    assert_ne!(
        fs::read(r.out.join("shots.csv")).unwrap(),
        fs::read(other.out.join("shots.csv")).unwrap()
    );
}

#[test]
fn zero_drive_sweep_stays_in_ground_state() {
    let config = r#"
[lattice]
nx = 3
ny = 3

[interaction]
c6_mhz_um6 = 100.0

[schedule]
type = "linear_sweep"
delta_start_mhz = -5.0
delta_end_mhz = -1.0
rate_mhz_per_us = 10.0
omega_mhz = 0.0

[shots]
n = 500
seed = 3

[noise]
enabled = false
"#;
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), "z", "sweep", config, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = csv_rows(r.out.join("shots.csv"));
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().all(|row| row.iter().all(|v| v == "0")));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cap = SWEEP.replace("nx = 4\nny = 4", "nx = 12\nny = 12") + "\n[basis]\nconstraint = \"full\"\n";
    let r = run(tmp.path(), "cap", "sweep", &cap, &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("2^N"), "{}", r.stderr);

    let unknown = SWEEP.replace("nx = 4", "nx = 4\nbogus = 1");
    let r = run(tmp.path(), "unknown", "sweep", &unknown, &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("bogus") && r.stderr.contains("line"), "{}", r.stderr);

    let empty = PHASE.replace("n = 4", "n = 0");
    assert_eq!(run(tmp.path(), "empty", "phase-diagram", &empty, &[]).code, 2);
    assert_eq!(run(tmp.path(), "missing", "quench", SWEEP, &[]).code, 2);

    let no_file = Command::new(BIN)
        .args(["sweep", "--config", "/nonexistent.toml", "--out"])
        .arg(tmp.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(no_file.status.code(), Some(2));
}

#[test]
fn phase_diagram_checkerboard_lobe() {
    let tmp = tempfile::tempdir().unwrap();
    let config = PHASE.replace("n = 4", "n = 10").replace("n = 6", "n = 11");
    let r = run(tmp.path(), "pd", "phase-diagram", &config, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows: Vec<Vec<f64>> = csv_rows(r.out.join("phase_diagram.csv"))
        .iter()
        .map(|row| row[..6].iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 110);
    // near R_b/a = 1.15 and Δ/Ω > 1 checkerboard order dominates
    for row in rows.iter().filter(|r| (r[0] - 1.1).abs() < 1e-9 || (r[0] - 1.2).abs() < 1e-9) {
        if row[1] > 1.0 {
            assert!(row[2] > row[3] && row[2] > row[4], "{row:?}");
        }
    }
    let best = rows.iter().max_by(|a, b| a[2].total_cmp(&b[2])).unwrap();
    assert!(best[0] <= 1.2 + 1e-9 && best[1] > 1.0, "{best:?}");
}

#[test]
fn phase_diagram_classical_star() {
    // Ω → 0⁺ at R_b/a = 1.7, Δ/Ω = 3.2, past the classical star threshold
    let config = r#"
[lattice]
nx = 4
ny = 4

[phase_diagram]
omega_mhz = 0.01
rb_over_a = { lo = 1.7, hi = 1.7, n = 1 }
delta_over_omega = { lo = 3.2, hi = 3.2, n = 1 }
"#;
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), "star", "phase-diagram", config, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let row: Vec<f64> = csv_rows(r.out.join("phase_diagram.csv"))[0][..5]
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(row[4] > row[2] && row[4] > row[3], "{row:?}");
}

#[test]
fn kz_synthetic_recovers_planted_nu() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), "kz", "kz", KZ_SYNTHETIC, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let fit = json(r.out.join("kz_fit.json"));
    assert!((fit["nu"].as_f64().unwrap() - 0.629).abs() < 0.02, "{fit}");
    assert_eq!(fit["at_boundary"], false);
}

#[test]
fn quench_without_time_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), "q", "quench", &QUENCH.replace("t_us = 0.15", "t_us = 0.0"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rows = csv_rows(r.out.join("quench_delta.csv"));
    for d in 0..=4 {
        let ps: Vec<&String> = rows.iter().filter(|row| row[2] == d.to_string()).map(|row| &row[3]).collect();
        assert_eq!(ps.len(), 5);
        assert!(ps.iter().all(|p| *p == ps[0]), "d = {d}: {ps:?}");
    }
    let fits = json(r.out.join("bloch_fits.json"));
    assert_eq!(fits["fits"].as_array().unwrap().len(), 2);
}

#[test]
fn rearrange_two_round_filling() {
    let tmp = tempfile::tempdir().unwrap();
    let r = run(tmp.path(), "r", "rearrange", REARRANGE, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let s = json(r.out.join("rearrange_summary.json"));
    assert!(s["mean_filling"].as_f64().unwrap() > 0.99, "{s}");
    assert_eq!(csv_rows(r.out.join("rearrange_instances.csv")).len(), 1000);
    let events = csv_rows(r.out.join("plan_0000_events.csv"));
    assert!(!events.is_empty());
    assert!(events.iter().all(|e| e.len() == 6));
}
