use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const RING: &str = r#""model": {"j_x": -1.0, "j_y": -1.0, "j_z": 1.0, "g": 10.0, "beta": 10.0, "tau": 0.01}"#;

fn spincm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spincm")).args(args).output().expect("binary runs")
}

struct Run {
    dir: TempDir,
    out: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().expect("exited normally")
    }

    fn out_dir(&self) -> PathBuf {
        self.dir.path().join("out")
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn json(&self, name: &str) -> serde_json::Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }

    fn wrote_nothing(&self) -> bool {
        !self.out_dir().exists()
    }
}

fn run_with(command: &str, config: &str, extra: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec![command, cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = spincm(&args);
    Run { dir, out }
}

fn run(command: &str, config: &str) -> Run {
    let r = run_with(command, config, &[]);
    assert_eq!(r.code(), 0, "stderr: {}", String::from_utf8_lossy(&r.out.stderr));
    r
}

/// Columns of a CSV file by header name.
fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn sup_dev(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn evolve_cm_writes_one_row_per_step() {
    let r = run("evolve-cm", &format!(r#"{{{RING}, "collision": {{"n_steps": 10}}}}"#));
    let csv = r.read("trajectory.csv");
    assert_eq!(csv.lines().count(), 11);
    assert!(csv.starts_with("n,t,sx1,sx2,sx3,sy1,sy2,sy3,sz1,sz2,sz3,abs_q12,abs_q13,abs_q23,c_l1\n"));
    assert_eq!(column(&csv, "n"), (1..=10).map(f64::from).collect::<Vec<_>>());
    let summary = r.json("summary.json");
    assert!(summary["dominant_frequency"].is_null());
    assert!(summary["spectral_note"].is_string());
}

#[test]
fn point_b_summary_reports_the_dark_frequency() {
    let r = run("evolve-cm", &format!(r#"{{{RING}, "collision": {{"n_steps": 20000}}}}"#));
    let f = r.json("summary.json")["dominant_frequency"].as_f64().unwrap();
    assert!((f - std::f64::consts::FRAC_1_PI).abs() < 0.01, "{f}");
}

#[test]
fn point_a_relaxes_to_zero_transverse_spin() {
    let cfg = r#"{"model": {"j_x": 3.0, "j_y": -1.0, "j_z": 1.0, "g": 10.0, "beta": 2.0, "tau": 0.01}, "collision": {"n_steps": 20000}}"#;
    let summary = run("evolve-cm", cfg).json("summary.json");
    for v in summary["final_sx"].as_array().unwrap() {
        assert!(v.as_f64().unwrap().abs() < 0.02);
    }
}

#[test]
fn thermo_columns_are_added_on_request() {
    let r = run("evolve-cm", &format!(r#"{{{RING}, "collision": {{"n_steps": 50}}, "record": {{"thermo": true}}}}"#));
    let csv = r.read("trajectory.csv");
    let production = column(&csv, "cum_entropy_production");
    assert_eq!(production.len(), 50);
    assert!(production.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    let zero_t = format!(r#"{{{}, "record": {{"thermo": true}}}}"#, RING.replace("10.0, \"tau\"", "\"inf\", \"tau\""));
    assert_eq!(run_with("evolve-cm", &zero_t, &[]).code(), 2);
}

#[test]
fn master_equation_tracks_the_collision_model() {
    let me = run(
        "evolve-me",
        &format!(r#"{{{RING}, "master_equation": {{"generator": "thermal", "t_grid": {{"t_max": 20.0, "dt": 0.01}}}}}}"#),
    );
    let cm = run("evolve-cm", &format!(r#"{{{RING}, "collision": {{"n_steps": 2000}}}}"#));
    let me_sx = column(&me.read("trajectory.csv"), "sx1");
    assert_eq!(me_sx.len(), 2001);
    let cm_sx = column(&cm.read("trajectory.csv"), "sx1");
    assert!(sup_dev(&cm_sx, &me_sx[1..]) <= 0.05);

    let vac = run(
        "evolve-me",
        &format!(r#"{{{RING}, "master_equation": {{"generator": "vacuum", "t_grid": {{"t_max": 20.0, "dt": 0.01}}}}}}"#),
    );
    let vac_sx = column(&vac.read("trajectory.csv"), "sx1");
    assert!(sup_dev(&vac_sx, &me_sx) <= 0.01);
}

#[test]
fn empty_time_grid_is_a_config_error() {
    let r = run_with(
        "evolve-me",
        &format!(r#"{{{RING}, "master_equation": {{"generator": "thermal", "t_grid": []}}}}"#),
        &[],
    );
    assert_eq!(r.code(), 2);
    assert!(r.wrote_nothing());
}

#[test]
fn integrator_underflow_is_a_numeric_failure() {
    let r = run_with(
        "evolve-me",
        &format!(r#"{{{RING}, "master_equation": {{"generator": "thermal", "t_grid": [0, 1], "max_step": 1e-14}}}}"#),
        &[],
    );
    assert_eq!(r.code(), 3);
    assert!(r.wrote_nothing());
    assert!(String::from_utf8_lossy(&r.out.stderr).contains("numerical failure"));
}

#[test]
fn config_errors_exit_with_code_two_and_write_nothing() {
    let bad = [
        format!(r#"{{{RING}, "unexpected": 1}}"#),
        format!(r#"{{{RING}, "collision": {{"mode": {{"kind": "sequential_fixed", "order": [0, 1, 2]}}}}}}"#),
        format!(r#"{{{RING}, "collision": {{"n_steps": 0}}}}"#),
        RING.replace("\"tau\": 0.01", "\"tau\": 0").replace("\"model\"", "{\"model\"") + "}",
        "{not json".to_string(),
    ];
    for cfg in &bad {
        let r = run_with("evolve-cm", cfg, &[]);
        assert_eq!(r.code(), 2, "{cfg}");
        assert!(r.wrote_nothing());
        assert!(!r.out.stderr.is_empty());
    }
    assert_eq!(run_with("spectrum", &format!("{{{RING}}}"), &[]).code(), 2);
    let missing = spincm(&["evolve-cm", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn spectrum_reports_the_oscillating_pair() {
    let vac = RING.replace("10.0, \"tau\"", "\"inf\", \"tau\"");
    let doc = run("spectrum", &format!(r#"{{{vac}, "spectrum": {{"generator": "vacuum"}}}}"#)).json("spectrum.json");
    let eig = doc["eigenvalues"].as_array().unwrap();
    assert_eq!(eig.len(), 64);
    for target in [2.0, -2.0] {
        assert!(eig.iter().any(|e| {
            let (re, im) = (e["re"].as_f64().unwrap(), e["im"].as_f64().unwrap());
            re.abs() <= 1e-9 && (im - target).abs() <= 1e-6 && e["class"] == "oscillatory"
        }));
    }
    assert!(!doc["dynamical_symmetries"].as_array().unwrap().is_empty());
}

#[test]
fn warm_spectrum_has_degenerate_steady_states_and_no_oscillation() {
    let warm = RING.replace("10.0, \"tau\"", "1.0, \"tau\"");
    let doc = run("spectrum", &format!(r#"{{{warm}, "spectrum": {{"generator": "thermal"}}}}"#)).json("spectrum.json");
    assert_eq!(doc["oscillatory_count"], 0);
    assert!(doc["steady_count"].as_u64().unwrap() > 1);
}

#[test]
fn sequential_spectrum_only_decays() {
    let vac = RING.replace("10.0, \"tau\"", "\"inf\", \"tau\"");
    let doc = run(
        "spectrum",
        &format!(r#"{{{vac}, "spectrum": {{"generator": "sequential", "order": [1, 2, 3]}}}}"#),
    )
    .json("spectrum.json");
    assert_eq!(doc["oscillatory_count"], 0);
    let rate = doc["slowest_decay_rate"].as_f64().unwrap();
    assert!((rate - 0.0115).abs() <= 0.3 * 0.0115, "{rate}");
}

#[test]
fn sync_scan_row_favours_isotropic_coupling() {
    let cfg = format!(r#"{{{RING}, "sync_scan": {{"betas": [2, 10], "j_x": [-3, -1, 1, 3], "n_steps": 20000}}}}"#);
    let csv = run("sync-scan", &cfg).read("sync_scan.csv");
    assert!(csv.starts_with("beta,j_x,abs_q12,c_l1\n"));
    let beta = column(&csv, "beta");
    let jx = column(&csv, "j_x");
    let q = column(&csv, "abs_q12");
    assert_eq!(beta, vec![2., 2., 2., 2., 10., 10., 10., 10.]);
    assert_eq!(jx[..4], [-3., -1., 1., 3.]);
    let row10 = &q[4..];
    let best = (0..4).max_by(|&a, &b| row10[a].total_cmp(&row10[b])).unwrap();
    assert_eq!(jx[4 + best], -1.0);
    assert!(q[3] < q[5]);
    assert!(q.iter().all(|v| v.is_finite() && (0.0..=1.0 + 1e-9).contains(v)));
}

const BLP_MODEL: &str = r#""model": {"j_x": -1.0, "j_y": -1.0, "j_z": 1.0, "g": 5.0, "beta": 10.0, "tau": 0.08}, "collision": {"markovian": false}"#;

#[test]
fn blp_scan_vanishes_for_weak_swaps() {
    let cfg = format!(r#"{{{BLP_MODEL}, "blp_scan": {{"theta_over_pi": [0.05, 0.1, 0.15], "k_samples": 40, "n_steps": 500}}}}"#);
    let csv = run("blp-scan", &cfg).read("blp_scan.csv");
    assert!(column(&csv, "n_blp").iter().all(|&v| v == 0.0), "{csv}");
}

#[test]
fn blp_scan_grows_with_the_swap_angle() {
    let cfg = format!(r#"{{{BLP_MODEL}, "blp_scan": {{"theta_over_pi": [0.3, 0.4, 0.5], "k_samples": 40, "n_steps": 500}}}}"#);
    let n = column(&run("blp-scan", &cfg).read("blp_scan.csv"), "n_blp");
    assert!(n.windows(2).all(|w| w[1] > w[0]), "{n:?}");
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const RANDOM_ORDER: &str = r#"{"model": {"j_x": -1.0, "j_y": -1.0, "j_z": 1.0, "g": 10.0, "beta": 10.0, "tau": 0.01}, "collision": {"mode": {"kind": "sequential_random"}, "n_steps": 25}, "seed": 11}"#;
const SMALL_BLP: &str = r#"{"model": {"j_x": -1.0, "j_y": -1.0, "j_z": 1.0, "g": 5.0, "beta": 10.0, "tau": 0.08}, "collision": {"markovian": false}, "blp_scan": {"theta_over_pi": [0.1, 0.4, 0.5], "k_samples": 6, "n_steps": 60}, "seed": 3}"#;

#[test]
fn outputs_match_golden_files_byte_for_byte() {
    assert_eq!(run("evolve-cm", RANDOM_ORDER).read("trajectory.csv"), golden("random_order_trajectory.csv"));
    assert_eq!(run("blp-scan", SMALL_BLP).read("blp_scan.csv"), golden("blp_scan.csv"));
}

#[test]
fn seed_override_is_deterministic() {
    let a = run_with("evolve-cm", RANDOM_ORDER, &["--seed", "99"]);
    let b = run_with("evolve-cm", RANDOM_ORDER, &["--seed", "99"]);
    assert_eq!(a.code(), 0);
    assert_eq!(a.read("trajectory.csv"), b.read("trajectory.csv"));
    assert_ne!(a.read("trajectory.csv"), golden("random_order_trajectory.csv"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let mut count = 0;
    for entry in fs::read_dir(root.join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        spincm_cli::RunConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 8);
    let schema = fs::read_to_string(root.join("../../docs/config.schema.json")).unwrap();
    serde_json::from_str::<serde_json::Value>(&schema).unwrap();
}
