use std::path::Path;
use std::process::{Command, Output};

fn wstate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wstate"))
        .args(args)
        .env_remove("WSTATE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn help_lists_subcommands_and_schema() {
    let text = stdout(&wstate(&["--help"]));
    for sub in ["simulate", "sample", "reconstruct", "bounds", "power-scan", "pipeline"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert!(text.contains("schema_version = 1"));
    assert!(text.contains("WSTATE_SEED"));
}

#[test]
fn simulate_prints_w_populations() {
    let text = stdout(&wstate(&["simulate"]));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    let total: f64 = rows.iter().map(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(rows.iter().any(|r| r.starts_with("R,R,B,3.33")));
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"schema_version": 1, "seed": 11, "shots": 5000, "noise": {"car_target": 30}}"#,
    );
    let a = stdout(&wstate(&["pipeline", "-c", &cfg]));
    let b = stdout(&wstate(&["pipeline", "-c", &cfg]));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["provenance"]["mode"], "sampled");
    assert_eq!(v["provenance"]["seed"], 11);
    assert!(v["fidelity"]["sigma"].as_f64().unwrap() > 0.0);
}

#[test]
fn pipeline_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let plots = dir.path().join("plots");
    let report = dir.path().join("report.json");
    let o = wstate(&["pipeline", "-o", report.to_str().unwrap(), "--plot-dir", plots.to_str().unwrap()]);
    stdout(&o);
    assert!(report.exists());
    for f in ["populations.dat", "power_scan.dat", "fringe.dat"] {
        let text = std::fs::read_to_string(plots.join(f)).unwrap();
        assert!(text.starts_with('#'), "{f} lacks a header");
    }
}

#[test]
fn sample_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    stdout(&wstate(&["sample", "--seed", "5", "--shots", "20000", "-o", counts.to_str().unwrap()]));
    let csv = std::fs::read_to_string(&counts).unwrap();
    assert!(csv.starts_with("block,phase_r,phase_b,outcome,counts,shots,seed"));
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&wstate(&["reconstruct", "--counts", counts.to_str().unwrap()]))).unwrap();
    let f = v["fidelity"]["value"].as_f64().unwrap();
    assert!(f > 0.95, "fidelity {f}");
    assert_eq!(v["provenance"]["seed"], 5);
}

#[test]
fn env_seed_is_the_fallback() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_wstate"));
        c.args(["sample", "--shots", "100"]).args(extra).env_remove("WSTATE_SEED");
        if let Some(e) = env {
            c.env("WSTATE_SEED", e);
        }
        stdout(&c.output().unwrap())
    };
    assert_eq!(run(Some("9"), &[]), run(None, &["--seed", "9"]));
    assert_ne!(run(Some("9"), &[]), run(None, &[]));
    assert_eq!(run(Some("9"), &["--seed", "2"]), run(None, &["--seed", "2"]));
}

#[test]
fn bounds_text_and_json() {
    let text = stdout(&wstate(&["bounds"]));
    assert!(text.contains("112.569 um"));
    assert!(text.contains("2.4080 um"));
    let v: serde_json::Value = serde_json::from_str(&stdout(&wstate(&["bounds", "--format", "json"]))).unwrap();
    assert!((v["stability_m"].as_f64().unwrap() - 2.408e-6).abs() < 1e-9);
}

#[test]
fn power_scan_reports_slope() {
    let text = stdout(&wstate(&["power-scan"]));
    let slope: f64 = text.lines().next().unwrap().trim_start_matches("# slope = ").parse().unwrap();
    assert!((slope - 4.0).abs() < 1e-9);
    let betas: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(betas.len(), 10);
    assert!(betas.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "a.json", r#"{"polarization": "H"}"#);
    assert_eq!(wstate(&["pipeline", "-c", &unknown]).status.code(), Some(2));
    let bad_r = write(dir.path(), "b.json", r#"{"network": {"reflectances": [1.5, 0.3, 0.5]}}"#);
    let o = wstate(&["simulate", "-c", &bad_r]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("reflectance"));
    assert_eq!(wstate(&["pipeline", "-c", "/nonexistent/run.json"]).status.code(), Some(4));
    assert_eq!(wstate(&["power-scan", "--betas", "0.05,0.1"]).status.code(), Some(3));
    let garbage = write(dir.path(), "c.csv", "block,phase_r\nj,zz\n");
    assert_eq!(wstate(&["reconstruct", "--counts", &garbage]).status.code(), Some(2));
    assert_eq!(wstate(&["frobnicate"]).status.code(), Some(2));
}
