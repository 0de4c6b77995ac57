use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdmsim"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("QDMSIM_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn metadata(dir: &Path, command: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{command}.json"))).unwrap()).unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        "[bath]\nn_omega = 300\n\n[sweep]\nv_min = 0.1\nv_max = 1.0\nper_decade = 2\ndissipation = \"on\"\n\n[spectral_density]\nenergy_max = 4.0\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn spectra_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spectra", "--sector", "2e", "--te", "0.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("spectra.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("F_Vnm,edF_meV,E0_meV,E1_meV,E2_meV"));
    assert!(header.ends_with("triplet_meV"));
    assert_eq!(csv.lines().count(), 402);
    let meta = metadata(dir.path(), "spectra");
    assert_eq!(meta["command"], "spectra");
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    assert!((meta["summary"]["t_e_meV"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn switch_and_sweep_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(dir.path(), &["--config", &cfg, "switch", "--v", "0.5", "--T", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(traj.lines().next().unwrap().starts_with("t_ps,F_Vnm,p0,p1"));
    let meta = metadata(dir.path(), "switch");
    let pops: Vec<f64> = meta["summary"]["final_populations"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-7);

    let o = run(dir.path(), &["--config", &cfg, "sweep", "--T", "4,20"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
}

#[test]
fn spectral_density_reports_channels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(dir.path(), &["--config", &cfg, "spectral-density"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("spectral_density.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    for ch in ["LA_DP", "LA_PE", "TA1", "TA2"] {
        assert!(header.contains(ch), "{header}");
    }
}

#[test]
fn validate_config_echoes_resolved_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = run(dir.path(), &["--config", &cfg, "validate-config"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("n_omega = 300"));
}

#[test]
fn bad_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[bath]\ntemperature = -3.0\n").unwrap();
    let o = run(dir.path(), &["--config", bad.to_str().unwrap(), "spectra"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["exit_code"], 2);

    let o = run(dir.path(), &["spectra", "--sector", "3e"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), &["switch", "--v", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}
