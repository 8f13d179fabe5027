use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mpemba(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpemba"))
        .current_dir(dir)
        .args(["--out", "out"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> PathBuf {
    let out = mpemba(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    dir.join(String::from_utf8(out.stdout).unwrap().trim())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

/// Header names and numeric rows of a bundle CSV, skipping `#` lines.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn spectrum_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["spectrum"]);
    let csv = dir.join("spectrum.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# omega1 = 2pi x 20 kHz"));
    assert!(text.contains("# t_max = auto (10 tau1)"));
    assert_eq!(column(&csv, "re")[0], 0.0);
    assert_eq!(column(&csv, "re").len(), 9);
    let m = manifest(&dir);
    assert_eq!(m["bundle"], "spectrum");
    assert_eq!(m["config"]["omega1_khz"], 20.0);
    assert!(m["files"].as_array().unwrap().iter().any(|f| f["name"] == "spectrum.csv"));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "omega2_ratio = 0.1\nomega_3 = 4\n");
    let out = mpemba(tmp.path(), &["--config", &cfg, "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_3"));
}

#[test]
fn invalid_values_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "kappa1_ratio = -1.0\n");
    assert_eq!(mpemba(tmp.path(), &["--config", &cfg, "spectrum"]).status.code(), Some(2));
    assert_eq!(mpemba(tmp.path(), &["compile", "1,zero,0"]).status.code(), Some(2));
    assert_eq!(mpemba(tmp.path(), &["tomo", "reconstruct", "missing.txt"]).status.code(), Some(2));
    assert_eq!(mpemba(tmp.path(), &["figure", "fig9"]).status.code(), Some(2));
}

#[test]
fn exceptional_point_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "omega2_ratio = 0.0\nkappa1_ratio = 2.0\n");
    let out = mpemba(tmp.path(), &["--config", &cfg, "spectrum"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(mpemba(tmp.path(), &["--config", &cfg, "evolve"]).status.code(), Some(3));
}

#[test]
fn evolve_matches_ode_and_starts_at_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["evolve"]);
    let csv = dir.join("trajectory_zero.csv");
    assert_eq!(column(&csv, "t")[0], 0.0);
    assert!((column(&csv, "p0")[0] - 1.0).abs() < 1e-12);
    assert!(column(&csv, "ode_trace_dist").iter().all(|d| *d <= 1e-7));
    let zero_slope = manifest(&dir)["results"]["asymptotic_slope"].as_f64().unwrap();

    let cfg = write_config(tmp.path(), "initial_state = \"sme\"\n");
    let dir = ok(tmp.path(), &["--config", &cfg, "evolve"]);
    let sme_slope = manifest(&dir)["results"]["asymptotic_slope"].as_f64().unwrap();
    assert!(sme_slope < zero_slope, "sME {sme_slope} vs |0> {zero_slope}");
    assert!(dir.join("trajectory_sme.csv").exists());
}

#[test]
fn lep_locate_in_window() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["lep", "locate"]);
    let lep = manifest(&dir)["results"]["lep_ratio"].as_f64().unwrap();
    assert!(0.16 < lep && lep < 0.18, "{lep}");
    let dir = ok(tmp.path(), &["lep", "scan"]);
    assert_eq!(read_csv(&dir.join("lep_scan.csv")).1.len(), 291);
}

#[test]
fn compile_ground_state_and_sme() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["compile", "1,0,0"]);
    assert!(column(&dir.join("pulses.csv"), "theta").iter().all(|t| *t == 0.0));
    let dir = ok(tmp.path(), &["compile", "sme", "--verify"]);
    let err = manifest(&dir)["results"]["recomposition_error"].as_f64().unwrap();
    assert!(err < 1e-10);
    ok(tmp.path(), &["compile", "0.6,0.8i,0", "--verify"]);
}

#[test]
fn tomography_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "initial_state = \"sme\"\nresamples = 100\n");
    let sim = ok(tmp.path(), &["--config", &cfg, "tomo", "simulate"]);
    let record = sim.join("record.txt");
    let rec = ok(tmp.path(), &["--config", &cfg, "tomo", "reconstruct", record.to_str().unwrap()]);
    let truth = column(&sim.join("truth.csv"), "rho00_re")[0];
    let fitted = column(&rec.join("state.csv"), "rho00_re")[0];
    assert!((truth - fitted).abs() < 0.01, "{truth} vs {fitted}");
    let (_, est) = read_csv(&rec.join("estimates.csv"));
    assert!(est.iter().any(|r| r[0] == "purity"));
}

#[test]
fn seed_changes_record_and_reruns_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let read = |dir: &Path| std::fs::read(dir.join("record.txt")).unwrap();
    let a = read(&ok(tmp.path(), &["--seed", "1", "tomo", "simulate"]));
    let b = read(&ok(tmp.path(), &["--seed", "1", "tomo", "simulate"]));
    let c = read(&ok(tmp.path(), &["--seed", "2", "tomo", "simulate"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn fig1e_has_one_sign_change() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["figure", "fig1e"]);
    assert_eq!(manifest(&dir)["results"]["sign_changes"], 1);
    let signed = column(&dir.join("overlap_vs_angle.csv"), "c1_hermitian");
    assert!(signed[0] * signed[signed.len() - 1] < 0.0);
}

#[test]
fn fig3_shows_bifurcation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["figure", "fig3"]);
    let sweep = dir.join("spectrum_sweep.csv");
    let (ratios, im) = (column(&sweep, "ratio"), column(&sweep, "l1_im"));
    let lep = manifest(&dir)["results"]["lep_ratio"].as_f64().unwrap();
    for (r, v) in ratios.iter().zip(&im) {
        if *r < lep - 1e-3 {
            assert_eq!(*v, 0.0, "ratio {r}");
        } else if *r > lep + 1e-3 {
            assert!(v.abs() > 0.0, "ratio {r}");
        }
    }
}

#[test]
fn s2_compares_lindblad_with_rate_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(tmp.path(), &["figure", "s2"]);
    let (header, rows) = read_csv(&dir.join("populations.csv"));
    for name in ["state", "t", "lindblad_p0", "rate_p2"] {
        assert!(header.iter().any(|h| h == name), "{name}");
    }
    assert_eq!(rows.len(), 3 * 200);
}

#[test]
fn no_temporary_files_left_behind() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["spectrum"]);
    ok(tmp.path(), &["compile", "sme"]);
    for bundle in std::fs::read_dir(tmp.path().join("out")).unwrap() {
        for f in std::fs::read_dir(bundle.unwrap().path()).unwrap() {
            let name = f.unwrap().file_name().into_string().unwrap();
            assert!(!name.starts_with(".tmp"), "{name}");
        }
    }
}
