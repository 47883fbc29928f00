use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biphoton"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("--quiet").arg("--out").arg(out).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_cfg(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

/// Numeric cells of a CSV after the header and units rows.
fn numeric_rows(path: &Path) -> Vec<Vec<Option<f64>>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|c| c.parse().ok()).collect())
        .collect()
}

#[test]
fn iac_runs_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let scenario = root().join("scenarios/iac.cfg");
    for dir in [&a, &b] {
        let o = run(&["--seed", "7", "run", scenario.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["iac_iac.csv", "iac_spectrogram.csv", "iac_manifest.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between runs");
    }
    let manifest = std::fs::read_to_string(a.path().join("iac_manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"));
    assert!(manifest.contains("input_sha256"));
    let rows = numeric_rows(&a.path().join("iac_iac.csv"));
    assert_eq!(rows.len(), 9000);
    assert!(rows.iter().all(|r| r[2].is_some()), "every delay carries sampled counts");
}

#[test]
fn different_seeds_give_different_counts() {
    let a = TempDir::new().unwrap();
    let cfg = write_cfg(
        a.path(),
        "[scenario]\nexperiment = iac\n[source]\ncorrelation_time = 24.4 fs\n[grid]\nspan = 0.5 rad/fs\npoints = 512\n\
         [scan]\nsampling = true\ntau_start = -50 fs\ntau_stop = 0 fs\ntau_step = 0.5 fs\n[spectrogram]\nwindow = 0\n",
    );
    let o1 = run(&["--seed", "1", "run", cfg.to_str().unwrap()], &a.path().join("one"));
    let o2 = run(&["--seed", "2", "run", cfg.to_str().unwrap()], &a.path().join("two"));
    assert!(o1.status.success() && o2.status.success());
    let x = std::fs::read(a.path().join("one/iac_iac.csv")).unwrap();
    let y = std::fs::read(a.path().join("two/iac_iac.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn missing_scenario_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run(&["run", "missing.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
}

#[test]
fn bad_unit_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(dir.path(), "[rates]\nsigma = 3.7 um\nbeta_c = 6.5e-35 furlong\n");
    let o = run(&["rates", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("[rates] beta_c") && err.contains("furlong"), "{err}");
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(dir.path(), "[rates]\nbeta_c = 6.5e-35\n\n[rates_extra]\nfoo = 1\n");
    let o = run(&["rates", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}

#[test]
fn sampling_without_seed_is_rejected() {
    let dir = TempDir::new().unwrap();
    let scenario = root().join("scenarios/iac.cfg");
    let o = run(&["run", scenario.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn physics_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    // the SLM cannot encode a 3.5 ps delay
    let cfg = write_cfg(
        dir.path(),
        "[scenario]\nexperiment = iac\n[source]\ncorrelation_time = 24.4 fs\n[grid]\nspan = 0.5 rad/fs\npoints = 512\n\
         [scan]\nshaping = slm\ntau_start = 3500 fs\ntau_stop = 3501 fs\ntau_step = 0.5 fs\n[spectrogram]\nwindow = 0\n",
    );
    let o = run(&["run", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("aliasing"), "{}", stderr(&o));
}

#[test]
fn empty_rates_config_uses_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(dir.path(), "");
    let o = bin()
        .arg("--out")
        .arg(dir.path())
        .args(["rates", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.lines().any(|l| l.starts_with("beta_q ") && l.contains("5.63")), "{text}");
    let csv = std::fs::read_to_string(dir.path().join("rates_rates.csv")).unwrap();
    for line in csv.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(cells[3] == "default" || cells[3] == "derived", "{line}");
    }
    assert!(csv.contains("beta_q,5.63"));
}

#[test]
fn overridden_rates_are_marked_as_input() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(dir.path(), "[rates]\ntau_e = 12.2 fs\n");
    let o = run(&["rates", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("rates_rates.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("tau_e_fs,1.22") && l.contains(",input,")), "{csv}");
    assert!(csv.lines().any(|l| l.starts_with("sigma_e_um,") && l.contains(",default,")));
}

#[test]
fn dispersion_scan_matches_golden_files() {
    let dir = TempDir::new().unwrap();
    let here = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests");
    let cfg = here.join("data/golden_dispersion.cfg");
    let o = run(&["run", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for file in ["golden_quantum.csv", "golden_classical.csv"] {
        let fresh = numeric_rows(&dir.path().join(file));
        let golden = numeric_rows(&here.join("golden").join(file));
        assert_eq!(fresh.len(), golden.len(), "{file}");
        for (r, (a, b)) in fresh.iter().zip(&golden).enumerate() {
            for (x, y) in a.iter().zip(b) {
                match (x, y) {
                    (Some(x), Some(y)) => {
                        assert!((x - y).abs() <= 1e-9 * y.abs().max(1e-300), "{file} row {r}: {x} vs {y}")
                    }
                    (None, None) => {}
                    _ => panic!("{file} row {r}: cell mismatch"),
                }
            }
        }
    }
}

#[test]
fn every_csv_has_header_units_and_manifest_entry() {
    let dir = TempDir::new().unwrap();
    for scenario in ["spdc.cfg", "calibrate.cfg", "dispersion.cfg", "gvd.cfg", "rates.cfg"] {
        let path = root().join("scenarios").join(scenario);
        let o = run(&["run", path.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{scenario}: {}", stderr(&o));
    }
    let manifests: String = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with("_manifest.json"))
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let text = std::fs::read_to_string(&path).unwrap();
            let mut lines = text.lines();
            let header = lines.next().unwrap();
            let units = lines.next().unwrap();
            assert_eq!(header.split(',').count(), units.split(',').count(), "{}", path.display());
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            assert!(manifests.contains(&format!("\"{name}\"")), "{name} missing from manifest");
        }
    }
}

#[test]
fn calibration_reads_a_peaks_file() {
    let dir = TempDir::new().unwrap();
    let mut peaks = String::from("pixel,wavelength\n1,nm\n");
    // peaks from the default geometry written with the library's own map
    let map = root().join("scenarios/calibrate.cfg");
    let o = run(&["run", map.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("calibrate_pixel_map.csv")).unwrap();
    for line in table.lines().skip(2).step_by(7) {
        let cells: Vec<&str> = line.split(',').collect();
        peaks.push_str(&format!("{},{}\n", cells[0], cells[1]));
    }
    std::fs::write(dir.path().join("peaks.csv"), peaks).unwrap();
    let cfg = write_cfg(dir.path(), "[scenario]\nname = from_file\n[calibration]\npeaks_file = peaks.csv\n");
    let o = run(&["calibrate", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(dir.path().join("from_file_manifest.json")).unwrap();
    assert!(manifest.contains("fit_grating_period"));

    let cfg = write_cfg(dir.path(), "[calibration]\npeaks_file = nowhere.csv\n");
    let o = run(&["calibrate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("file not found"));
}

#[test]
fn command_and_scenario_must_agree() {
    let dir = TempDir::new().unwrap();
    let scenario = root().join("scenarios/rates.cfg");
    let o = run(&["iac", scenario.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment"));
}
