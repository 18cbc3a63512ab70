use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn spinsense(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinsense"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = spinsense(args);
    assert!(
        out.status.success(),
        "spinsense {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Self {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines
            .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
            .collect();
        Self { header, rows }
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name} in {:?}", self.header));
        self.rows.iter().map(|r| r[i]).collect()
    }
}

fn out_dir(root: &TempDir, name: &str) -> (PathBuf, String) {
    let p = root.path().join(name);
    let s = p.to_str().unwrap().to_owned();
    (p, s)
}

#[test]
fn fringe_period_matches_detuning() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "f");
    ok(&[
        "fringes", "--builder", "ramsey", "--detuning", "1MHz", "--sweep", "tau=10ns:4us:200", "--out", &d,
    ]);
    let t = Table::read(&dir.join("fringes.csv"));
    let tau = t.column("time_param_s");
    let p = t.column("p_true");
    let peaks: Vec<f64> = (1..p.len() - 1)
        .filter(|&i| p[i] > p[i - 1] && p[i] >= p[i + 1])
        .map(|i| tau[i])
        .collect();
    assert_eq!(peaks.len(), 3, "{peaks:?}");
    let grid = tau[1] - tau[0];
    for w in peaks.windows(2) {
        assert!((w[1] - w[0] - 1e-6).abs() <= grid, "{peaks:?}");
    }
}

#[test]
fn zero_detuning_gives_flat_unit_population() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "f");
    ok(&["fringes", "--builder", "ramsey", "--sweep", "tau=10ns:4us:50", "--out", &d]);
    let t = Table::read(&dir.join("fringes.csv"));
    assert!(t.column("p_true").iter().all(|&p| (p - 1.0).abs() < 1e-12));
    assert!(t.column("p_hat").iter().all(|&p| p == 1.0));
}

#[test]
fn missing_sequence_file_fails_without_output() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "f");
    let missing = root.path().join("absent.seq");
    let out = spinsense(&["fringes", "--seq", missing.to_str().unwrap(), "--sweep", "tau=1us:2us:3", "--out", &d]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(missing.to_str().unwrap()), "{stderr}");
    assert!(!dir.exists());
}

#[test]
fn invalid_inputs_leave_no_partial_output() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "f");
    fs::create_dir(&dir).unwrap();
    let noise = root.path().join("bad.toml");
    fs::write(&noise, "kind = \"ou\"\nstd_dev = \"50 kHz\"\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["fringes", "--builder", "ramsey", "--sweep", "tau=1us:2us:0", "--out", &d],
        &["fringes", "--builder", "ramsey", "--sweep", "tau=1:2us:3", "--out", &d],
        &["decay", "--builder", "hahn", "--noise", noise.to_str().unwrap(), "--sweep", "tau=1us:2us:3", "--out", &d],
        &["fringes", "--builder", "ramsey", "--sweep", "tau=1us:2us:3", "--contrast", "1.5", "--out", &d],
    ];
    for args in cases {
        let out = spinsense(args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 0, "{args:?} left files behind");
    }
    let stderr = String::from_utf8_lossy(&spinsense(cases[2]).stderr).into_owned();
    assert!(stderr.contains("bad.toml") && stderr.contains("correlation_time"), "{stderr}");
}

fn assert_rerun_identical(command: &str, args: &[&str], csv: &[&str]) {
    let root = TempDir::new().unwrap();
    let (first, a) = out_dir(&root, "a");
    let (second, b) = out_dir(&root, "b");
    let mut full = vec![command];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &a]);
    ok(&full);
    let json = first.join(format!("{command}.json"));
    ok(&[command, "--config", json.to_str().unwrap(), "--out", &b]);
    for name in csv {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{command}: {name} differs"
        );
    }
    assert_eq!(fs::read(&json).unwrap(), fs::read(second.join(format!("{command}.json"))).unwrap());
}

#[test]
fn results_rerun_byte_identically_from_json() {
    let root = TempDir::new().unwrap();
    let noise = root.path().join("ou.toml");
    fs::write(
        &noise,
        "kind = \"composite\"\n\n[[components]]\nkind = \"ou\"\nstd_dev = \"50 kHz\"\ncorrelation_time = \"5 us\"\n\n\
         [[components]]\nkind = \"sinusoid\"\namplitude = \"20 kHz\"\nfrequency = \"250 kHz\"\nphase = \"random\"\n",
    )
    .unwrap();
    let n = noise.to_str().unwrap();
    assert_rerun_identical(
        "fringes",
        &["--builder", "ramsey", "--param", "tau=1us", "--detuning", "1MHz", "--sweep", "detuning=-2MHz:2MHz:21", "--seed", "4"],
        &["fringes.csv"],
    );
    assert_rerun_identical(
        "decay",
        &["--builder", "cpmg4", "--noise", n, "--sweep", "tau=0.2us:4us:8:log", "--realizations", "200", "--seed", "9"],
        &["decay.csv"],
    );
    assert_rerun_identical(
        "spectrum",
        &["-n", "8", "--noise", n, "--sweep", "tau=0.5us:5us:6:log", "--realizations", "200"],
        &["spectrum.csv"],
    );
    assert_rerun_identical(
        "sense",
        &["--field", "100nT", "--trials", "20", "--reps", "5000", "--seed", "3"],
        &["sense.csv", "sensitivity.csv"],
    );
    assert_rerun_identical("odmr", &["--field", "1mT", "--points", "101"], &["odmr.csv"]);
}

#[test]
fn decay_follows_gaussian_envelope() {
    let root = TempDir::new().unwrap();
    let noise = root.path().join("static.toml");
    // σ = 1/T₂* with T₂* = 1 µs
    fs::write(&noise, "kind = \"static_gaussian\"\nstd_dev = \"1e6 rad/s\"\n").unwrap();
    let (dir, d) = out_dir(&root, "d");
    ok(&[
        "decay", "--builder", "ramsey", "--noise", noise.to_str().unwrap(), "--sweep", "tau=0.1us:3us:30",
        "--realizations", "20000", "--out", &d,
    ]);
    let t = Table::read(&dir.join("decay.csv"));
    let tau = t.column("time_param_s");
    let c = t.column("coherence");
    let theory = t.column("coherence_gaussian_theory");
    for i in 0..tau.len() {
        let envelope = (-0.5 * (1e6 * tau[i]).powi(2)).exp();
        assert!((c[i] - envelope).abs() < 0.02, "tau {}: {} vs {envelope}", tau[i], c[i]);
        assert!((theory[i] - envelope).abs() < 1e-3 * envelope.max(1e-3), "{} vs {envelope}", theory[i]);
    }

    let (dir, d) = out_dir(&root, "h");
    ok(&[
        "decay", "--builder", "hahn", "--noise", noise.to_str().unwrap(), "--sweep", "tau=0.1us:3us:30",
        "--realizations", "500", "--out", &d,
    ]);
    let c = Table::read(&dir.join("decay.csv")).column("coherence");
    assert!(c.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn spectrum_accepts_odd_and_even_counts_and_zero_noise_gives_zero() {
    let root = TempDir::new().unwrap();
    for n in ["3", "8"] {
        let (dir, d) = out_dir(&root, n);
        ok(&["spectrum", "-n", n, "--sweep", "tau=0.5us:5us:5:log", "--out", &d]);
        let t = Table::read(&dir.join("spectrum.csv"));
        assert_eq!(t.rows.len(), 5);
        assert!(t.column("psd_estimate_rad2_per_s2_per_Hz").iter().all(|&s| s == 0.0));
        assert!(t.column("psd_reference_rad2_per_s2_per_Hz").iter().all(|&s| s == 0.0));
    }
}

#[test]
fn sense_recovers_field_and_reports_formula_values() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "s");
    let field = 0.1 / (std::f64::consts::TAU * 3e10 * 1e-6);
    ok(&[
        "sense", "--field", &format!("{field}T"), "--tau", "1us", "--trials", "1000", "--reps", "10000",
        "--averaging-time", "4s", "--seed", "21", "--out", &d,
    ]);
    let t = Table::read(&dir.join("sense.csv"));
    let est = t.column("field_estimate_T");
    let se = t.column("field_std_error_T");
    let covered = est.iter().zip(&se).filter(|(e, s)| (*e - field).abs() <= 3.0 * *s).count();
    assert!(covered >= 990, "{covered}/1000 within 3 sigma");

    let r = Table::read(&dir.join("sensitivity.csv"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("sense.json")).unwrap()).unwrap();
    let gamma = doc["config"]["spec"]["gyromagnetic"].as_f64().unwrap();
    assert!((gamma / (std::f64::consts::TAU * 3e10) - 1.0).abs() < 1e-15);
    let eta = r.column("eta_ideal_T_per_sqrtHz");
    assert_eq!(eta[0], 1.0 / (gamma * 1e-6f64.sqrt()));
    assert_eq!(eta[1], 1.0 / (gamma * 300e-6f64.sqrt()));
    let sigma_b = r.column("sigma_B_T");
    let eff = r.column("eta_effective_T_per_sqrtHz");
    assert_eq!(sigma_b[0], eff[0] / 2.0);
}

#[test]
fn odmr_dip_moves_with_field() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "o");
    ok(&["odmr", "--field", "1mT", "--start", "2.8GHz", "--stop", "2.95GHz", "--points", "151", "--out", &d]);
    let t = Table::read(&dir.join("odmr.csv"));
    let f = t.column("frequency_Hz");
    let y = t.column("fluorescence");
    let k = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    assert!((f[k] - 2.9e9).abs() < 1e6, "dip at {}", f[k]);
    assert!((1.0 - y[k] - 0.3).abs() < 1e-9);
}

#[test]
fn sequence_files_drive_runs_and_validate() {
    let root = TempDir::new().unwrap();
    let seq = root.path().join("echo.seq");
    fs::write(&seq, "# spin echo\np2 y\nwait 2us\npi x\nwait 2us\np2 y\n").unwrap();
    let s = seq.to_str().unwrap();
    let out = ok(&["validate", "--seq", s]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok"));

    let (dir, d) = out_dir(&root, "e");
    ok(&["fringes", "--seq", s, "--detuning", "3MHz", "--sweep", "tau=1us:8us:8", "--out", &d]);
    let t = Table::read(&dir.join("fringes.csv"));
    assert!(t.column("p_true").iter().all(|&p| (p - 1.0).abs() < 1e-12));
    assert_eq!(t.column("total_time_s")[0], 1e-6);

    fs::write(&seq, "p2 y\nwait -2us\np2 y\n").unwrap();
    let out = spinsense(&["validate", "--seq", s]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("echo.seq:2:"), "{stderr}");
}

#[test]
fn format_selection_and_seed_reuse_warning() {
    let root = TempDir::new().unwrap();
    let (dir, d) = out_dir(&root, "f");
    ok(&["fringes", "--builder", "ramsey", "--sweep", "tau=1us:2us:3", "--format", "csv", "--out", &d]);
    assert!(dir.join("fringes.csv").exists() && !dir.join("fringes.json").exists());
    let out = ok(&["fringes", "--builder", "ramsey", "--sweep", "tau=1us:3us:3", "--format", "json", "--out", &d]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed 0 was previously used"));
    let json = fs::read_to_string(dir.join("fringes.json")).unwrap();
    assert!(json.contains("\"seed_reuse\""));
}
