use std::path::Path;
use std::process::{Command, Output};

use ionshift::ion_params::{builtin_yb171, LaserField, MagneticField};
use ionshift::stark::ShiftModel;
use serde_json::Value;

fn ionshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = ionshift(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

/// Data rows of a CSV with a `# config:` line and a column header.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    ionshift(args).status.code().unwrap()
}

#[test]
fn scan_theta_columns_and_values() {
    let (header, rows) = csv_rows(&stdout(&["scan-theta", "--resolution-deg", "0.5"]));
    assert_eq!(
        header,
        [
            "theta_deg",
            "eps_plus_sq",
            "eps_minus_sq",
            "second_scalar_hz",
            "second_vector_hz",
            "fourth_hz",
            "total_hz"
        ]
    );
    assert_eq!(rows.len(), 180);
    let row = rows.iter().find(|r| r[0] == 22.5).unwrap();
    let total = row[column(&header, "total_hz")];
    assert!((total / 1.78e4 - 1.0).abs() < 0.05, "{total}");
    let sum = row[3] + row[4] + row[5];
    assert!((sum - total).abs() <= 1e-5 * total);

    let (header, rows) = csv_rows(&stdout(&["scan-theta", "--qubit", "zeeman+", "--resolution-deg", "0.5"]));
    let total = rows.iter().find(|r| r[0] == 22.5).unwrap()[column(&header, "total_hz")];
    assert!((total / 4.74e5 - 1.0).abs() < 0.005, "{total}");
}

#[test]
fn scan_theta_rejects_zero_resolution() {
    assert_eq!(exit_code(&["scan-theta", "--resolution-deg", "0"]), 2);
}

#[test]
fn output_is_byte_stable_and_echoes_config() {
    let args = ["scan-theta", "--resolution-deg", "1", "--b-gauss", "3.5"];
    let a = stdout(&args);
    let b = stdout(&args);
    let single = stdout(&["scan-theta", "--resolution-deg", "1", "--b-gauss", "3.5", "--threads", "1"]);
    assert_eq!(a, b);
    assert_eq!(a, single);
    let header: Value = serde_json::from_str(a.lines().next().unwrap().trim_start_matches("# config: ")).unwrap();
    assert_eq!(header["b_gauss"], 3.5);
    assert_eq!(header["power_mw"], 52.1);
    assert_eq!(header["species"], "builtin:yb171");
    assert!(!a.contains("-0.00000e0"));
}

/// Least-squares fit of y = a + b x + c x²; returns (a, b, c).
fn quadratic_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for (&xi, &yi) in x.iter().zip(y) {
        let u = xi / scale;
        let row = [1.0, u, u * u];
        for i in 0..3 {
            aty[i] += row[i] * yi;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    // Gaussian elimination on the 3×3 normal equations
    for col in 0..3 {
        for r in col + 1..3 {
            let f = ata[r][col] / ata[col][col];
            for c in col..3 {
                ata[r][c] -= f * ata[col][c];
            }
            aty[r] -= f * aty[col];
        }
    }
    let mut sol = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| ata[i][j] * sol[j]).sum();
        sol[i] = (aty[i] - s) / ata[i][i];
    }
    (sol[0], sol[1] / scale, sol[2] / (scale * scale))
}

#[test]
fn scan_intensity_quadratic_and_linear_parts() {
    let powers = "0,10,20,30,40,52.1,60,70,80,90,100";
    let (header, rows) = csv_rows(&stdout(&["scan-intensity", "--theta-deg", "22.5", "--powers-mw", powers]));
    assert_eq!(header, ["power_mW", "intensity_W_m2", "total_hz", "d_sigma_hz"]);
    assert!(rows[0][1..].iter().all(|&v| v == 0.0));

    let i: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let total: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let d: Vec<f64> = rows.iter().map(|r| r[3]).collect();

    // fourth-order coefficient regenerated from the species constants
    let unit = LaserField::new(std::f64::consts::PI * 1e-10, 1e-5, 12.883e-12, 118.993e6).unwrap();
    let m = ShiftModel::new(&builtin_yb171(), &unit, &MagneticField::from_gauss(11.343).unwrap()).unwrap();
    let expected_quartic = m.fourth_order_coefficient().unwrap();
    let (_, _, c) = quadratic_fit(&i, &total);
    assert!((c / expected_quartic - 1.0).abs() < 2e-3, "{c:e} vs {expected_quartic:e}");

    let (a, b, c) = quadratic_fit(&i, &d);
    let imax = i.iter().fold(0.0f64, |m, v| m.max(*v));
    assert!(a.abs() < 1e-3 * b * imax);
    assert!((c * imax * imax).abs() < 1e-4 * b * imax, "curvature {c:e}");
}

#[test]
fn find_magic_zeeman_is_45_degrees() {
    let v = json(&["find-magic", "--qubit", "zeeman+"]);
    assert_eq!(v["theta_min_deg"], 45.0);
    assert!(v["shift_at_min_hz"].as_f64().unwrap().abs() < 1e-6);
    assert_eq!(v["config"]["b_gauss"], 11.343);
}

#[test]
fn find_magic_clock_and_scan_output() {
    let dir = tempfile::tempdir().unwrap();
    let scan = dir.path().join("scan.csv");
    let v = json(&["find-magic", "--scan-out", scan.to_str().unwrap()]);
    let theta = v["theta_min_deg"].as_f64().unwrap();
    assert!(theta > 45.0 && theta < 47.0);
    assert!(v["shift_at_min_hz"].as_f64().unwrap() > 0.0);
    assert_eq!(v["zero_crossings_deg"].as_array().unwrap().len(), 0);
    let (_, rows) = csv_rows(&std::fs::read_to_string(scan).unwrap());
    assert_eq!(rows.len(), 900);
}

#[test]
fn threshold_field_default() {
    let v = json(&["threshold-field", "--format", "json"]);
    let b = v["threshold_gauss"].as_f64().unwrap();
    assert!((b / 15.557 - 1.0).abs() < 0.02, "{b}");
    assert_eq!(exit_code(&["threshold-field", "--b-max", "5"]), 4);
}

#[test]
fn dressed_states_zero_field_gap() {
    let v = json(&["dressed-states", "--b-gauss", "0", "--format", "json"]);
    let gap = v["clock_gap_hz"].as_f64().unwrap();
    assert!((gap - 12.642812e9).abs() < 1.0, "{gap}");
    assert_eq!(v["states"].as_array().unwrap().len(), 4);
    let csv = stdout(&["dressed-states", "--b-gauss", "0"]);
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn ramsey_writes_table_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let args = [
        "ramsey",
        "--points",
        "20",
        "--shots",
        "2000",
        "--seed",
        "9",
        "--summary-out",
        summary.to_str().unwrap(),
    ];
    let a = stdout(&args);
    let b = stdout(&args);
    assert_eq!(a, b);
    let (header, rows) = csv_rows(&a);
    assert_eq!(header, ["tau_s", "contrast", "contrast_err"]);
    assert_eq!(rows.len(), 20);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s["seed"], 9);
    assert!(s["model"].is_string());
    let t2 = s["t2_s"].as_f64().unwrap();
    assert!((t2 / 0.478e-3 - 1.0).abs() < 0.05, "{t2}");
    assert_eq!(exit_code(&["ramsey", "--shots", "0"]), 4);
}

#[test]
fn config_file_and_species_file() {
    let dir = tempfile::tempdir().unwrap();
    let species = dir.path().join("yb.json");
    std::fs::write(&species, serde_json::to_string(&builtin_yb171().to_config()).unwrap()).unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        format!(r#"{{"species": {:?}, "b_gauss": 3.5, "format": "json"}}"#, species.to_str().unwrap()),
    )
    .unwrap();

    let from_file = json(&["threshold-field", "--config", cfg.to_str().unwrap()]);
    let builtin = json(&["threshold-field", "--format", "json"]);
    let rel = from_file["threshold_gauss"].as_f64().unwrap() / builtin["threshold_gauss"].as_f64().unwrap();
    assert!((rel - 1.0).abs() < 1e-5);
    assert_eq!(from_file["config"]["b_gauss"], 3.5);

    // flags override the file
    let v = json(&["dressed-states", "--config", cfg.to_str().unwrap(), "--b-gauss", "1"]);
    assert_eq!(v["config"]["b_gauss"], 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"power": 3}"#).unwrap();
    assert_eq!(exit_code(&["dressed-states", "--config", bad.to_str().unwrap()]), 2);
    assert_eq!(exit_code(&["dressed-states", "--power-mw", "-1"]), 2);
    assert_eq!(exit_code(&["dressed-states", "--species", "builtin:ca43"]), 2);
    assert_eq!(exit_code(&["dressed-states", "--no-such-flag"]), 2);

    let missing = dir.path().join("missing.json");
    assert_eq!(exit_code(&["dressed-states", "--config", missing.to_str().unwrap()]), 3);
    let unwritable = Path::new("/nonexistent-dir/out.csv");
    assert_eq!(exit_code(&["dressed-states", "--out", unwritable.to_str().unwrap()]), 3);

    let species = dir.path().join("broken.json");
    std::fs::write(&species, r#"{"name": "x", "omega_hf_GHz": "twelve"}"#).unwrap();
    let out = ionshift(&["dressed-states", "--species", species.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_hf_GHz"));
}
