use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str], config: &str, threads: Option<&str>) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_confint"));
    cmd.args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"));
    match threads {
        Some(n) => cmd.env("CONFINT_THREADS", n),
        None => cmd.env_remove("CONFINT_THREADS"),
    };
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// Comment line, header and rows of a CSV output.
fn read(path: PathBuf) -> (String, Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let (comment, body) = text.split_once('\n').unwrap();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (comment.to_string(), header, rows)
}

fn col(header: &[String], row: &[String], name: &str) -> f64 {
    let i = header.iter().position(|h| h == name).unwrap();
    row[i].parse().unwrap()
}

fn out_files(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir.join("out")) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn simulate_initial_row() {
    let dir = TempDir::new().unwrap();
    ok(&run(dir.path(), &["simulate"], r#"{"steps": 0}"#, None));
    let (comment, header, rows) = read(dir.path().join("out/simulate.csv"));
    assert!(comment.starts_with("# confint simulate config={"));
    assert!(comment.contains(r#""kind":"M""#) && comment.contains(r#""h":0.25"#));
    assert_eq!(header.join(","), "step,t,x,y,px,py,H,K_E,Kmod,Emod,err_norm");
    assert_eq!(rows.len(), 1);
    assert_eq!(col(&header, &rows[0], "H"), 1.0);
    assert_eq!(col(&header, &rows[0], "K_E"), 0.0);
    assert!((col(&header, &rows[0], "Emod") - 0.9921875).abs() <= 1e-12);
}

#[test]
fn free_particle_modified_hamiltonian_at_start() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"model": "particle-free", "ell": 0, "steps": 200, "reference_substeps": 20}"#;
    ok(&run(dir.path(), &["simulate"], cfg, None));
    let (_, header, rows) = read(dir.path().join("out/simulate.csv"));
    assert_eq!(rows.len(), 201);
    assert!((col(&header, &rows[0], "Kmod") + 0.0625 / 24.0).abs() <= 1e-12);
}

#[test]
fn numbers_round_trip_and_times_are_exact() {
    let dir = TempDir::new().unwrap();
    ok(&run(dir.path(), &["simulate"], r#"{"steps": 40, "h": 0.1, "reference_substeps": 20}"#, None));
    let (_, header, rows) = read(dir.path().join("out/simulate.csv"));
    for row in &rows {
        let step: usize = row[0].parse().unwrap();
        assert_eq!(col(&header, row, "t"), step as f64 * 0.1);
        for field in &row[1..] {
            let v: f64 = field.parse().unwrap();
            assert_eq!(&format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn solver_failure_names_the_step_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["simulate"], r#"{"h": 3.0, "steps": 50, "reference_substeps": 10}"#, None);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("step 4 failed"), "{stderr}");
    assert!(stderr.contains("newton"), "{stderr}");
    assert!(out_files(dir.path()).is_empty(), "{:?}", out_files(dir.path()));
}

#[test]
fn invalid_configs_are_rejected() {
    for cfg in [r#"{"h": -0.25}"#, r#"{"ell": 4}"#, r#"{"stepsize": 0.1}"#, r#"{"kind": "X"}"#, "not json"] {
        let dir = TempDir::new().unwrap();
        let out = run(dir.path(), &["simulate"], cfg, None);
        assert!(!out.status.success(), "{cfg} accepted");
        assert!(out_files(dir.path()).is_empty());
    }
}

#[test]
fn cloud_volumes_do_not_depend_on_thread_count() {
    let cfg = r#"{"steps": 4, "record_every": 2, "mc_samples": 20000, "reference_substeps": 20,
                  "cloud": {"radius": 0.05}}"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    ok(&run(a.path(), &["cloud"], cfg, Some("1")));
    ok(&run(b.path(), &["cloud"], cfg, Some("2")));
    for name in ["cloud.csv", "cloud_reference.csv", "cloud_points.csv", "cloud_reference_points.csv"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let (_, header, rows) = read(a.path().join("out/cloud.csv"));
    assert_eq!(header.join(","), "step,t,vol_mu0,se_mu0,vol_mumod2,se_mumod2");
    assert_eq!(rows.len(), 3);
    // 600-cell of circumradius r has volume 26.475 r^4 / phi^4; N = 1 at y = 0
    let exact = 26.475 / 1.618_033_988_749_895f64.powi(4) * 0.05f64.powi(4);
    let v0 = col(&header, &rows[0], "vol_mu0");
    assert!((v0 / exact - 1.0).abs() < 0.05, "{v0} vs {exact}");
    let (_, _, points) = read(a.path().join("out/cloud_points.csv"));
    assert_eq!(points.len(), 3 * 120);
}

#[test]
fn compare_has_paired_columns() {
    let dir = TempDir::new().unwrap();
    ok(&run(dir.path(), &["compare"], r#"{"model": "particle-free", "reference_substeps": 100}"#, None));
    let (_, header, rows) = read(dir.path().join("out/compare.csv"));
    assert_eq!(header.join(","), "step,t,H_drift_ell0,H_drift_ell2,err_norm_ell0,err_norm_ell2");
    let max = |name: &str| rows.iter().map(|r| col(&header, r, name).abs()).fold(0.0, f64::max);
    assert!(max("H_drift_ell2") < max("H_drift_ell0"));
    let last = rows.last().unwrap();
    assert!(col(&header, last, "err_norm_ell2") < col(&header, last, "err_norm_ell0"));
}

#[test]
fn bea_reports_coefficients_and_oracle() {
    let dir = TempDir::new().unwrap();
    ok(&run(dir.path(), &["bea"], r#"{"kind": "TT", "initial": [0.3, -0.2, 0.7, 1.1]}"#, None));
    let text = fs::read_to_string(dir.path().join("out/bea.json")).unwrap();
    assert!(text.trim_start().starts_with("{\n  \"config\""));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let vec = |k: &str| -> Vec<f64> {
        doc[k].as_array().unwrap_or_else(|| panic!("{k}")).iter().map(|v| v.as_f64().unwrap()).collect()
    };
    for k in ["d1", "d2", "d3", "f0", "f1"] {
        assert_eq!(vec(k).len(), 4);
    }
    let (f2, oracle) = (vec("f2"), vec("oracle_f2"));
    let err: f64 = f2.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = oracle.iter().map(|b| b * b).sum::<f64>().sqrt();
    assert!(err <= 1e-3 * norm, "{err:e}");
}

#[test]
fn plot_writes_standalone_svg() {
    let dir = TempDir::new().unwrap();
    ok(&run(dir.path(), &["simulate"], r#"{"steps": 20, "reference_substeps": 10}"#, None));
    let csv = dir.path().join("out/simulate.csv");
    let cfg = r#"{"plot": {"x": "t", "y": ["H", "Emod"], "title": "energies"}}"#;
    ok(&run(dir.path(), &["plot", "--input", csv.to_str().unwrap()], cfg, None));
    let svg = fs::read_to_string(dir.path().join("out/simulate.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">Emod</text>") && svg.contains(">energies</text>"));
    assert!(!svg.contains("href"));

    let out = run(dir.path(), &["plot", "--input", csv.to_str().unwrap()], r#"{"plot": {"y": ["nope"]}}"#, None);
    assert!(!out.status.success());
}
