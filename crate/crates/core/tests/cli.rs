use std::path::Path;
use std::process::{Command, Output};

use scatterlab::geometry::StarSurface;

fn scatterlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatterlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .args(["--threads", "1"])
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn inadmissible_surface_is_rejected_with_report() {
    let dir = tempfile::tempdir().unwrap();
    // unit sphere plus a Y_50 bump; c0 = 1 is below the smoothness proxy
    let path = dir.path().join("rough.json");
    std::fs::write(
        &path,
        r#"{"a0": 0.5, "a1": 2.0, "c0": 1.0, "L_geom": 16, "coefficients": [[0, 0, 3.5449077018110318], [5, 0, 0.2]]}"#,
    )
    .unwrap();
    let o = scatterlab(&["forward", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("smoothness : FAIL"), "{text}");
    assert!(!dir.path().join("farfield.csv").exists());
}

#[test]
fn synthetic_stability_writes_rate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.toml");
    std::fs::write(
        &cfg,
        "amplitudes = [1e-3, 1e-5, 1e-7, 1e-9, 1e-11, 1e-13]\n[perturbation]\nkind = \"synthetic_law\"\nc1 = 0.5\nc2 = 2.0\n",
    )
    .unwrap();
    let o = scatterlab(&["stability", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ratefit.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let values: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "c2_hat").expect("c2_hat column");
    let c2: f64 = values[col].parse().unwrap();
    assert!((c2 - 2.0).abs() < 1e-6, "{c2}");
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 7);
    assert!(dir.path().join("ratefit.json").exists());
}

#[test]
fn forward_then_continue() {
    let dir = tempfile::tempdir().unwrap();
    let surface = dir.path().join("s.json");
    std::fs::write(&surface, StarSurface::perturbed_sphere(1.0, &[(2, 0, 0.1)]).unwrap().to_json()).unwrap();
    let cfg = dir.path().join("forward.toml");
    std::fs::write(&cfg, "out_degree = 16\n[forward]\ndegree = 8\n").unwrap();
    let o = scatterlab(&["forward", surface.to_str().unwrap(), "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ff = dir.path().join("farfield.csv");
    assert!(ff.exists());
    let o = scatterlab(&["continue", ff.to_str().unwrap(), "--lambda", "1,-0.5,2", "--l-trunc", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("continued.csv")).unwrap();
    // 26 incident directions, two points each
    assert_eq!(csv.lines().count(), 1 + 52);
    let o = scatterlab(&["continue", ff.to_str().unwrap(), "--lambda", "1,2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn example1_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = scatterlab(&["example1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("example1.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "ell,boundary_norm,annulus_norm,scaled_product,root_rate,asymptotic_ratio");
    assert_eq!(lines.len(), 4);
    for row in &lines[1..] {
        let boundary: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert!((boundary - 1.0).abs() < 1e-12);
    }
}

#[test]
fn self_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = scatterlab(&["check"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn usage_and_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(scatterlab(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(scatterlab(&["frobnicate"], dir.path()).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(scatterlab(&["forward", missing.to_str().unwrap()], dir.path()).status.code(), Some(1));
    assert_eq!(scatterlab(&["example1", "--a2", "0.5"], dir.path()).status.code(), Some(1));
}
