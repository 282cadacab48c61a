use std::fs;
use std::path::Path;

use r3bp_diffusion::cli::{self, EXIT_FAIL, EXIT_INCOMPLETE, EXIT_PASS, EXIT_USAGE};
use r3bp_diffusion::dynamics::{collinear_points, SystemParams};
use r3bp_diffusion::manifolds::read_homoclinic_csv;
use r3bp_diffusion::melnikov::read_samples_csv;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["r3bp-diffusion".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(["--out-dir".to_string(), dir.display().to_string()]);
    cli::run(argv)
}

const SMALL: [&str; 2] = ["--nodes", "3"];

fn pipeline(dir: &Path, certify: &[&str]) -> i32 {
    assert_eq!(run(dir, &[&["scan-family"][..], &SMALL].concat()), EXIT_PASS);
    assert_eq!(run(dir, &[&["homoclinics"][..], &SMALL].concat()), EXIT_PASS);
    run(dir, &[&["certify", "--angles", "16"][..], &SMALL, certify].concat())
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn usage_errors() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["scan-family", "--interval", "-0.94:-0.96"]), EXIT_USAGE);
    assert_eq!(run(d.path(), &["scan-family", "--interval", "nonsense"]), EXIT_USAGE);
    assert_eq!(run(d.path(), &["scan-family", "--nodes", "0"]), EXIT_USAGE);
    assert_eq!(run(d.path(), &["homoclinics", "--branch", "3"]), EXIT_USAGE);
    assert_eq!(run(d.path(), &["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(d.path(), &[]), EXIT_USAGE);
    assert_eq!(run(d.path(), &["--help"]), EXIT_PASS);
}

#[test]
fn missing_and_stale_caches() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["homoclinics"]), EXIT_INCOMPLETE);
    assert_eq!(run(d.path(), &["certify"]), EXIT_INCOMPLETE);
    assert_eq!(run(d.path(), &["scan-family", "--nodes", "2"]), EXIT_PASS);
    assert_eq!(run(d.path(), &["homoclinics", "--nodes", "3"]), EXIT_INCOMPLETE);
    assert_eq!(run(d.path(), &["homoclinics", "--nodes", "2", "--mu", "0.001"]), EXIT_INCOMPLETE);
    assert_eq!(run(d.path(), &["homoclinics", "--nodes", "2"]), EXIT_PASS);
    assert_eq!(run(d.path(), &["plots", "--melnikov", "--nodes", "2"]), EXIT_INCOMPLETE);
}

#[test]
fn full_pipeline_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let code = pipeline(a.path(), &[]);
    assert!(code == EXIT_PASS || code == EXIT_FAIL, "exit {code}");
    assert_eq!(pipeline(b.path(), &["--tau", "0"]), code);
    for f in ["family.csv", "homoclinics.csv", "melnikov.csv", "certificate.json", "melnikov-node1.dat"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }

    let cert: serde_json::Value = serde_json::from_str(&read(a.path(), "certificate.json")).unwrap();
    assert_eq!(cert["schema"], 1);
    assert_eq!(cert["certificate"]["pass"].as_bool(), Some(code == EXIT_PASS));
    assert_eq!(cert["certificate"]["nodes"].as_array().unwrap().len(), 3 * 16);

    let samples = read_samples_csv(fs::File::open(a.path().join("melnikov.csv")).unwrap()).unwrap();
    assert_eq!(samples.len(), 3 * 4 * 16);
    assert!(samples.iter().all(|s| s.accepted()));

    // a different phase invalidates the cached samples
    assert_eq!(run(a.path(), &[&["plots", "--melnikov", "--angles", "16", "--tau", "1"][..], &SMALL].concat()), EXIT_INCOMPLETE);
    assert_eq!(run(a.path(), &[&["plots", "--melnikov", "--angles", "16"][..], &SMALL].concat()), EXIT_PASS);
}

#[test]
fn huge_margin_floor_fails_every_node() {
    let d = TempDir::new().unwrap();
    assert_eq!(pipeline(d.path(), &["--margin-floor", "1e9"]), EXIT_FAIL);
    let cert: serde_json::Value = serde_json::from_str(&read(d.path(), "certificate.json")).unwrap();
    let nodes = cert["certificate"]["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 3 * 16);
    assert!(nodes.iter().all(|n| n["positive"].is_null() && n["negative"].is_null()));
}

#[test]
fn branch_filter() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["scan-family", "--nodes", "1"]), EXIT_PASS);
    assert_eq!(run(d.path(), &["homoclinics", "--nodes", "1", "--branch", "2"]), EXIT_PASS);
    let rows = read_homoclinic_csv(fs::File::open(d.path().join("homoclinics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].branch, 2);
    // certify needs both branches
    assert_eq!(run(d.path(), &["certify", "--nodes", "1", "--angles", "8"]), EXIT_INCOMPLETE);
}

#[test]
fn homoclinic_rows_at_the_reference_orbit() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["scan-family", "--nodes", "1"]), EXIT_PASS);
    assert_eq!(run(d.path(), &["homoclinics", "--nodes", "1"]), EXIT_PASS);
    let rows = read_homoclinic_csv(fs::File::open(d.path().join("homoclinics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    let golden = [(0.62075535570, 1.38203432946, 1.45154062472), (0.65145811176, 1.33441338928, -0.25278633104)];
    for (r, (x, py, omega)) in rows.iter().zip(golden) {
        assert!(r.is_ok(), "{}", r.status);
        assert!((r.x_star + 0.95).abs() < 1e-15);
        assert!((r.x - x).abs() < 1e-6 && (r.py - py).abs() < 1e-6, "{} {}", r.x, r.py);
        assert!(r.y.abs() < 1e-12 && r.px.abs() < 1e-12);
        assert!((r.omega - omega).abs() < 1e-5, "{}", r.omega);
        assert!(r.transversality_margin > 0.0);
    }
}

#[test]
fn empty_plot_selection_writes_nothing() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["plots"]), EXIT_PASS);
    assert_eq!(fs::read_dir(d.path()).unwrap().count(), 0);
}

#[test]
fn hill_region_has_both_necks_open() {
    let d = TempDir::new().unwrap();
    assert_eq!(run(d.path(), &["scan-family", "--nodes", "2"]), EXIT_PASS);
    assert_eq!(run(d.path(), &["plots", "--nodes", "2", "--hill", "--family", "--periods"]), EXIT_PASS);
    let cells: Vec<(f64, f64, bool)> = read(d.path(), "hill-region.dat")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let v: Vec<&str> = l.split_whitespace().collect();
            (v[0].parse().unwrap(), v[1].parse().unwrap(), v[2] == "1")
        })
        .collect();
    assert_eq!(cells.len(), 301 * 301);
    let at = |x: f64, y: f64| {
        cells
            .iter()
            .min_by(|a, b| ((a.0 - x).hypot(a.1 - y)).total_cmp(&(b.0 - x).hypot(b.1 - y)))
            .unwrap()
            .2
    };
    let l = collinear_points(&SystemParams::default()).unwrap();
    let necks: Vec<f64> = l.iter().copied().filter(|x| (x + 1.0).abs() < 0.2).collect();
    assert_eq!(necks.len(), 2);
    for x in necks {
        assert!(at(x, 0.0), "neck at {x} closed");
    }
    assert!(!at(0.0, 1.0) && !at(0.0, -1.0));
    assert!(at(0.0, 0.1) && at(-1.3, 0.0));

    let blocks = read(d.path(), "family-orbits.dat").split("\n\n\n").filter(|b| b.contains("x*")).count();
    assert_eq!(blocks, 2);
    let periods = read(d.path(), "period-energy.dat");
    let t: Vec<f64> = periods
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(t.len(), 2);
    assert!(t[0] > t[1], "period decreases along the interval");
}
