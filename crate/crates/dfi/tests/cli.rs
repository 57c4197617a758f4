//! End-to-end checks of the command-line interface: flag validation and
//! exit codes, column contracts, figure presets, provenance sidecars, and
//! byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn dfi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfi"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

struct Csv {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_csv(path: &Path) -> Csv {
    let text = std::fs::read_to_string(path).expect("output file exists");
    let mut lines = text.lines();
    let columns: Vec<String> = lines
        .next()
        .expect("header row")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    Csv { columns, rows }
}

impl Csv {
    fn col(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("column {name} present"))
    }

    fn row_at(&self, lam: f64, t: f64) -> &[f64] {
        let (il, it) = (self.col("lam"), self.col("t"));
        self.rows
            .iter()
            .find(|r| (r[il] - lam).abs() < 1e-12 && (r[it] - t).abs() < 1e-9)
            .unwrap_or_else(|| panic!("row λ={lam}, t={t} present"))
            .as_slice()
    }
}

#[test]
fn posterior_emits_wiener_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &[
            "posterior", "--lam", "0", "--t-obs", "1", "--datum", "1", "--t-max", "3", "--n",
            "301", "--out", "post.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read_csv(&dir.path().join("post.csv"));
    assert_eq!(
        csv.columns,
        ["lam", "t", "prior_var", "post_mean", "post_var", "rel_uncert"]
    );
    assert_eq!(csv.rows.len(), 301);
    let row = csv.row_at(0.0, 0.5);
    assert!((row[csv.col("post_mean")] - 0.5).abs() < 1e-12);
    assert!((row[csv.col("post_var")] - 0.25).abs() < 1e-12);
    assert!((row[csv.col("prior_var")] - 0.5).abs() < 1e-12);
    assert!((row[csv.col("rel_uncert")] - 1.0).abs() < 1e-12);
}

#[test]
fn posterior_blocks_ordered_by_lambda_then_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &["posterior", "--lam", "-1", "0", "1", "--n", "11", "--out", "p.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("p.csv"));
    assert_eq!(csv.rows.len(), 33);
    let (il, it) = (csv.col("lam"), csv.col("t"));
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in &csv.rows {
        let cur = (r[il], r[it]);
        assert!(cur > prev, "blocks out of order at {cur:?}");
        prev = cur;
    }
}

#[test]
fn posterior_zero_datum_gives_zero_mean() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &["posterior", "--lam", "0", "--datum", "0", "--n", "51", "--out", "z.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("z.csv"));
    let im = csv.col("post_mean");
    assert!(csv.rows.iter().all(|r| r[im] == 0.0));
}

#[test]
fn figure2_defaults_reproduce_corrected_midpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(&["figure2", "--out", "fig2.csv"], dir.path());
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("fig2.csv"));
    assert_eq!(
        csv.columns,
        [
            "lam",
            "t",
            "free_mean",
            "free_var",
            "corrected_mean",
            "corrected_var",
            "bosonic_only_mean"
        ]
    );
    let row = csv.row_at(0.0, 0.5);
    // λ = 0: only the fermion loop corrects the mean
    assert!((row[csv.col("corrected_mean")] - 0.3875).abs() < 1e-8);
    assert!((row[csv.col("bosonic_only_mean")] - 0.5).abs() < 1e-8);
    assert!((row[csv.col("corrected_var")] - 0.25).abs() < 1e-12);
    // λ = 1: corrected mean below the free mean inside the window
    for t in [0.25, 0.5, 0.75] {
        let row = csv.row_at(1.0, t);
        assert!(row[csv.col("corrected_mean")] < row[csv.col("free_mean")]);
    }
}

#[test]
fn figure1_defaults_cover_the_lyapunov_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(&["figure1", "--out", "fig1.csv"], dir.path());
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("fig1.csv"));
    assert_eq!(csv.rows.len(), 7 * 301);
    // ordering of the uncertainty in λ past the observation
    let iv = csv.col("post_var");
    let mut last = f64::NEG_INFINITY;
    for lam in [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
        let v = csv.row_at(lam, 2.0)[iv];
        assert!(v > last, "λ-ordering broken at λ={lam}");
        last = v;
    }
}

#[test]
fn correct_with_zero_coupling_equals_free_theory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &["correct", "--lam", "1", "--mu", "0", "--n", "41", "--out", "c.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("c.csv"));
    let (fm, cm) = (csv.col("free_mean"), csv.col("corrected_mean"));
    let (fv, cv) = (csv.col("free_var"), csv.col("corrected_var"));
    for r in &csv.rows {
        assert!((r[fm] - r[cm]).abs() < 1e-10);
        assert!((r[fv] - r[cv]).abs() < 1e-10);
    }
}

#[test]
fn oracle_writes_sidecar_and_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "oracle", "--lam", "0", "--mu", "0", "--samples", "30000", "--steps", "50", "--seed",
        "123", "--out", "o.csv",
    ];
    assert!(dfi(&args, dir.path()).status.success());
    let first = std::fs::read(dir.path().join("o.csv")).unwrap();
    let sidecar = std::fs::read_to_string(dir.path().join("o.provenance.json")).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&sidecar).unwrap();
    assert_eq!(meta["tool"], "dfi");
    assert_eq!(meta["config"]["seed"], 123);
    let stats = &meta["oracle"][0];
    assert_eq!(stats["seed"], 123);
    assert!(stats["acceptance_rate"].as_f64().unwrap() > 0.1);
    assert!(stats["n_effective"].as_f64().unwrap() > 100.0);

    assert!(dfi(&args, dir.path()).status.success());
    let second = std::fs::read(dir.path().join("o.csv")).unwrap();
    assert_eq!(first, second, "same seed must give identical bytes");

    // a different seed must actually change the data
    let args2 = [
        "oracle", "--lam", "0", "--mu", "0", "--samples", "30000", "--steps", "50", "--seed",
        "124", "--out", "o2.csv",
    ];
    assert!(dfi(&args2, dir.path()).status.success());
    let third = std::fs::read(dir.path().join("o2.csv")).unwrap();
    assert_ne!(first, third);
}

#[test]
fn oracle_linear_run_has_small_z_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &[
            "oracle", "--lam", "0", "--mu", "0", "--samples", "120000", "--steps", "50",
            "--seed", "5", "--out", "z.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("z.csv"));
    let iz = csv.col("z_score");
    assert!(csv.rows.iter().all(|r| r[iz].abs() <= 4.0));
}

#[test]
fn oracle_without_determinant_misses_nonlinear_theory() {
    // control experiment: dropping the determinant leaves the sampler on
    // the wrong distribution, visible against the corrected theory curve
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &[
            "oracle",
            "--lam",
            "0",
            "--mu",
            "0.3",
            "--samples",
            "200000",
            "--steps",
            "50",
            "--seed",
            "17",
            "--no-determinant",
            "--out",
            "nd.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = read_csv(&dir.path().join("nd.csv"));
    let row = csv.row_at(0.0, 0.5);
    assert!(
        row[csv.col("z_score")].abs() > 3.0,
        "z at mid-grid: {}",
        row[csv.col("z_score")]
    );
}

#[test]
fn json_format_emits_columns_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &["posterior", "--lam", "0", "--n", "11", "--format", "json", "--out", "p.json"],
        dir.path(),
    );
    assert!(out.status.success());
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("p.json")).unwrap())
            .unwrap();
    assert_eq!(value["columns"][1], "t");
    assert_eq!(value["rows"].as_array().unwrap().len(), 11);
}

#[test]
fn invalid_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["posterior", "--mu", "0.3"],
        vec!["posterior", "--t-obs", "-1"],
        vec!["posterior", "--lam", "0", "--n", "1"],
        vec!["figure2", "--t-max", "2"],
        vec!["oracle", "--steps", "10"],
        vec!["oracle", "--samples", "0"],
        vec!["oracle", "--clamp", "0.5"],
        vec!["posterior", "--datum", "nan"],
        vec!["posterior", "--no-such-flag"],
    ];
    for args in cases {
        let out = dfi(&args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(2),
            "args {args:?} gave {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn numeric_overflow_exits_3() {
    // the prior variance overflows to infinity at λ·t ≈ 400
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &["posterior", "--lam", "400", "--t-max", "3", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn diverged_chain_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dfi(
        &[
            "oracle",
            "--lam",
            "0",
            "--mu",
            "0",
            "--samples",
            "2000",
            "--steps",
            "50",
            "--burn-in",
            "0",
            "--proposal-scale",
            "1e9",
            "--clamp",
            "1e12",
            "--out",
            "d.csv",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dfi(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(dfi(&["oracle", "--help"], dir.path()).status.code(), Some(0));
}
