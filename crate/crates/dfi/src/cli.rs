//! Batch command-line front end.
//!
//! Five subcommands evaluate the library over parameter sweeps and write
//! machine-readable files (no plotting, no interaction):
//!
//! * `posterior` — closed-form linear posterior for each requested λ.
//! * `correct`   — free vs first-order-corrected posterior on [0, t_o].
//! * `oracle`    — MCMC path posterior against the matching theory curve.
//! * `figure1`   — `posterior` preset: λ ∈ {−3,…,3}, t ∈ [0,3], 301 points.
//! * `figure2`   — `correct` preset: λ ∈ {−1,0,1}, μ = 0.3.
//!
//! Output is CSV (header row, `.` decimal separator, 17-significant-digit
//! floats) or JSON, plus a JSON provenance sidecar carrying every parameter,
//! the seed, and the tool version, so any file can be reproduced
//! byte-for-byte. Exit codes: 0 success, 2 invalid flags, 3 numeric failure,
//! 4 diverged chain.

use crate::mode_model::{
    equal_time_uncertainty, posterior_mean_mode, prior_kernel, relative_uncertainty, ModeParams,
    ModeModelError, TimeGrid,
};
use crate::path_oracle::{
    ensemble_moments, mcmc_sample_paths, OracleConfig, PathOracleError,
};
use crate::perturbation::{
    cov_correction_general, diagram_value, mean_correction_general, DiagramId, PerturbationError,
    QuadratureSpec,
};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
    Diverged(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) | CliError::Diverged(m) | CliError::Io(m) => m,
        }
    }
}

impl From<PathOracleError> for CliError {
    fn from(e: PathOracleError) -> Self {
        match e {
            PathOracleError::ChainDiverged(_) => CliError::Diverged(e.to_string()),
            PathOracleError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<PerturbationError> for CliError {
    fn from(e: PerturbationError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<ModeModelError> for CliError {
    fn from(e: ModeModelError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "dfi",
    version,
    about = "Posterior statistics of a stochastically driven dynamical mode"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form linear posterior sweep (requires μ = 0)
    Posterior(SweepArgs),
    /// Free vs first-order-corrected posterior on [0, t_o]
    Correct(SweepArgs),
    /// MCMC path-posterior run compared against the theory curve
    Oracle(OracleArgs),
    /// `posterior` with figure defaults: λ ∈ {−3,…,3}, t ∈ [0,3], n = 301
    Figure1(SweepArgs),
    /// `correct` with figure defaults: λ ∈ {−1,0,1}, μ = 0.3
    Figure2(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct SweepArgs {
    /// Lyapunov exponents, one output block per value
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub lam: Option<Vec<f64>>,
    /// Quadratic coupling μ
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Observation time t_o
    #[arg(long = "t-obs")]
    pub t_obs: Option<f64>,
    /// Observed value d
    #[arg(long, allow_negative_numbers = true)]
    pub datum: Option<f64>,
    /// Upper end of the output time grid
    #[arg(long = "t-max")]
    pub t_max: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output path (provenance sidecar is written next to it)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, num_args = 1.., allow_negative_numbers = true)]
    pub lam: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long = "t-obs")]
    pub t_obs: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub datum: Option<f64>,
    /// Recorded MCMC sweeps
    #[arg(long)]
    pub samples: Option<usize>,
    /// Time steps of the discretized path (≥ 50)
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop the functional-determinant term from the target density
    #[arg(long = "no-determinant")]
    pub no_determinant: bool,
    /// Burn-in sweeps (proposal tuning happens here)
    #[arg(long = "burn-in")]
    pub burn_in: Option<usize>,
    /// Initial proposal scale in units of sqrt(Δt)
    #[arg(long = "proposal-scale")]
    pub proposal_scale: Option<f64>,
    /// Rejection bound on |ε|
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved run configuration; serialized verbatim into the
/// provenance sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub lam: Vec<f64>,
    pub mu: f64,
    pub t_obs: f64,
    pub datum: f64,
    pub t_max: f64,
    pub n: usize,
    pub samples: usize,
    pub steps: usize,
    pub seed: u64,
    pub include_determinant: bool,
    pub burn_in: usize,
    pub proposal_scale: f64,
    pub clamp: f64,
    pub format: OutputFormat,
    pub out: PathBuf,
}

fn require_finite(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("--{name} must be finite")))
    }
}

impl RunConfig {
    fn from_sweep(sub: &str, a: &SweepArgs) -> Result<Self, CliError> {
        let figure1 = sub == "figure1";
        let figure2 = sub == "figure2";
        let corrected = sub == "correct" || figure2;
        let t_obs = require_finite("t-obs", a.t_obs.unwrap_or(1.0))?;
        if t_obs <= 0.0 {
            return Err(CliError::Usage("--t-obs must be positive".into()));
        }
        let default_lam = if figure1 {
            vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
        } else if figure2 {
            vec![-1.0, 0.0, 1.0]
        } else {
            vec![0.0]
        };
        let lam = a.lam.clone().unwrap_or(default_lam);
        if lam.is_empty() {
            return Err(CliError::Usage("--lam needs at least one value".into()));
        }
        for &l in &lam {
            require_finite("lam", l)?;
        }
        let mu = require_finite("mu", a.mu.unwrap_or(if corrected { 0.3 } else { 0.0 }))?;
        if !corrected && mu != 0.0 {
            return Err(CliError::Usage(format!(
                "`{sub}` evaluates the linear theory; --mu must be 0"
            )));
        }
        let datum = require_finite("datum", a.datum.unwrap_or(1.0))?;
        let t_max = require_finite(
            "t-max",
            a.t_max.unwrap_or(if corrected { t_obs } else { 3.0 }),
        )?;
        if t_max <= 0.0 {
            return Err(CliError::Usage("--t-max must be positive".into()));
        }
        if corrected && t_max > t_obs + 1e-12 {
            return Err(CliError::Usage(
                "corrected sweeps are defined on [0, t_obs]: --t-max must not exceed --t-obs"
                    .into(),
            ));
        }
        let n = a.n.unwrap_or(if corrected { 101 } else { 301 });
        if n < 2 {
            return Err(CliError::Usage("--n must be at least 2".into()));
        }
        Ok(Self {
            subcommand: sub.into(),
            lam,
            mu,
            t_obs,
            datum,
            t_max,
            n,
            samples: 0,
            steps: 0,
            seed: 0,
            include_determinant: true,
            burn_in: 0,
            proposal_scale: 1.0,
            clamp: 10.0 * datum.abs().max(1.0),
            format: a.format.unwrap_or(OutputFormat::Csv),
            out: a
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{sub}.csv"))),
        })
    }

    fn from_oracle(a: &OracleArgs) -> Result<Self, CliError> {
        let t_obs = require_finite("t-obs", a.t_obs.unwrap_or(1.0))?;
        if t_obs <= 0.0 {
            return Err(CliError::Usage("--t-obs must be positive".into()));
        }
        let lam = a.lam.clone().unwrap_or_else(|| vec![0.0]);
        if lam.is_empty() {
            return Err(CliError::Usage("--lam needs at least one value".into()));
        }
        for &l in &lam {
            require_finite("lam", l)?;
        }
        let mu = require_finite("mu", a.mu.unwrap_or(0.3))?;
        let datum = require_finite("datum", a.datum.unwrap_or(1.0))?;
        let samples = a.samples.unwrap_or(400_000);
        if samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        let steps = a.steps.unwrap_or(200);
        if steps < 50 {
            return Err(CliError::Usage("--steps must be at least 50".into()));
        }
        let proposal_scale = require_finite("proposal-scale", a.proposal_scale.unwrap_or(1.0))?;
        if proposal_scale <= 0.0 {
            return Err(CliError::Usage("--proposal-scale must be positive".into()));
        }
        let clamp = require_finite("clamp", a.clamp.unwrap_or(10.0 * datum.abs().max(1.0)))?;
        if clamp <= datum.abs() {
            return Err(CliError::Usage("--clamp must exceed |datum|".into()));
        }
        Ok(Self {
            subcommand: "oracle".into(),
            lam,
            mu,
            t_obs,
            datum,
            t_max: t_obs,
            n: steps + 1,
            samples,
            steps,
            seed: a.seed.unwrap_or(42),
            include_determinant: !a.no_determinant,
            burn_in: a.burn_in.unwrap_or(20_000),
            proposal_scale,
            clamp,
            format: a.format.unwrap_or(OutputFormat::Csv),
            out: a
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("oracle.csv")),
        })
    }
}

/// 17-significant-digit float rendering, stable across runs.
fn fmt17(x: f64) -> String {
    if x == 0.0 {
        // normalize -0.0
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    let mut line = String::new();
                    for (i, v) in row.iter().enumerate() {
                        if i > 0 {
                            line.push(',');
                        }
                        let _ = write!(line, "{}", fmt17(*v));
                    }
                    s.push_str(&line);
                    s.push('\n');
                }
                s
            }
            OutputFormat::Json => {
                let value = serde_json::json!({
                    "columns": self.columns,
                    "rows": self.rows,
                });
                let mut s = serde_json::to_string_pretty(&value).expect("table serializes");
                s.push('\n');
                s
            }
        }
    }
}

#[derive(Serialize)]
struct OracleBlockStats {
    lam: f64,
    seed: u64,
    acceptance_rate: f64,
    n_effective: f64,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    oracle: Option<Vec<OracleBlockStats>>,
}

fn write_outputs(
    cfg: &RunConfig,
    table: &Table,
    oracle: Option<Vec<OracleBlockStats>>,
) -> Result<(), CliError> {
    std::fs::write(&cfg.out, table.render(cfg.format))?;
    let provenance = Provenance {
        tool: "dfi",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        oracle,
    };
    let mut sidecar = serde_json::to_string_pretty(&provenance).expect("provenance serializes");
    sidecar.push('\n');
    std::fs::write(provenance_path(&cfg.out), sidecar)?;
    Ok(())
}

/// `figure2.csv` → `figure2.provenance.json`.
pub fn provenance_path(out: &Path) -> PathBuf {
    out.with_extension("provenance.json")
}

/// Linear posterior sweep: `lam, t, prior_var, post_mean, post_var,
/// rel_uncert`, blocks ordered by λ then t.
pub fn run_posterior(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = TimeGrid::new(0.0, cfg.t_max, cfg.n);
    let mut rows = Vec::with_capacity(cfg.lam.len() * cfg.n);
    for &lam in &cfg.lam {
        let p = ModeParams::new(lam, 0.0, cfg.t_obs, cfg.datum);
        for &t in grid.points() {
            let prior_var = prior_kernel(lam, t, t);
            let post_mean = posterior_mean_mode(&p, t);
            let post_var = equal_time_uncertainty(&p, t);
            let rel = relative_uncertainty(&p, t).unwrap_or(f64::NAN);
            for v in [prior_var, post_mean, post_var] {
                if !v.is_finite() {
                    return Err(CliError::Numeric(format!(
                        "non-finite posterior value at λ={lam}, t={t}"
                    )));
                }
            }
            rows.push(vec![lam, t, prior_var, post_mean, post_var, rel]);
        }
    }
    let table = Table {
        columns: vec!["lam", "t", "prior_var", "post_mean", "post_var", "rel_uncert"],
        rows,
    };
    write_outputs(cfg, &table, None)
}

/// Corrected-posterior sweep: `lam, t, free_mean, free_var, corrected_mean,
/// corrected_var, bosonic_only_mean`; the last column drops the
/// fermion-loop diagram from the correction.
pub fn run_correct(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = TimeGrid::new(0.0, cfg.t_max, cfg.n);
    let quad = QuadratureSpec::simpson(2048);
    let mut rows = Vec::with_capacity(cfg.lam.len() * cfg.n);
    for &lam in &cfg.lam {
        let p = ModeParams::new(lam, cfg.mu, cfg.t_obs, cfg.datum);
        let free = p.linearized();
        for &t in grid.points() {
            let free_mean = posterior_mean_mode(&free, t);
            let free_var = equal_time_uncertainty(&free, t);
            let correction = mean_correction_general(&p, t, &quad)?;
            let fermion = diagram_value(DiagramId::MeanFermionLoop, &p, t, None, &quad)?;
            let corrected_mean = free_mean + correction;
            let corrected_var = free_var + cov_correction_general(&p, t, t, &quad)?;
            let bosonic_only_mean = free_mean + (correction - fermion);
            for v in [free_mean, free_var, corrected_mean, corrected_var, bosonic_only_mean] {
                if !v.is_finite() {
                    return Err(CliError::Numeric(format!(
                        "non-finite corrected value at λ={lam}, t={t}"
                    )));
                }
            }
            rows.push(vec![
                lam,
                t,
                free_mean,
                free_var,
                corrected_mean,
                corrected_var,
                bosonic_only_mean,
            ]);
        }
    }
    let table = Table {
        columns: vec![
            "lam",
            "t",
            "free_mean",
            "free_var",
            "corrected_mean",
            "corrected_var",
            "bosonic_only_mean",
        ],
        rows,
    };
    write_outputs(cfg, &table, None)
}

/// MCMC run vs theory: `lam, t, mcmc_mean, mcmc_stderr, mcmc_var,
/// theory_mean, z_score`, plus a JSON sidecar with seed, acceptance rate and
/// effective sample size per λ block.
pub fn run_oracle(cfg: &RunConfig) -> Result<(), CliError> {
    let quad = QuadratureSpec::simpson(2048);
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for &lam in &cfg.lam {
        let p = ModeParams::new(lam, cfg.mu, cfg.t_obs, cfg.datum);
        let ocfg = OracleConfig {
            n_steps: cfg.steps,
            n_samples: cfg.samples,
            burn_in: cfg.burn_in,
            seed: cfg.seed,
            include_determinant: cfg.include_determinant,
            proposal_scale: cfg.proposal_scale,
            clamp: cfg.clamp,
        };
        let ens = mcmc_sample_paths(&p, &ocfg)?;
        let free = p.linearized();
        for &t in ens.grid.points() {
            let (mean, var, stderr) = ensemble_moments(&ens, t)?;
            let theory = if cfg.mu == 0.0 {
                posterior_mean_mode(&p, t)
            } else {
                posterior_mean_mode(&free, t) + mean_correction_general(&p, t, &quad)?
            };
            let z = if stderr > 0.0 {
                (mean - theory) / stderr
            } else {
                0.0
            };
            rows.push(vec![lam, t, mean, stderr, var, theory, z]);
        }
        stats.push(OracleBlockStats {
            lam,
            seed: cfg.seed,
            acceptance_rate: ens.acceptance_rate,
            n_effective: ens.n_effective,
        });
    }
    let table = Table {
        columns: vec![
            "lam",
            "t",
            "mcmc_mean",
            "mcmc_stderr",
            "mcmc_var",
            "theory_mean",
            "z_score",
        ],
        rows,
    };
    write_outputs(cfg, &table, Some(stats))
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Posterior(a) => run_posterior(&RunConfig::from_sweep("posterior", a)?),
        Command::Figure1(a) => run_posterior(&RunConfig::from_sweep("figure1", a)?),
        Command::Correct(a) => run_correct(&RunConfig::from_sweep("correct", a)?),
        Command::Figure2(a) => run_correct(&RunConfig::from_sweep("figure2", a)?),
        Command::Oracle(a) => run_oracle(&RunConfig::from_oracle(a)?),
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_is_stable_and_17_digits() {
        assert_eq!(fmt17(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt17(0.0), "0.0000000000000000e0");
        assert_eq!(fmt17(-0.0), "0.0000000000000000e0");
        assert_eq!(fmt17(f64::NAN), "NaN");
        // 17 significant digits round-trip f64 exactly
        let x = std::f64::consts::PI;
        assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn sweep_defaults_and_validation() {
        let cfg = RunConfig::from_sweep("figure1", &SweepArgs::default()).unwrap();
        assert_eq!(cfg.lam.len(), 7);
        assert_eq!(cfg.n, 301);
        assert_eq!(cfg.t_max, 3.0);
        assert_eq!(cfg.mu, 0.0);

        let cfg = RunConfig::from_sweep("figure2", &SweepArgs::default()).unwrap();
        assert_eq!(cfg.lam, vec![-1.0, 0.0, 1.0]);
        assert_eq!(cfg.mu, 0.3);
        assert_eq!(cfg.t_max, 1.0);

        let bad = SweepArgs {
            mu: Some(0.2),
            ..Default::default()
        };
        assert!(matches!(
            RunConfig::from_sweep("posterior", &bad),
            Err(CliError::Usage(_))
        ));

        let bad = SweepArgs {
            t_max: Some(2.0),
            ..Default::default()
        };
        assert!(matches!(
            RunConfig::from_sweep("figure2", &bad),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn provenance_path_replaces_extension() {
        assert_eq!(
            provenance_path(Path::new("out/figure2.csv")),
            PathBuf::from("out/figure2.provenance.json")
        );
    }
}
