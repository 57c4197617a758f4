//! Brute-force posterior over discretized trajectories.
//!
//! Trajectories ε on [0, t_o] are pinned at both ends (ε(0) = 0, ε(t_o) = d,
//! both measurements noiseless) and weighted by exp(−H) with the midpoint
//! (Stratonovich) discretization of the information Hamiltonian
//!
//! ```text
//! H(ε) = Σ_k Δt·½·( (ε_{k+1}−ε_k)/Δt − λ ε̄_k − ½μ ε̄_k² )²
//!      + Σ_k Δt·½·( λ + μ ε̄_k ),          ε̄_k = (ε_k + ε_{k+1})/2,
//! ```
//!
//! where the second sum — present when the functional determinant is
//! switched on — is −ln‖δG/δε‖: the midpoint discretization of the causal
//! operator ∂ₜ − λ − με has ln-determinant −½∫(λ + με̄)dt, the equal-time
//! weight ½ being the same θ(0) = ½ that closes the fermionic loop. With the
//! determinant off, the sampler targets the bare Gaussian-weighted residual,
//! which is not the correct posterior for μ ≠ 0.
//!
//! A Metropolis chain over the interior nodes mixes per-node Gaussian moves
//! with occasional global Brownian-bridge redraws; everything is driven by a
//! counter-based generator, so a fixed seed reproduces ensembles
//! bit-identically.

use crate::gaussian_core::{self, CovOperator, GaussianCoreError, LinearResponse};
use crate::mode_model::{prior_kernel, ModeParams, MomentSource, PosteriorMoments, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathOracleError {
    #[error("non-finite value while evaluating path information")]
    NonFiniteValue,
    #[error("chain diverged: acceptance rate {0:.4} after proposal tuning")]
    ChainDiverged(f64),
    #[error("time {0} is not a node of the oracle grid")]
    NotAGridNode(f64),
    #[error("invalid oracle configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gaussian(#[from] GaussianCoreError),
}

pub type Result<T> = std::result::Result<T, PathOracleError>;

/// One trajectory on a uniform grid over [0, t_o], pinned at ε(0) = 0.
#[derive(Debug, Clone)]
pub struct DiscretePath {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl DiscretePath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "one value per grid node");
        assert_eq!(values[0], 0.0, "paths start pinned at 0");
        Self { grid, values }
    }

    /// The straight line from (0,0) to (t_o, datum).
    pub fn line(grid: TimeGrid, datum: f64) -> Self {
        let t1 = grid.t1();
        let values = grid.points().iter().map(|&t| t / t1 * datum).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sampler configuration; `seed` fixes the ensemble bit-for-bit.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Number of time steps (grid has n_steps + 1 nodes). At least 50.
    pub n_steps: usize,
    /// Recorded post-burn-in sweeps.
    pub n_samples: usize,
    /// Sweeps spent tuning the proposal scale before recording.
    pub burn_in: usize,
    pub seed: u64,
    /// Include the functional-determinant term of the path density.
    pub include_determinant: bool,
    /// Initial per-node proposal scale in units of sqrt(Δt); auto-tuned
    /// during burn-in towards 30–50% acceptance.
    pub proposal_scale: f64,
    /// Proposals with |ε| beyond this are rejected outright, excluding the
    /// finite-time blow-up region from the sampled ensemble.
    pub clamp: f64,
}

impl OracleConfig {
    /// Defaults for a mode with datum `d`: 200 steps, clamp 10·max(1,|d|).
    pub fn default_for(p: &ModeParams, seed: u64) -> Self {
        Self {
            n_steps: 200,
            n_samples: 400_000,
            burn_in: 20_000,
            seed,
            include_determinant: true,
            proposal_scale: 1.0,
            clamp: 10.0 * p.datum.abs().max(1.0),
        }
    }

    pub fn validate(&self, p: &ModeParams) -> Result<()> {
        if self.n_steps < 50 {
            return Err(PathOracleError::InvalidConfig(format!(
                "need at least 50 steps, got {}",
                self.n_steps
            )));
        }
        if self.n_samples == 0 {
            return Err(PathOracleError::InvalidConfig("n_samples must be positive".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(PathOracleError::InvalidConfig("proposal scale must be positive".into()));
        }
        if !self.clamp.is_finite() || self.clamp <= p.datum.abs() {
            return Err(PathOracleError::InvalidConfig(format!(
                "clamp {} must exceed |datum| = {}",
                self.clamp,
                p.datum.abs()
            )));
        }
        Ok(())
    }
}

/// Accumulated ensemble statistics of one or more chains.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub config: OracleConfig,
    pub grid: TimeGrid,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Standard error of the mean per node (0 at the pinned endpoints).
    pub stderr_mean: DVector<f64>,
    pub acceptance_rate: f64,
    /// Smallest effective sample size over the interior nodes.
    pub n_effective: f64,
}

/// Energy of one time link, the Δt-weighted midpoint residual plus the
/// determinant weight when `det` is 1.
#[inline]
fn link_energy(a: f64, b: f64, dt: f64, lam: f64, mu: f64, det: f64) -> f64 {
    let ebar = 0.5 * (a + b);
    let xi = (b - a) / dt - lam * ebar - 0.5 * mu * ebar * ebar;
    0.5 * xi * xi * dt + det * 0.5 * dt * (lam + mu * ebar)
}

fn total_energy(values: &[f64], dt: f64, lam: f64, mu: f64, det: f64) -> f64 {
    values
        .windows(2)
        .map(|w| link_energy(w[0], w[1], dt, lam, mu, det))
        .sum()
}

/// Information (negative log density, up to a constant) of a discrete path.
///
/// The determinant term adds ½ Σ_k Δt (λ + μ ε̄_k) — the negative
/// log-determinant of the midpoint-discretized δG/δε — and is what makes the
/// target the actual posterior rather than the bare residual weight.
pub fn path_information(
    path: &DiscretePath,
    p: &ModeParams,
    include_determinant: bool,
) -> Result<f64> {
    let last = *path.values().last().unwrap();
    assert_eq!(last, p.datum, "path must end on the measured datum");
    let det = if include_determinant { 1.0 } else { 0.0 };
    let h = total_energy(path.values(), path.grid().dt(), p.lam, p.mu, det);
    if h.is_finite() {
        Ok(h)
    } else {
        Err(PathOracleError::NonFiniteValue)
    }
}

/// Exact finite-dimensional Gaussian posterior of the linear (μ = 0) mode on
/// `grid`: prior covariance from the kernel f_λ, point response at t_o,
/// noiseless measurement.
pub fn exact_gaussian_posterior(p: &ModeParams, grid: &TimeGrid) -> Result<PosteriorMoments> {
    assert_eq!(p.mu, 0.0, "exact posterior exists for the linear mode only");
    let idx = grid
        .index_of(p.t_obs)
        .ok_or(PathOracleError::NotAGridNode(p.t_obs))?;
    let phi = CovOperator::from_kernel(grid.points(), |a, b| prior_kernel(p.lam, a, b))?;
    let r = LinearResponse::point_evaluation(grid.len(), idx);
    let n = CovOperator::zeros(1);
    let d = DVector::from_vec(vec![p.datum]);
    let post = gaussian_core::posterior(&phi, &r, &n, &d)?;
    Ok(PosteriorMoments::new(
        grid.clone(),
        post.mean,
        post.cov.entries().clone(),
        MomentSource::ClosedForm,
        None,
    ))
}

const GLOBAL_MOVE_PROB: f64 = 0.1;
const TUNE_INTERVAL: usize = 100;
/// Batch length for the batch-means error estimate: correlations beyond
/// n_samples/50 sweeps never enter, and batches are capped at 1000 sweeps
/// (far above the chain's autocorrelation time) to keep the estimator of
/// the batch-mean variance itself well resolved.
const BATCH_WINDOW_DIVISOR: usize = 50;
const BATCH_LEN_CAP: usize = 1000;
const COV_STRIDE: usize = 5;

fn batch_len(n_samples: usize) -> usize {
    (n_samples / BATCH_WINDOW_DIVISOR).clamp(1, BATCH_LEN_CAP)
}

struct ChainStats {
    n: u64,
    sums: Vec<f64>,
    sumsq: Vec<f64>,
    /// Sums over the covariance subsample only, so the covariance estimate
    /// is an exact sample covariance (hence positive semidefinite).
    sums_cross: Vec<f64>,
    cross: DMatrix<f64>,
    n_cross: u64,
    /// Per-batch means, [batch][node]; see [`batch_len`].
    batch_means: Vec<Vec<f64>>,
    accepted: u64,
    proposed: u64,
}

fn run_chain(p: &ModeParams, cfg: &OracleConfig, seed: u64) -> Result<ChainStats> {
    let n = cfg.n_steps;
    let grid = TimeGrid::new(0.0, p.t_obs, n + 1);
    let dt = grid.dt();
    let pts = grid.points().to_vec();
    let det = if cfg.include_determinant { 1.0 } else { 0.0 };
    let (lam, mu) = (p.lam, p.mu);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut e: Vec<f64> = pts.iter().map(|&t| t / p.t_obs * p.datum).collect();
    e[n] = p.datum;
    let mut scale = cfg.proposal_scale;
    let sigma = |scale: f64| scale * dt.sqrt();

    let mut w_buf = vec![0.0f64; n + 1];
    let mut tune_acc = 0u64;
    let mut tune_prop = 0u64;
    let mut accepted = 0u64;
    let mut proposed = 0u64;

    let n_samples = cfg.n_samples;
    let batch_size = batch_len(n_samples);
    let n_batches = n_samples / batch_size;
    let mut stats = ChainStats {
        n: 0,
        sums: vec![0.0; n + 1],
        sumsq: vec![0.0; n + 1],
        sums_cross: vec![0.0; n + 1],
        cross: DMatrix::zeros(n + 1, n + 1),
        n_cross: 0,
        batch_means: Vec::new(),
        accepted: 0,
        proposed: 0,
    };
    let mut batch_acc = vec![0.0f64; n + 1];

    for sweep in 0..cfg.burn_in + n_samples {
        let recording = sweep >= cfg.burn_in;

        // global Brownian-bridge redraw: an independence proposal whose
        // density cancels the pure Brownian part of H
        if rng.random::<f64>() < GLOBAL_MOVE_PROB {
            let mut w = 0.0;
            w_buf[0] = 0.0;
            for wk in w_buf.iter_mut().skip(1) {
                let z: f64 = rng.sample(StandardNormal);
                w += z * dt.sqrt();
                *wk = w;
            }
            let u: f64 = rng.random();
            let w_end = w_buf[n];
            let mut y = vec![0.0f64; n + 1];
            let mut ok = true;
            for k in 0..=n {
                let frac = pts[k] / p.t_obs;
                y[k] = frac * p.datum + w_buf[k] - frac * w_end;
                if y[k].abs() > cfg.clamp {
                    ok = false;
                }
            }
            y[0] = 0.0;
            y[n] = p.datum;
            if recording {
                proposed += 1;
            } else {
                tune_prop += 1;
            }
            if ok {
                let brownian = |v: &[f64]| -> f64 {
                    v.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2) / dt).sum()
                };
                let res_new = total_energy(&y, dt, lam, mu, det) - brownian(&y);
                let res_old = total_energy(&e, dt, lam, mu, det) - brownian(&e);
                if res_new.is_finite() && u.ln() < res_old - res_new {
                    e.copy_from_slice(&y);
                    if recording {
                        accepted += 1;
                    } else {
                        tune_acc += 1;
                    }
                }
            }
        }

        // per-node Metropolis sweep
        let sig = sigma(scale);
        for j in 1..n {
            let z: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let old = e[j];
            let new = old + sig * z;
            if recording {
                proposed += 1;
            } else {
                tune_prop += 1;
            }
            if new.abs() > cfg.clamp {
                continue;
            }
            let before = link_energy(e[j - 1], old, dt, lam, mu, det)
                + link_energy(old, e[j + 1], dt, lam, mu, det);
            let after = link_energy(e[j - 1], new, dt, lam, mu, det)
                + link_energy(new, e[j + 1], dt, lam, mu, det);
            let dh = after - before;
            if dh.is_finite() && (dh <= 0.0 || u < (-dh).exp()) {
                e[j] = new;
                if recording {
                    accepted += 1;
                } else {
                    tune_acc += 1;
                }
            }
        }

        if !recording {
            // adapt the local scale towards 30–50% acceptance, then freeze
            if (sweep + 1).is_multiple_of(TUNE_INTERVAL) && tune_prop > 0 {
                let rate = tune_acc as f64 / tune_prop as f64;
                if rate < 0.3 {
                    scale *= 0.8;
                } else if rate > 0.5 {
                    scale *= 1.25;
                }
                scale = scale.clamp(1e-3, 1e3);
                tune_acc = 0;
                tune_prop = 0;
            }
            continue;
        }

        let s = sweep - cfg.burn_in;
        stats.n += 1;
        for (k, &ek) in e.iter().enumerate() {
            stats.sums[k] += ek;
            stats.sumsq[k] += ek * ek;
        }
        if s.is_multiple_of(COV_STRIDE) {
            stats.n_cross += 1;
            for i in 0..=n {
                stats.sums_cross[i] += e[i];
                for j in 0..=i {
                    stats.cross[(i, j)] += e[i] * e[j];
                }
            }
        }
        if s < batch_size * n_batches {
            for (acc, &ek) in batch_acc.iter_mut().zip(&e) {
                *acc += ek;
            }
            if (s + 1).is_multiple_of(batch_size) {
                stats
                    .batch_means
                    .push(batch_acc.iter().map(|x| x / batch_size as f64).collect());
                batch_acc.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    stats.accepted = accepted;
    stats.proposed = proposed;
    Ok(stats)
}

fn finalize(
    p: &ModeParams,
    cfg: &OracleConfig,
    chain_stats: Vec<ChainStats>,
) -> Result<PathEnsemble> {
    let n = cfg.n_steps;
    let grid = TimeGrid::new(0.0, p.t_obs, n + 1);
    let mut sums = vec![0.0; n + 1];
    let mut sumsq = vec![0.0; n + 1];
    let mut sums_cross = vec![0.0; n + 1];
    let mut cross = DMatrix::zeros(n + 1, n + 1);
    let mut batch_means: Vec<Vec<f64>> = Vec::new();
    let (mut n_tot, mut n_cross, mut accepted, mut proposed) = (0u64, 0u64, 0u64, 0u64);
    for s in chain_stats {
        for k in 0..=n {
            sums[k] += s.sums[k];
            sumsq[k] += s.sumsq[k];
            sums_cross[k] += s.sums_cross[k];
        }
        cross += s.cross;
        batch_means.extend(s.batch_means);
        n_tot += s.n;
        n_cross += s.n_cross;
        accepted += s.accepted;
        proposed += s.proposed;
    }

    let acceptance_rate = accepted as f64 / proposed as f64;
    if acceptance_rate < 0.01 {
        return Err(PathOracleError::ChainDiverged(acceptance_rate));
    }

    let nf = n_tot as f64;
    let mean = DVector::from_fn(n + 1, |k, _| sums[k] / nf);
    let var: Vec<f64> = (0..=n)
        .map(|k| ((sumsq[k] - nf * mean[k] * mean[k]) / (nf - 1.0)).max(0.0))
        .collect();

    let ncf = n_cross as f64;
    let mean_cross: Vec<f64> = sums_cross.iter().map(|s| s / ncf).collect();
    let mut cov = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=i {
            let c = (cross[(i, j)] - ncf * mean_cross[i] * mean_cross[j]) / (ncf - 1.0);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }

    // batch-means error estimate: the batch size caps the correlation
    // window at n_samples/50
    let n_b = batch_means.len() as f64;
    let mut stderr = DVector::zeros(n + 1);
    let mut n_eff_min = f64::INFINITY;
    for k in 1..n {
        let bm: Vec<f64> = batch_means.iter().map(|b| b[k]).collect();
        let bmean = bm.iter().sum::<f64>() / n_b;
        let bvar = bm.iter().map(|x| (x - bmean).powi(2)).sum::<f64>() / (n_b - 1.0);
        let se = (bvar / n_b).sqrt();
        stderr[k] = se;
        let ess = if se > 0.0 {
            (var[k] / (se * se)).min(nf)
        } else {
            nf
        };
        n_eff_min = n_eff_min.min(ess);
    }

    if !mean.iter().all(|x| x.is_finite()) {
        return Err(PathOracleError::NonFiniteValue);
    }

    Ok(PathEnsemble {
        config: *cfg,
        grid,
        mean,
        cov,
        stderr_mean: stderr,
        acceptance_rate,
        n_effective: n_eff_min,
    })
}

/// Runs a single Metropolis chain targeting exp(−path_information).
///
/// Deterministic for a fixed config: identical seeds reproduce the ensemble
/// bit-for-bit.
pub fn mcmc_sample_paths(p: &ModeParams, cfg: &OracleConfig) -> Result<PathEnsemble> {
    cfg.validate(p)?;
    let stats = run_chain(p, cfg, cfg.seed)?;
    finalize(p, cfg, vec![stats])
}

/// Seed of chain `index` derived from a base seed.
pub fn derived_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_add(index)
}

/// Runs `n_chains` independent chains concurrently (seeds `seed + i`,
/// `n_samples` recorded sweeps each) and reduces their moments in chain
/// order, so the result does not depend on scheduling.
pub fn mcmc_sample_paths_parallel(
    p: &ModeParams,
    cfg: &OracleConfig,
    n_chains: usize,
) -> Result<PathEnsemble> {
    assert!(n_chains >= 1);
    cfg.validate(p)?;
    let results: Vec<Result<ChainStats>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n_chains)
            .map(|i| {
                let p = *p;
                let cfg = *cfg;
                scope.spawn(move || run_chain(&p, &cfg, derived_seed(cfg.seed, i as u64)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let stats: Vec<ChainStats> = results.into_iter().collect::<Result<_>>()?;
    finalize(p, cfg, stats)
}

/// Sample mean, variance, and standard error at a grid node.
pub fn ensemble_moments(ens: &PathEnsemble, t: f64) -> Result<(f64, f64, f64)> {
    let i = ens
        .grid
        .index_of(t)
        .ok_or(PathOracleError::NotAGridNode(t))?;
    Ok((ens.mean[i], ens.cov[(i, i)], ens.stderr_mean[i]))
}

/// Oracle moments as a `PosteriorMoments` record.
pub fn oracle_moments(ens: &PathEnsemble) -> PosteriorMoments {
    PosteriorMoments::new(
        ens.grid.clone(),
        ens.mean.clone(),
        ens.cov.clone(),
        MomentSource::Oracle,
        Some(ens.stderr_mean.clone()),
    )
}
