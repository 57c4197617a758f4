//! Closed-form statistics of a single dynamical mode under one perfect
//! measurement.
//!
//! A mode driven by unit white noise from a pinned start ε(0) = 0 has the
//! prior correlation kernel
//!
//! ```text
//! f_λ(t,t′) = [e^{λ(t+t′)} − e^{λ|t−t′|}] / (2λ),    f_0(t,t′) = min(t,t′).
//! ```
//!
//! A perfect measurement d = ε(t_o) turns the prior into a Gaussian bridge
//! with mean f(t,t_o)/f(t_o,t_o)·d and covariance
//! f(t,t′) − f(t,t_o)f(t′,t_o)/f(t_o,t_o). The measurement acts as a Markov
//! blanket: the posterior covariance vanishes identically whenever t and t′
//! lie on opposite sides of t_o.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModeModelError {
    #[error("relative uncertainty is undefined where the posterior mean is 0")]
    UndefinedRatio,
    #[error("trajectory diverges at the singular time τ = {tau}")]
    Divergence { tau: f64 },
}

/// The idealized system: Lyapunov exponent λ, quadratic coupling μ, a single
/// perfect observation `datum` at time `t_obs`.
#[derive(Debug, Clone, Copy)]
pub struct ModeParams {
    /// Lyapunov exponent λ of the linearized drift (1/time).
    pub lam: f64,
    /// Quadratic coupling μ of the drift ½με² (1/(field·time)).
    pub mu: f64,
    /// Observation time t_o.
    pub t_obs: f64,
    /// Observed value d = ε(t_o).
    pub datum: f64,
}

impl ModeParams {
    pub fn new(lam: f64, mu: f64, t_obs: f64, datum: f64) -> Self {
        assert!(
            lam.is_finite() && mu.is_finite() && t_obs.is_finite() && datum.is_finite(),
            "mode parameters must be finite"
        );
        assert!(t_obs > 0.0, "observation time must be positive");
        Self {
            lam,
            mu,
            t_obs,
            datum,
        }
    }

    /// The same system with the coupling switched off.
    pub fn linearized(&self) -> Self {
        Self { mu: 0.0, ..*self }
    }
}

/// Uniform grid of n ≥ 2 times on [t0, t1].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points");
        assert!(t0.is_finite() && t1.is_finite() && t0 >= 0.0 && t1 > t0);
        let mut points: Vec<f64> = (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect();
        points[n - 1] = t1;
        Self { t0, t1, points }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.points.len() - 1) as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Index of the grid node matching `t`, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * (self.t1 - self.t0).max(1.0);
        let i = ((t - self.t0) / self.dt()).round();
        if i < 0.0 || i >= self.points.len() as f64 {
            return None;
        }
        let i = i as usize;
        ((self.points[i] - t).abs() <= tol).then_some(i)
    }
}

/// Where a set of posterior moments came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSource {
    ClosedForm,
    Perturbative,
    Oracle,
}

/// Posterior mean and covariance on a time grid, with provenance.
#[derive(Debug, Clone)]
pub struct PosteriorMoments {
    pub grid: TimeGrid,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub source: MomentSource,
    /// Standard error of the mean, present for oracle-derived moments only.
    pub stderr_mean: Option<DVector<f64>>,
}

impl PosteriorMoments {
    pub fn new(
        grid: TimeGrid,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        source: MomentSource,
        stderr_mean: Option<DVector<f64>>,
    ) -> Self {
        let n = grid.len();
        assert_eq!(mean.len(), n);
        assert_eq!((cov.nrows(), cov.ncols()), (n, n));
        let scale = cov.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            for j in 0..i {
                assert!(
                    (cov[(i, j)] - cov[(j, i)]).abs() <= 1e-12 * scale.max(1.0),
                    "covariance must be symmetric"
                );
            }
            if source != MomentSource::Perturbative {
                // a first-order perturbative correction may push the diagonal
                // below the free value, so only exact sources are checked
                assert!(
                    cov[(i, i)] >= -1e-10 * scale.max(1.0),
                    "variance must be non-negative for source {source:?}"
                );
            }
        }
        Self {
            grid,
            mean,
            cov,
            source,
            stderr_mean,
        }
    }
}

/// Prior temporal correlation f_λ(t,t′) of a mode driven by unit white noise
/// from a pinned start.
///
/// Near λ = 0 the ratio form is a 0/0; for |λ|(t+t′) < 1e-6 a second-order
/// Taylor expansion keeps the λ = 0 case exact and the kernel continuous:
/// f = min(t,t′) + λ·t·t′ + λ²(s³ − a³)/12 with s = t+t′, a = |t−t′|.
pub fn prior_kernel(lam: f64, t: f64, tp: f64) -> f64 {
    debug_assert!(t >= 0.0 && tp >= 0.0, "kernel times must be non-negative");
    let s = t + tp;
    let a = (t - tp).abs();
    if (lam * s).abs() < 1e-6 {
        t.min(tp) + lam * t * tp + lam * lam * (s * s * s - a * a * a) / 12.0
    } else {
        // + 0.0 normalizes the −0.0 that the pinned start produces at λ < 0
        ((lam * s).exp() - (lam * a).exp()) / (2.0 * lam) + 0.0
    }
}

/// ∂f_λ/∂t′, with sgn(0) ≔ 0 at the equal-time kink (the convention that
/// pairs with the Heaviside value θ(0) = ½ used in the diagram rules).
pub fn prior_kernel_dtp(lam: f64, t: f64, tp: f64) -> f64 {
    let sg = if tp > t {
        1.0
    } else if tp < t {
        -1.0
    } else {
        0.0
    };
    ((lam * (t + tp)).exp() - sg * (lam * (t - tp).abs()).exp()) / 2.0
}

/// Posterior mean of the measured mode, m(t) = f(t,t_o)/f(t_o,t_o)·d.
///
/// The linear-theory formula; `p.mu` plays no role here.
pub fn posterior_mean_mode(p: &ModeParams, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    prior_kernel(p.lam, t, p.t_obs) / prior_kernel(p.lam, p.t_obs, p.t_obs) * p.datum
}

/// Posterior covariance of the measured mode,
/// D(t,t′) = f(t,t′) − f(t,t_o)f(t′,t_o)/f(t_o,t_o).
///
/// Returns exactly 0 whenever t and t′ straddle the observation (the Markov
/// blanket identity holds algebraically, so the branch avoids catastrophic
/// cancellation at large λ).
pub fn posterior_cov_mode(p: &ModeParams, t: f64, tp: f64) -> f64 {
    debug_assert!(t >= 0.0 && tp >= 0.0);
    if (t < p.t_obs && tp > p.t_obs) || (tp < p.t_obs && t > p.t_obs) {
        return 0.0;
    }
    let f = |a, b| prior_kernel(p.lam, a, b);
    f(t, tp) - f(t, p.t_obs) * f(tp, p.t_obs) / f(p.t_obs, p.t_obs)
}

/// Equal-time posterior uncertainty D(t,t) ≥ 0; exactly 0 at t = 0 and t_o.
pub fn equal_time_uncertainty(p: &ModeParams, t: f64) -> f64 {
    if t == p.t_obs {
        return 0.0;
    }
    posterior_cov_mode(p, t, t).max(0.0)
}

/// Relative posterior uncertainty sqrt(D(t,t))/|m(t)|.
pub fn relative_uncertainty(p: &ModeParams, t: f64) -> Result<f64, ModeModelError> {
    let mean = posterior_mean_mode(p, t);
    if mean == 0.0 {
        return Err(ModeModelError::UndefinedRatio);
    }
    Ok(equal_time_uncertainty(p, t).sqrt() / mean.abs())
}

/// Noise-free solution of ∂ₜε = ½με² from ε(t_i) = ε_i:
/// ε(t) = ε_i / (1 − ½ε_i μ (t − t_i)).
///
/// For ε_i μ > 0 the solution blows up at τ = 2/(ε_i μ); at or past the
/// singular time a `Divergence` is reported.
pub fn free_nonlinear_solution(
    eps_i: f64,
    mu: f64,
    t_i: f64,
    t: f64,
) -> Result<f64, ModeModelError> {
    assert!(t >= t_i, "evaluation time precedes the initial time");
    let z = 0.5 * eps_i * mu * (t - t_i);
    if z >= 1.0 {
        Err(ModeModelError::Divergence {
            tau: 2.0 / (eps_i * mu),
        })
    } else {
        Ok(eps_i / (1.0 - z))
    }
}
