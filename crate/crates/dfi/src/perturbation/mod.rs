//! First-order corrections to the mode posterior from the quadratic drift.
//!
//! On the window [0, t_o] between the pinned start and the measurement, the
//! free theory has the bosonic propagator
//! `Dᵇ(t,t′) = f(t,t′) − f(t,t_o)f(t′,t_o)/f(t_o,t_o)` (the bridge
//! covariance, vanishing at both ends of the window) and the fermionic
//! propagator `Dᶠ(t,t′) = θ(t−t′)e^{λ(t−t′)}` with the Stratonovich
//! equal-time convention θ(0) = ½.
//!
//! The quadratic coupling contributes three first-order diagrams to the
//! posterior mean. Every diagram built on the bosonic three-vertex reduces,
//! after integration by parts, to pure boundary terms `g·Dᵇ` which vanish
//! because `Dᵇ(0,·) = Dᵇ(t_o,·) = 0`; what survives of that vertex is its
//! −3λ piece, and the fermionic loop closes with weight Dᶠ(t′,t′) = ½. The
//! assembled mean correction implemented here is
//!
//! ```text
//! δm(t) = −3μ ∫₀^{t_o} dt′ Dᵇ(t,t′)·[ (m²(t′) + Dᵇ(t′,t′))·λ + 1 ]
//! ```
//!
//! whose λ = 0 limit is the fermion loop alone, −(3/2)μ t (t_o − t). The
//! covariance picks up `δD(t,t′) = −3!μλ ∫ dt″ Dᵇ(t,t″) m(t″) Dᵇ(t″,t′)`,
//! identically zero at λ = 0. Diagrams are evaluated by composite quadrature
//! with mandatory breakpoints at the kink times rather than symbolically.

mod quadrature;

pub use quadrature::{QuadratureSpec, Scheme};

use crate::mode_model::{
    posterior_cov_mode, posterior_mean_mode, prior_kernel, prior_kernel_dtp, ModeParams,
    MomentSource, PosteriorMoments, TimeGrid,
};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerturbationError {
    #[error("time {t} outside the inference window [0, {t_obs}]")]
    OutOfWindow { t: f64, t_obs: f64 },
    #[error("this diagram is only tabulated at λ = 0")]
    RequiresLambdaZero,
    #[error("{0:?} is not one of the vanishing diagrams")]
    NotAVanishingDiagram(DiagramId),
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),
}

pub type Result<T> = std::result::Result<T, PerturbationError>;

/// The first-order diagrams and vanishing-lemma integrands.
///
/// `MeanTadpoleMm` and `MeanBosonLoop` are the two bosonic-vertex mean
/// diagrams in their raw (derivative) form; `MeanFermionLoop` is the
/// fermionic loop; `CovTadpole` is the covariance correction in raw form.
/// The three `VanishingLemma*` variants are the total-derivative integrands
/// `Dᵇ∂g + g∂Dᵇ` for g = μmm, ½μDᵇ and μmDᵇ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramId {
    MeanTadpoleMm,
    MeanBosonLoop,
    MeanFermionLoop,
    CovTadpole,
    VanishingLemmaG1,
    VanishingLemmaG2,
    VanishingLemmaG3,
}

fn check_window(p: &ModeParams, t: f64) -> Result<()> {
    let tol = 1e-12 * p.t_obs.max(1.0);
    if t < -tol || t > p.t_obs + tol {
        return Err(PerturbationError::OutOfWindow { t, t_obs: p.t_obs });
    }
    Ok(())
}

/// Bosonic propagator Dᵇ(t,t′): the free posterior covariance restricted to
/// the inference window; Dᵇ(0,·) = Dᵇ(t_o,·) = 0.
pub fn bosonic_propagator(p: &ModeParams, t: f64, tp: f64) -> Result<f64> {
    check_window(p, t)?;
    check_window(p, tp)?;
    Ok(posterior_cov_mode(&p.linearized(), t, tp))
}

/// Fermionic propagator Dᶠ(t,t′) = θ(t−t′)e^{λ(t−t′)}, with θ(0) = ½.
pub fn fermionic_propagator(lam: f64, t: f64, tp: f64) -> f64 {
    if t > tp {
        (lam * (t - tp)).exp()
    } else if t < tp {
        0.0
    } else {
        0.5
    }
}

/// Closed-form mean correction at λ = 0: the fermion loop
/// −(3/2) μ t (t_o − t); both bosonic diagrams vanish there.
pub fn mean_correction_lambda0(p: &ModeParams, t: f64) -> Result<f64> {
    if p.lam != 0.0 {
        return Err(PerturbationError::RequiresLambdaZero);
    }
    check_window(p, t)?;
    Ok(-1.5 * p.mu * t * (p.t_obs - t))
}

/// Kernel bundle for diagram integrands at fixed parameters.
struct Kernels {
    lam: f64,
    t_obs: f64,
    datum: f64,
    f_oo: f64,
}

impl Kernels {
    fn new(p: &ModeParams) -> Self {
        Self {
            lam: p.lam,
            t_obs: p.t_obs,
            datum: p.datum,
            f_oo: prior_kernel(p.lam, p.t_obs, p.t_obs),
        }
    }

    fn f(&self, a: f64, b: f64) -> f64 {
        prior_kernel(self.lam, a, b)
    }

    fn db(&self, a: f64, b: f64) -> f64 {
        self.f(a, b) - self.f(a, self.t_obs) * self.f(b, self.t_obs) / self.f_oo
    }

    fn m(&self, s: f64) -> f64 {
        self.f(s, self.t_obs) / self.f_oo * self.datum
    }

    /// dm/ds
    fn m_dot(&self, s: f64) -> f64 {
        prior_kernel_dtp(self.lam, self.t_obs, s) / self.f_oo * self.datum
    }

    /// ∂Dᵇ(a,s)/∂s, with the equal-time convention of `prior_kernel_dtp`.
    fn db_ds(&self, a: f64, s: f64) -> f64 {
        prior_kernel_dtp(self.lam, a, s)
            - self.f(a, self.t_obs) * prior_kernel_dtp(self.lam, self.t_obs, s) / self.f_oo
    }

    /// [∂Dᵇ(s,s′)/∂s′] at s′ = s; the θ(0) = ½ value enters through
    /// ∂f(s,s)/∂s′ = e^{2λs}/2.
    fn db_ds_diag(&self, s: f64) -> f64 {
        prior_kernel_dtp(self.lam, s, s)
            - self.f(s, self.t_obs) * prior_kernel_dtp(self.lam, self.t_obs, s) / self.f_oo
    }

    /// d[Dᵇ(s,s)]/ds, the full derivative along the diagonal.
    fn db_diag_dot(&self, s: f64) -> f64 {
        (2.0 * self.lam * s).exp()
            - 2.0 * self.f(s, self.t_obs) * prior_kernel_dtp(self.lam, self.t_obs, s) / self.f_oo
    }
}

/// General-λ first-order mean correction by quadrature,
/// −3μ ∫ Dᵇ(t,t′)[(m² + Dᵇ_{t′t′})λ + 1] dt′, with `t` forced onto a panel
/// boundary (the integrand has a kink there).
pub fn mean_correction_general(p: &ModeParams, t: f64, q: &QuadratureSpec) -> Result<f64> {
    check_window(p, t)?;
    let k = Kernels::new(p);
    let q = q.with_breakpoints(&[t]);
    let integral = q.integrate(0.0, p.t_obs, |s| {
        let m = k.m(s);
        k.db(t, s) * ((m * m + k.db(s, s)) * p.lam + 1.0)
    });
    Ok(-3.0 * p.mu * integral)
}

/// General-λ first-order covariance correction by quadrature,
/// −3!μλ ∫ Dᵇ(t,t″) m(t″) Dᵇ(t″,t′) dt″; identically 0 at λ = 0.
pub fn cov_correction_general(p: &ModeParams, t: f64, tp: f64, q: &QuadratureSpec) -> Result<f64> {
    check_window(p, t)?;
    check_window(p, tp)?;
    if p.lam == 0.0 {
        return Ok(0.0);
    }
    let k = Kernels::new(p);
    let q = q.with_breakpoints(&[t, tp]);
    let integral = q.integrate(0.0, p.t_obs, |s| k.db(t, s) * k.m(s) * k.db(s, tp));
    Ok(-6.0 * p.mu * p.lam * integral)
}

/// Quadrature value of a named diagram.
///
/// `tp` is the second external time of `CovTadpole` (defaults to `t`); the
/// vanishing-lemma G3 integrand also pins its spectator leg at `t`. The two
/// raw bosonic mean diagrams and the raw covariance diagram are tabulated at
/// λ = 0 only, where their closed-form pieces are known.
pub fn diagram_value(
    id: DiagramId,
    p: &ModeParams,
    t: f64,
    tp: Option<f64>,
    q: &QuadratureSpec,
) -> Result<f64> {
    check_window(p, t)?;
    let tp = tp.unwrap_or(t);
    check_window(p, tp)?;
    if matches!(
        id,
        DiagramId::MeanTadpoleMm | DiagramId::MeanBosonLoop | DiagramId::CovTadpole
    ) && p.lam != 0.0
    {
        return Err(PerturbationError::RequiresLambdaZero);
    }
    let k = Kernels::new(p);
    let mu = p.mu;
    let q = q.with_breakpoints(&[t, tp]);
    let value = match id {
        // μ∫ 2Dᵇ(t,s)·m·ṁ + m²·∂Dᵇ(t,s)
        DiagramId::MeanTadpoleMm => q.integrate(0.0, p.t_obs, |s| {
            let m = k.m(s);
            mu * (2.0 * k.db(t, s) * m * k.m_dot(s) + m * m * k.db_ds(t, s))
        }),
        // μ∫ 2Dᵇ(t,s)·[∂₂Dᵇ(s,s′)]_{s′=s} + Dᵇ(s,s)·∂Dᵇ(t,s)
        DiagramId::MeanBosonLoop => q.integrate(0.0, p.t_obs, |s| {
            mu * (2.0 * k.db(t, s) * k.db_ds_diag(s) + k.db(s, s) * k.db_ds(t, s))
        }),
        // −3!μ∫ Dᵇ(t,s)·Dᶠ(s,s); the equal-time loop value is θ(0) = ½
        DiagramId::MeanFermionLoop => q.integrate(0.0, p.t_obs, |s| {
            -6.0 * mu * k.db(t, s) * fermionic_propagator(p.lam, s, s)
        }),
        // 2μ∫ ∂Dᵇ(t,s)·m·Dᵇ(s,t′) + Dᵇ(t,s)·ṁ·Dᵇ(s,t′) + Dᵇ(t,s)·m·∂Dᵇ(s,t′)
        DiagramId::CovTadpole => q.integrate(0.0, p.t_obs, |s| {
            2.0 * mu
                * (k.db_ds(t, s) * k.m(s) * k.db(s, tp)
                    + k.db(t, s) * k.m_dot(s) * k.db(s, tp)
                    + k.db(t, s) * k.m(s) * k.db_ds(tp, s))
        }),
        // ∫ Dᵇ(t,s)·(dg/ds) + g·∂Dᵇ(t,s) for the three boundary-term g's
        DiagramId::VanishingLemmaG1 => q.integrate(0.0, p.t_obs, |s| {
            let g = mu * k.m(s) * k.m(s);
            let g_dot = 2.0 * mu * k.m(s) * k.m_dot(s);
            k.db(t, s) * g_dot + g * k.db_ds(t, s)
        }),
        DiagramId::VanishingLemmaG2 => q.integrate(0.0, p.t_obs, |s| {
            let g = 0.5 * mu * k.db(s, s);
            let g_dot = 0.5 * mu * k.db_diag_dot(s);
            k.db(t, s) * g_dot + g * k.db_ds(t, s)
        }),
        DiagramId::VanishingLemmaG3 => q.integrate(0.0, p.t_obs, |s| {
            let g = mu * k.m(s) * k.db(s, t);
            let g_dot = mu * (k.m_dot(s) * k.db(s, t) + k.m(s) * k.db_ds(t, s));
            k.db(t, s) * g_dot + g * k.db_ds(t, s)
        }),
    };
    Ok(value)
}

/// Value of one of the five diagrams that must vanish: the three lemma
/// integrands (any λ) and the two raw bosonic mean diagrams (λ = 0).
pub fn vanishing_diagram_value(
    id: DiagramId,
    p: &ModeParams,
    t: f64,
    q: &QuadratureSpec,
) -> Result<f64> {
    if matches!(id, DiagramId::MeanFermionLoop | DiagramId::CovTadpole) {
        return Err(PerturbationError::NotAVanishingDiagram(id));
    }
    diagram_value(id, p, t, None, q)
}

/// Free moments plus the first-order corrections on `grid` ⊂ [0, t_o].
pub fn corrected_moments(
    p: &ModeParams,
    grid: &TimeGrid,
    q: &QuadratureSpec,
) -> Result<PosteriorMoments> {
    for &t in grid.points() {
        check_window(p, t)?;
    }
    let free = p.linearized();
    let n = grid.len();
    let mean = DVector::from_fn(n, |i, _| {
        let t = grid.points()[i];
        posterior_mean_mode(&free, t) + mean_correction_general(p, t, q).unwrap()
    });
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (ti, tj) = (grid.points()[i], grid.points()[j]);
            let v = posterior_cov_mode(&free, ti, tj) + cov_correction_general(p, ti, tj, q)?;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok(PosteriorMoments::new(
        grid.clone(),
        mean,
        cov,
        MomentSource::Perturbative,
        None,
    ))
}

/// Discrete check that Dᶠ inverts δ(t−t′)(∂_{t′} − λ).
///
/// Applies the integral operator built from the discretized Dᶠ to a smooth
/// test function and then the forward-difference operator (∂ − λ); the
/// result must reproduce the test function, up to a first-order residual.
/// Returns the maximum deviation, which scales as 1/n.
pub fn fermionic_inverse_check(lam: f64, grid: &TimeGrid) -> f64 {
    let pts = grid.points();
    let n = pts.len();
    let dt = grid.dt();
    let test = |t: f64| (2.0 * t).cos() + 0.5 * t;
    // w = Dᶠ·v by quadrature (the θ(0) = ½ diagonal gives a trapezoid-like
    // closing weight)
    let w: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| fermionic_propagator(lam, pts[i], pts[j]) * test(pts[j]) * dt)
                .sum()
        })
        .collect();
    let mut max_dev = 0.0f64;
    for i in 0..n - 1 {
        let applied = (w[i + 1] - w[i]) / dt - lam * w[i];
        max_dev = max_dev.max((applied - test(pts[i])).abs());
    }
    max_dev
}
