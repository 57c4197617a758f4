//! Path-posterior MCMC: validates the sampler against the exact Gaussian
//! posterior in the linear case, then shows the effect of the
//! functional-determinant term on the nonlinear posterior mean.
//!
//! ```bash
//! cargo run --example path_posterior_mcmc
//! ```

use dfi::mode_model::ModeParams;
use dfi::path_oracle::{
    ensemble_moments, exact_gaussian_posterior, mcmc_sample_paths, OracleConfig,
};

fn main() {
    // linear case: every grid node must agree with the closed form
    let p = ModeParams::new(0.0, 0.0, 1.0, 1.0);
    let cfg = OracleConfig {
        n_samples: 200_000,
        burn_in: 10_000,
        n_steps: 100,
        ..OracleConfig::default_for(&p, 42)
    };
    let ens = mcmc_sample_paths(&p, &cfg).unwrap();
    let exact = exact_gaussian_posterior(&p, &ens.grid).unwrap();
    let mut worst_z: f64 = 0.0;
    for (i, &t) in ens.grid.points().iter().enumerate() {
        let (mean, _, stderr) = ensemble_moments(&ens, t).unwrap();
        if stderr > 0.0 {
            worst_z = worst_z.max(((mean - exact.mean[i]) / stderr).abs());
        }
    }
    println!("linear check (λ=0, μ=0): max |z| over the grid = {worst_z:.2}");
    println!(
        "acceptance {:.2}, effective samples {:.0}\n",
        ens.acceptance_rate, ens.n_effective
    );

    // nonlinear case: the determinant term pushes the mean away from the
    // blow-up region
    let p = ModeParams::new(0.0, 0.3, 1.0, 1.0);
    let base = OracleConfig {
        n_samples: 400_000,
        burn_in: 10_000,
        n_steps: 100,
        ..OracleConfig::default_for(&p, 7)
    };
    let with_det = mcmc_sample_paths(&p, &base).unwrap();
    let without_det = mcmc_sample_paths(
        &p,
        &OracleConfig {
            include_determinant: false,
            ..base
        },
    )
    .unwrap();
    println!("nonlinear posterior mean at t = 0.5 (μ = 0.3, λ = 0):");
    let (m_on, _, se_on) = ensemble_moments(&with_det, 0.5).unwrap();
    let (m_off, _, se_off) = ensemble_moments(&without_det, 0.5).unwrap();
    println!("  determinant on : {m_on:.4} ± {se_on:.4}");
    println!("  determinant off: {m_off:.4} ± {se_off:.4}");
    println!("  shift {:+.4} (first-order prediction −μ t(t_o−t)/4 = −0.01875)", m_on - m_off);
}
