//! Closed-form posterior of a measured mode for stable, marginal, and
//! chaotic dynamics: prints the bridge mean and one-sigma band on a coarse
//! grid, demonstrates the Markov blanket across the measurement, and shows
//! the finite-time blow-up of the noise-free quadratic drift.
//!
//! ```bash
//! cargo run --example mode_posterior
//! ```

use dfi::mode_model::{
    equal_time_uncertainty, free_nonlinear_solution, posterior_cov_mode, posterior_mean_mode,
    relative_uncertainty, ModeParams,
};

fn main() {
    println!("posterior of a mode measured perfectly at t_o = 1 (d = 1)\n");
    for lam in [-1.0, 0.0, 1.0] {
        let p = ModeParams::new(lam, 0.0, 1.0, 1.0);
        println!("λ = {lam:+}:");
        println!("  {:>5} {:>10} {:>10} {:>10}", "t", "mean", "sigma", "rel");
        for i in 0..=8 {
            let t = 0.25 * i as f64;
            let sigma = equal_time_uncertainty(&p, t).sqrt();
            let rel = relative_uncertainty(&p, t)
                .map(|r| format!("{r:10.4}"))
                .unwrap_or_else(|_| format!("{:>10}", "-"));
            println!(
                "  {t:5.2} {:10.4} {sigma:10.4} {rel}",
                posterior_mean_mode(&p, t)
            );
        }
        // one perfect measurement decouples earlier from later times
        let blanket = posterior_cov_mode(&p, 0.5, 1.5);
        println!("  cov(0.5, 1.5) across the measurement = {blanket:e}\n");
    }

    println!("noise-free quadratic drift from ε = 1 with μ = 2 (blow-up at τ = 1):");
    for t in [0.0, 0.5, 0.9, 0.99, 1.0] {
        match free_nonlinear_solution(1.0, 2.0, 0.0, t) {
            Ok(v) => println!("  ε({t:4.2}) = {v:10.3}"),
            Err(e) => println!("  ε({t:4.2}) : {e}"),
        }
    }
}
