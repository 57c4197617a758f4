//! First-order diagram evaluation: verifies that every bosonic-three-vertex
//! diagram integrates to zero (boundary terms on a pinned window), that the
//! fermion loop reproduces its closed form at λ = 0, and prints the
//! corrected posterior mean for λ ∈ {−1, 0, 1} at μ = 0.3.
//!
//! ```bash
//! cargo run --example diagram_corrections
//! ```

use dfi::mode_model::{posterior_mean_mode, ModeParams};
use dfi::perturbation::{
    diagram_value, mean_correction_general, mean_correction_lambda0, vanishing_diagram_value,
    DiagramId, QuadratureSpec,
};

fn main() {
    let quad = QuadratureSpec::simpson(2048);
    let p0 = ModeParams::new(0.0, 0.3, 1.0, 1.0);

    println!("vanishing diagrams at λ = 0, μ = 0.3, t = 0.5:");
    for id in [
        DiagramId::MeanTadpoleMm,
        DiagramId::MeanBosonLoop,
        DiagramId::VanishingLemmaG1,
        DiagramId::VanishingLemmaG2,
        DiagramId::VanishingLemmaG3,
    ] {
        let v = vanishing_diagram_value(id, &p0, 0.5, &quad).unwrap();
        println!("  {id:?}: {v:+.3e}");
    }
    let cov = diagram_value(DiagramId::CovTadpole, &p0, 0.3, Some(0.7), &quad).unwrap();
    println!("  CovTadpole(0.3, 0.7): {cov:+.3e}");

    println!("\nfermion loop vs closed form −(3/2)μt(t_o−t):");
    for t in [0.25, 0.5, 0.75] {
        let loop_val = diagram_value(DiagramId::MeanFermionLoop, &p0, t, None, &quad).unwrap();
        let closed = mean_correction_lambda0(&p0, t).unwrap();
        println!("  t = {t}: {loop_val:+.10} (closed {closed:+.10})");
    }

    println!("\ncorrected posterior mean at μ = 0.3:");
    println!("  {:>4} {:>9} {:>11} {:>11}", "λ", "t", "free", "corrected");
    for lam in [-1.0, 0.0, 1.0] {
        let p = ModeParams::new(lam, 0.3, 1.0, 1.0);
        for t in [0.25, 0.5, 0.75] {
            let free = posterior_mean_mode(&p.linearized(), t);
            let corrected = free + mean_correction_general(&p, t, &quad).unwrap();
            println!("  {lam:+4} {t:9.2} {free:11.5} {corrected:11.5}");
        }
    }
}
