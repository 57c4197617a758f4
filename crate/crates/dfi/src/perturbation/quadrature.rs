//! Composite quadrature over piecewise-smooth integrands.
//!
//! Diagram integrands are smooth except for kinks at a handful of known
//! times (the external legs and the observation time), so the rule splits
//! the window at mandatory breakpoints and applies a composite scheme on
//! each smooth segment.

use super::PerturbationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    CompositeTrapezoid,
    CompositeSimpson,
}

/// Panel budget, scheme, and the times that must land on panel boundaries.
#[derive(Debug, Clone)]
pub struct QuadratureSpec {
    n_panels: usize,
    scheme: Scheme,
    breakpoints: Vec<f64>,
}

impl QuadratureSpec {
    pub fn new(
        n_panels: usize,
        scheme: Scheme,
        mut breakpoints: Vec<f64>,
    ) -> Result<Self, PerturbationError> {
        if n_panels < 16 {
            return Err(PerturbationError::InvalidQuadrature(format!(
                "need at least 16 panels, got {n_panels}"
            )));
        }
        if scheme == Scheme::CompositeSimpson && !n_panels.is_multiple_of(2) {
            return Err(PerturbationError::InvalidQuadrature(format!(
                "Simpson needs an even panel count, got {n_panels}"
            )));
        }
        if breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(PerturbationError::InvalidQuadrature(
                "non-finite breakpoint".into(),
            ));
        }
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            n_panels,
            scheme,
            breakpoints,
        })
    }

    /// Default rule for diagram work: Simpson with 2048 panels.
    pub fn simpson(n_panels: usize) -> Self {
        Self::new(n_panels, Scheme::CompositeSimpson, Vec::new())
            .expect("even panel count >= 16")
    }

    pub fn n_panels(&self) -> usize {
        self.n_panels
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Same budget and scheme with additional mandatory breakpoints.
    pub fn with_breakpoints(&self, extra: &[f64]) -> Self {
        let mut bp = self.breakpoints.clone();
        bp.extend_from_slice(extra);
        bp.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self {
            n_panels: self.n_panels,
            scheme: self.scheme,
            breakpoints: bp,
        }
    }

    /// ∫ₐᵇ f, with every breakpoint inside (a,b) forced onto a panel boundary.
    ///
    /// Integrands here may jump at segment edges (Heaviside factors evaluate
    /// to their equal-time convention value exactly on the edge), so every
    /// edge sample is nudged infinitesimally into its segment; each side
    /// then integrates its own one-sided limit.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        assert!(b >= a, "inverted integration window");
        if a == b {
            return 0.0;
        }
        let span = b - a;
        let tol = 1e-12 * span.max(1.0);
        let nudge = 1e-13 * span;
        let mut edges = vec![a];
        for &bp in &self.breakpoints {
            if bp > a + tol && bp < b - tol && (bp - edges[edges.len() - 1]).abs() > tol {
                edges.push(bp);
            }
        }
        edges.push(b);

        let mut total = 0.0;
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut n = ((self.n_panels as f64) * (hi - lo) / span).round() as usize;
            n = n.max(2);
            if self.scheme == Scheme::CompositeSimpson && !n.is_multiple_of(2) {
                n += 1;
            }
            let g = |x: f64| f(x.clamp(lo + nudge, hi - nudge));
            total += match self.scheme {
                Scheme::CompositeTrapezoid => trapezoid(lo, hi, n, g),
                Scheme::CompositeSimpson => simpson(lo, hi, n, g),
            };
        }
        total
    }
}

fn trapezoid(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + h * i as f64);
    }
    s * h
}

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    debug_assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_budgets() {
        assert!(QuadratureSpec::new(8, Scheme::CompositeTrapezoid, vec![]).is_err());
        assert!(QuadratureSpec::new(33, Scheme::CompositeSimpson, vec![]).is_err());
        assert!(QuadratureSpec::new(32, Scheme::CompositeSimpson, vec![]).is_ok());
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let q = QuadratureSpec::simpson(16);
        let got = q.integrate(0.0, 2.0, |x| x * x * x - x + 1.0);
        assert!((got - (4.0 - 2.0 + 2.0)).abs() < 1e-13);
    }

    #[test]
    fn breakpoint_recovers_exactness_on_kinked_integrand() {
        // |x − 1/3| is piecewise linear; Simpson is exact once the kink sits
        // on a panel boundary, and inexact otherwise.
        let f = |x: f64| (x - 1.0 / 3.0).abs();
        let exact = (1.0f64 / 3.0).powi(2) / 2.0 + (2.0f64 / 3.0).powi(2) / 2.0;
        let plain = QuadratureSpec::simpson(32).integrate(0.0, 1.0, f);
        let split = QuadratureSpec::simpson(32)
            .with_breakpoints(&[1.0 / 3.0])
            .integrate(0.0, 1.0, f);
        assert!((split - exact).abs() < 1e-12);
        assert!((split - exact).abs() < (plain - exact).abs());
    }

    #[test]
    fn trapezoid_second_order_simpson_fourth_order() {
        let f = |x: f64| (1.3 * x).sin().exp();
        let reference = QuadratureSpec::simpson(8192).integrate(0.0, 2.0, f);
        for (scheme, order) in [
            (Scheme::CompositeTrapezoid, 2.0),
            (Scheme::CompositeSimpson, 4.0),
        ] {
            let err = |n: usize| {
                (QuadratureSpec::new(n, scheme, vec![])
                    .unwrap()
                    .integrate(0.0, 2.0, f)
                    - reference)
                    .abs()
            };
            let rate = (err(32) / err(64)).log2();
            assert!(
                (rate - order).abs() < 0.5,
                "{scheme:?}: observed rate {rate}"
            );
        }
    }

    #[test]
    fn empty_window_is_zero() {
        assert_eq!(QuadratureSpec::simpson(64).integrate(0.7, 0.7, |_| 5.0), 0.0);
    }
}
