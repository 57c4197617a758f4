//! Generalized Wiener filter on a small random instance: builds a prior,
//! response, and noise covariance, then shows that the information-form and
//! data-space-form posteriors coincide and that a noiseless measurement is
//! interpolated exactly.
//!
//! ```bash
//! cargo run --example wiener_filter
//! ```

use dfi::gaussian_core::{
    information_source, posterior, propagator_data_space_form, propagator_information_form,
    CovOperator, LinearResponse,
};
use nalgebra::{DMatrix, DVector};

fn main() {
    // a 4-dimensional field with exponential prior correlations
    let phi = CovOperator::from_kernel(&[0.0, 1.0, 2.0, 3.0], |a, b| {
        (-0.5 * (a - b).abs()).exp()
    })
    .unwrap();
    // two data points: the field at index 1 and the mean of indices 2 and 3
    let r = LinearResponse::new(DMatrix::from_row_slice(
        2,
        4,
        &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5],
    ))
    .unwrap();
    let n = CovOperator::from_kernel(&[0.0, 1.0], |a, b| if a == b { 0.04 } else { 0.0 }).unwrap();
    let d = DVector::from_vec(vec![1.0, -0.5]);

    let j = information_source(&r, &n, &d).unwrap();
    let d_info = propagator_information_form(&phi, &r, &n).unwrap();
    let d_data = propagator_data_space_form(&phi, &r, &n).unwrap();
    let post = posterior(&phi, &r, &n, &d).unwrap();

    println!("information source j = {:?}", j.as_slice());
    println!("posterior mean       = {:?}", post.mean.as_slice());
    let m_info = d_info.entries() * j;
    let dev_mean = (&m_info - &post.mean).amax();
    let dev_cov = (d_info.entries() - d_data.entries()).amax();
    println!("|D_info·j − m_data|  = {dev_mean:.2e}");
    println!("|D_info − D_data|    = {dev_cov:.2e}");

    // noiseless limit: the data-space form survives N = 0 and reproduces d
    let n0 = CovOperator::zeros(2);
    let exact = posterior(&phi, &r, &n0, &d).unwrap();
    let residual = (r.entries() * &exact.mean - &d).amax();
    println!("noiseless R·m − d    = {residual:.2e}");
    let rdr = r.entries() * exact.cov.entries() * r.entries().transpose();
    println!("noiseless R·D·R†     = {:.2e}", rdr.amax());
}
