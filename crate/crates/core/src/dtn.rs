//! Truncated quasi-periodic Dirichlet-to-Neumann operators on the top edge.

use faer::Mat;

use crate::mesh::PeriodicMesh;
use crate::{cis, Error, Result, C64};

/// Symbol `i sqrt(k^2 - xi^2)` with the branch `Re <= 0`, `Im >= 0`.
pub fn beta(k: f64, xi: f64) -> C64 {
    let d = k * k - xi * xi;
    if xi.abs() <= k {
        C64::new(0.0, d.max(0.0).sqrt())
    } else {
        C64::new(-(-d).sqrt(), 0.0)
    }
}

/// `sin(x) / x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0 + x.powi(4) / 120.0
    } else {
        x.sin() / x
    }
}

/// Default truncation order `max(ceil(k/Lambda*) + 8, 16)` capped at the
/// Nyquist index of the top edge.
pub fn default_order(k: f64, lambda: f64, n_edge: usize) -> usize {
    let ls = 2.0 * std::f64::consts::PI / lambda;
    ((k / ls).ceil() as usize + 8).max(16).min(n_edge / 2)
}

/// Fourier coefficients of the top-edge hat functions:
/// `E[j, l] = (1/Lambda) \int phi_l(x) exp(-i Lambda* j x) dx`, rows
/// `j = -M..=M`.
#[derive(Clone, Debug)]
pub struct TraceFourier {
    pub order: usize,
    pub lambda: f64,
    pub e: Mat<C64>,
}

impl TraceFourier {
    pub fn new(mesh: &PeriodicMesh, order: usize, k: f64) -> Result<Self> {
        let n_edge = mesh.n_edge();
        let ls = 2.0 * std::f64::consts::PI / mesh.lambda;
        if order > n_edge / 2 {
            return Err(Error::Config(format!(
                "DtN order {order} exceeds the top-edge Nyquist index {}",
                n_edge / 2
            )));
        }
        if order < (k / ls).ceil() as usize + 2 {
            return Err(Error::Config(format!(
                "DtN order {order} too small for k = {k}: need at least {}",
                (k / ls).ceil() as usize + 2
            )));
        }
        let d = mesh.lambda / n_edge as f64;
        let e = Mat::from_fn(2 * order + 1, n_edge, |r, l| {
            let j = r as f64 - order as f64;
            let s = sinc(0.5 * ls * j * d);
            cis(-ls * j * mesh.top_x1[l]) * (d / mesh.lambda * s * s)
        });
        Ok(TraceFourier { order, lambda: mesh.lambda, e })
    }
}

/// Trace operator for one quasi-momentum.
#[derive(Clone, Debug)]
pub struct DtnBlock {
    pub alpha: f64,
    pub order: usize,
    /// `beta(k, Lambda* j - alpha)`, `j = -M..=M`.
    pub betas: Vec<C64>,
    /// `E^H diag(Lambda beta) E`, indexed by top-edge node.
    pub trace: Mat<C64>,
}

pub fn dtn_matrix(tf: &TraceFourier, alpha: f64, k: f64) -> DtnBlock {
    let ls = 2.0 * std::f64::consts::PI / tf.lambda;
    let m = tf.order as f64;
    let betas: Vec<C64> = (0..tf.e.nrows())
        .map(|r| beta(k, ls * (r as f64 - m) - alpha))
        .collect();
    let scaled = Mat::from_fn(tf.e.nrows(), tf.e.ncols(), |r, c| tf.e[(r, c)] * (betas[r] * tf.lambda));
    let trace = tf.e.adjoint() * &scaled;
    DtnBlock { alpha, order: tf.order, betas, trace }
}
