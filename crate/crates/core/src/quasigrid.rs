//! Quasi-momentum discretization: the exceptional set of the wavenumber, the
//! flattening reparameterization `g` of the dual cell, the uniform node grid and
//! trigonometric interpolation on it.

use serde::{Deserialize, Serialize};

use crate::quad::gauss_legendre;
use crate::{cis, Error, Result, C64};

const CASE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Case {
    /// Exceptional points only at the ends of the dual cell.
    Endpoints,
    /// One more exceptional point inside.
    Interior,
}

/// Classification of a wavenumber relative to the lattice.
#[derive(Clone, Debug)]
pub struct WavenumberClass {
    pub k: f64,
    pub lambda_star: f64,
    /// Distance from `k` to the nearest multiple of `lambda_star`.
    pub k_under: f64,
    pub case: Case,
    /// Sorted exceptional points in the closed dual cell.
    pub exceptional: Vec<f64>,
    /// Dual cell `(a0, a1]`.
    pub a0: f64,
    pub a1: f64,
}

pub fn exceptional_set(k: f64, lambda: f64) -> WavenumberClass {
    let ls = 2.0 * std::f64::consts::PI / lambda;
    let mut ku = (k - ls * (k / ls).round()).abs();
    let case = if ku <= CASE_TOL * ls {
        ku = 0.0;
        Case::Endpoints
    } else if (ku - 0.5 * ls).abs() <= CASE_TOL * ls {
        ku = 0.5 * ls;
        Case::Endpoints
    } else {
        Case::Interior
    };
    let exceptional = match case {
        Case::Endpoints => vec![-ku, ls - ku],
        Case::Interior => vec![-ku, ku, ls - ku],
    };
    WavenumberClass { k, lambda_star: ls, k_under: ku, case, exceptional, a0: -ku, a1: ls - ku }
}

impl WavenumberClass {
    pub fn width(&self) -> f64 {
        self.a1 - self.a0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cutoff {
    /// Antiderivative of `s^(n+1) (1-s)^(n+1)`: `g` flat to order `n+2`.
    #[default]
    Polynomial,
    /// Antiderivative of `exp(-1/(s(1-s)))`: flat to infinite order.
    Exponential,
}

/// Monotone reparameterization of the dual cell fixing the exceptional points.
#[derive(Clone, Debug)]
pub struct GMap {
    pub n: usize,
    pub cutoff: Cutoff,
    /// Breakpoints: the exceptional points, sorted.
    pub breaks: Vec<f64>,
    poly_coef: Vec<f64>,
    exp_rule: Vec<(f64, f64)>,
    exp_norm: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(2n+3)! / ((n+1)!)^2`, the inverse of `B(n+2, n+2)`.
pub fn beta_normalization(n: usize) -> f64 {
    let m = n + 1;
    // (2m+1)! / (m!)^2 = (2m+1) * C(2m, m)
    (2 * m + 1) as f64 * binomial(2 * m, m)
}

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

pub fn build_g(wc: &WavenumberClass, n: usize) -> Result<GMap> {
    build_g_with(wc, n, Cutoff::Polynomial)
}

pub fn build_g_with(wc: &WavenumberClass, n: usize, cutoff: Cutoff) -> Result<GMap> {
    if n < 1 {
        return Err(Error::Config("flatness order n must be at least 1".into()));
    }
    let m = n + 1;
    let c = beta_normalization(n);
    let poly_coef = (0..=m)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            c * sign * binomial(m, i) / (m + 1 + i) as f64
        })
        .collect();
    let exp_rule = gauss_legendre(48, 0.0, 1.0);
    let exp_norm = {
        let mut acc = 0.0;
        for p in 0..8 {
            let (lo, hi) = (p as f64 / 8.0, (p + 1) as f64 / 8.0);
            acc += exp_rule.iter().map(|&(x, w)| w * (hi - lo) * bump(lo + (hi - lo) * x)).sum::<f64>();
        }
        acc
    };
    Ok(GMap { n, cutoff, breaks: wc.exceptional.clone(), poly_coef, exp_rule, exp_norm })
}

impl GMap {
    /// Normalized antiderivative on `[0, 1/2]`.
    fn lower_half(&self, s: f64) -> f64 {
        match self.cutoff {
            Cutoff::Polynomial => {
                let m = self.n + 1;
                let mut acc = 0.0;
                for &a in self.poly_coef.iter().rev() {
                    acc = acc * s + a;
                }
                acc * s.powi(m as i32 + 1)
            }
            Cutoff::Exponential => {
                // Few panels suffice: the integrand is flat at 0 and smooth.
                let mut acc = 0.0;
                let panels = 4;
                for p in 0..panels {
                    let (lo, hi) = (s * p as f64 / panels as f64, s * (p + 1) as f64 / panels as f64);
                    acc += self.exp_rule.iter().map(|&(x, w)| w * (hi - lo) * bump(lo + (hi - lo) * x)).sum::<f64>();
                }
                acc / self.exp_norm
            }
        }
    }

    fn shape(&self, s: f64) -> f64 {
        if s <= 0.5 {
            self.lower_half(s)
        } else {
            1.0 - self.lower_half(1.0 - s)
        }
    }

    fn shape_derivative(&self, s: f64) -> f64 {
        match self.cutoff {
            Cutoff::Polynomial => {
                let m = (self.n + 1) as i32;
                beta_normalization(self.n) * (s * (1.0 - s)).powi(m)
            }
            Cutoff::Exponential => bump(s) / self.exp_norm,
        }
    }

    fn piece(&self, t: f64) -> Result<(f64, f64)> {
        let (lo, hi) = (self.breaks[0], *self.breaks.last().unwrap());
        let tol = 1e-12 * (hi - lo).max(1.0);
        if !(t >= lo - tol && t <= hi + tol) {
            return Err(Error::Domain(format!("t = {t} outside [{lo}, {hi}]")));
        }
        let i = self.breaks.windows(2).position(|w| t <= w[1]).unwrap_or(self.breaks.len() - 2);
        Ok((self.breaks[i], self.breaks[i + 1]))
    }

    /// `(g(t), g'(t))`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        let (a, b) = self.piece(t)?;
        let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
        Ok((a + (b - a) * self.shape(s), self.shape_derivative(s)))
    }

    /// `g(t) - alpha0` computed without cancellation next to the breakpoint
    /// `alpha0`.
    pub fn displacement(&self, t: f64, alpha0: f64) -> Result<f64> {
        let (a, b) = self.piece(t)?;
        let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
        if (alpha0 - a).abs() <= (alpha0 - b).abs() {
            Ok((b - a) * self.shape(s) + (a - alpha0))
        } else {
            Ok((b - alpha0) - (b - a) * self.shape(1.0 - s))
        }
    }

    /// Pieces `[a, b]` of the breakpoint partition.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breaks.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Uniform nodes `t_j = a0 + (a1 - a0) j / N`, `j = 1..N`, with equal weights.
pub fn quad_nodes(wc: &WavenumberClass, n_nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_nodes < 2 || n_nodes % 2 != 0 {
        return Err(Error::Config(format!("N must be even and at least 2, got {n_nodes}")));
    }
    let w = wc.width() / n_nodes as f64;
    let nodes = (1..=n_nodes).map(|j| wc.a0 + wc.width() * j as f64 / n_nodes as f64).collect();
    Ok((nodes, vec![w; n_nodes]))
}

/// Values of all cardinal functions `psi_j(t)` of the `n`-node trigonometric
/// interpolation on `(a0, a1]`.
pub fn interp_weights(n: usize, a0: f64, a1: f64, t: f64) -> Vec<C64> {
    let period = a1 - a0;
    let half = (n / 2) as i64;
    let omega = 2.0 * std::f64::consts::PI / period;
    (1..=n)
        .map(|j| {
            let tj = a0 + period * j as f64 / n as f64;
            let mut acc = C64::new(0.0, 0.0);
            for l in (-half + 1)..=half {
                acc += cis(l as f64 * omega * (t - tj));
            }
            acc / n as f64
        })
        .collect()
}

/// Trigonometric interpolant of `samples` (given at the uniform nodes) at `t`.
pub fn interp_eval(samples: &[C64], a0: f64, a1: f64, t: f64) -> C64 {
    interp_weights(samples.len(), a0, a1, t)
        .iter()
        .zip(samples)
        .map(|(w, s)| w * s)
        .sum()
}

/// Everything the solver needs about the quasi-momentum discretization.
#[derive(Clone, Debug)]
pub struct QuasiGrid {
    pub class: WavenumberClass,
    pub g: GMap,
    pub t: Vec<f64>,
    pub weights: Vec<f64>,
    /// `g(t_m)`
    pub alpha: Vec<f64>,
    /// `g'(t_m)`
    pub dg: Vec<f64>,
}

impl QuasiGrid {
    pub fn new(k: f64, lambda: f64, n: usize, n_nodes: usize, cutoff: Cutoff) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config(format!("k must be positive, got {k}")));
        }
        let class = exceptional_set(k, lambda);
        let g = build_g_with(&class, n, cutoff)?;
        let (t, weights) = quad_nodes(&class, n_nodes)?;
        let mut alpha = Vec::with_capacity(n_nodes);
        let mut dg = Vec::with_capacity(n_nodes);
        for &tm in &t {
            let (a, d) = g.eval(tm)?;
            alpha.push(a);
            dg.push(d);
        }
        Ok(QuasiGrid { class, g, t, weights, alpha, dg })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn classification() {
        let wc = exceptional_set(1.0, 2.0 * PI);
        assert_eq!(wc.case, Case::Endpoints);
        assert_eq!(wc.exceptional, vec![0.0, 1.0]);
        let wc = exceptional_set(1.5, 2.0 * PI);
        assert_eq!(wc.case, Case::Endpoints);
        assert_eq!(wc.exceptional, vec![-0.5, 0.5]);
        let wc = exceptional_set(2f64.sqrt(), 2.0 * PI);
        assert_eq!(wc.case, Case::Interior);
        let r = 2f64.sqrt() - 1.0;
        for (a, b) in wc.exceptional.iter().zip([-r, r, 1.0 - r]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalization_constant() {
        assert_eq!(beta_normalization(5), 12012.0);
        assert_eq!(beta_normalization(1), 30.0);
    }

    #[test]
    fn midpoint_values() {
        let g = build_g(&exceptional_set(1.0, 2.0 * PI), 5).unwrap();
        let (v, d) = g.eval(0.5).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        assert!((d - 12012.0 * 0.5f64.powi(12)).abs() < 1e-12);
        assert!(g.eval(1.2).is_err());
    }

    #[test]
    fn node_grid() {
        let wc = exceptional_set(1.0, 2.0 * PI);
        let (t, w) = quad_nodes(&wc, 4).unwrap();
        assert_eq!(t, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(w, vec![0.25; 4]);
        assert!(quad_nodes(&wc, 5).is_err());
        assert!(quad_nodes(&wc, 0).is_err());
        let wc = exceptional_set(1.5, 2.0 * PI);
        assert_eq!(quad_nodes(&wc, 2).unwrap(), (vec![0.0, 0.5], vec![0.5, 0.5]));
    }

    #[test]
    fn exponential_cutoff_is_monotone_bijection() {
        let wc = exceptional_set(2f64.sqrt(), 2.0 * PI);
        let g = build_g_with(&wc, 5, Cutoff::Exponential).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let t = wc.a0 + wc.width() * i as f64 / 1000.0;
            let (v, d) = g.eval(t).unwrap();
            assert!(v >= prev && d >= 0.0);
            prev = v;
        }
        for &s in &wc.exceptional {
            assert!((g.eval(s).unwrap().0 - s).abs() < 1e-12);
        }
    }
}
