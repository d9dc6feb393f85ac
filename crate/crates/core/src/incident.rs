//! Herglotz incident wave, its Bloch transform, the boundary data on the top
//! edge and closed-form fields for flat surfaces.
//!
//! Bloch transforms use the normalization `sqrt(Lambda / 2 pi)`; for the
//! `2 pi`-periodic setting the prefactors below are all one.

use crate::quad::composite_gauss;
use crate::{bloch_normalization, cis, C64};

const SUPPORT: (f64, f64) = (0.5, 1.3);

/// Even density supported on `0.5 < |t| < 1.3`, sup-normalized to one.
pub fn herglotz_density(t: f64) -> f64 {
    let a = t.abs();
    if a <= SUPPORT.0 || a >= SUPPORT.1 {
        return 0.0;
    }
    let half_width = 0.5 * (SUPPORT.1 - SUPPORT.0);
    ((a - SUPPORT.0) * (a - SUPPORT.1) / (half_width * half_width)).powi(6)
}

/// `\int_{-pi/2}^{pi/2} f(t) h(t) dt` for a smooth oscillatory `f`, doubling
/// the composite rule until two levels agree to `1e-13`.
fn integrate_density(scale: f64, f: impl Fn(f64) -> C64) -> C64 {
    let mut panels = 4 + (scale * (SUPPORT.1 - SUPPORT.0) / 2.0).ceil() as usize;
    let eval = |panels: usize| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (lo, hi) in [(-SUPPORT.1, -SUPPORT.0), SUPPORT] {
            for (t, w) in composite_gauss(16, panels, lo, hi) {
                acc += f(t) * (w * herglotz_density(t));
            }
        }
        acc
    };
    let mut prev = eval(panels);
    for _ in 0..8 {
        panels *= 2;
        let next = eval(panels);
        if (next - prev).norm() <= 1e-13 * (1.0 + next.norm()) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Incident field `\int e^{ik(x1 sin t - x2 cos t)} h(t) dt`.
pub fn herglotz_field(x: [f64; 2], k: f64) -> C64 {
    let scale = k * x[0].hypot(x[1]);
    integrate_density(scale, |t| cis(k * (x[0] * t.sin() - x[1] * t.cos())))
}

/// Total field above a flat Dirichlet line at height `c`: the incident wave
/// minus its mirror image.
pub fn exact_flat_total_at(x: [f64; 2], k: f64, c: f64) -> C64 {
    let scale = k * x[0].hypot(x[1]).max(x[0].hypot(x[1] - 2.0 * c));
    integrate_density(scale, |t| {
        cis(k * (x[0] * t.sin() - x[1] * t.cos())) - cis(k * (x[0] * t.sin() + (x[1] - 2.0 * c) * t.cos()))
    })
}

/// Total field for the perturbed flat surface at height 1.1.
pub fn exact_flat_total(x: [f64; 2], k: f64) -> C64 {
    exact_flat_total_at(x, k, 1.1)
}

/// Propagating lattice modes for quasi-momentum `alpha`: `(xi, sqrt(k^2 - xi^2), h(arcsin(xi/k)))`
/// with `xi = Lambda* j - alpha`, skipping modes outside the density support.
fn modes(alpha: f64, k: f64, lambda: f64) -> impl Iterator<Item = (f64, f64, f64)> {
    let ls = 2.0 * std::f64::consts::PI / lambda;
    let lo = ((alpha - k) / ls).floor() as i64;
    let hi = ((alpha + k) / ls).ceil() as i64;
    (lo..=hi).filter_map(move |j| {
        let xi = ls * j as f64 - alpha;
        if xi.abs() >= k {
            return None;
        }
        let h = herglotz_density((xi / k).asin());
        (h != 0.0).then(|| (xi, (k * k - xi * xi).sqrt(), h))
    })
}

/// Bloch transform of the incident field (quasi-periodic in `x1`).
pub fn bloch_incident(alpha: f64, x: [f64; 2], k: f64, lambda: f64) -> C64 {
    let scale = 1.0 / bloch_normalization(lambda);
    modes(alpha, k, lambda)
        .map(|(xi, b, h)| cis(xi * x[0] - b * x[1]) * (scale * h / b))
        .sum()
}

/// Boundary data `F(alpha, x1) = d2 Ju - T+ Ju` at height `h_top`.
pub fn rhs_data_f(alpha: f64, x1: f64, k: f64, h_top: f64, lambda: f64) -> C64 {
    let scale = 1.0 / bloch_normalization(lambda);
    modes(alpha, k, lambda)
        .map(|(xi, b, h)| C64::new(0.0, -2.0) * cis(xi * x1 - b * h_top) * (scale * h))
        .sum()
}

/// Bloch transform of the flat-surface total field with the Dirichlet line at
/// height `c` (quasi-periodic in `x1`).
pub fn exact_flat_bloch_at(alpha: f64, x: [f64; 2], k: f64, lambda: f64, c: f64) -> C64 {
    let scale = 1.0 / bloch_normalization(lambda);
    modes(alpha, k, lambda)
        .map(|(xi, b, h)| {
            (cis(xi * x[0] - b * x[1]) - cis(xi * x[0] + b * (x[1] - 2.0 * c))) * (scale * h / b)
        })
        .sum()
}

pub fn exact_flat_bloch(alpha: f64, x: [f64; 2], k: f64) -> C64 {
    exact_flat_bloch_at(alpha, x, k, 2.0 * std::f64::consts::PI, 1.1)
}

/// Half-width of the band around a grazing mode `|xi| = k` in which that
/// mode carries no density: `|xi| > k sin(1.3)`.
pub fn vanishing_band(k: f64) -> f64 {
    k * (1.0 - SUPPORT.1.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_values() {
        assert_eq!(herglotz_density(0.4), 0.0);
        assert!((herglotz_density(0.9) - 1.0).abs() < 1e-15);
        assert!((herglotz_density(1.0) - 0.15f64.powi(6) / 0.4f64.powi(12)).abs() < 1e-14);
        assert_eq!(herglotz_density(-1.0), herglotz_density(1.0));
    }

    #[test]
    fn single_mode_at_alpha_point_one() {
        let v = bloch_incident(0.1, [0.0, 0.0], 1.0, 2.0 * std::f64::consts::PI);
        let h = herglotz_density(0.9f64.asin());
        assert!((v.norm() - h / 0.19f64.sqrt()).abs() < 1e-14);
        let f = rhs_data_f(0.1, 0.7, 1.0, 3.0, 2.0 * std::f64::consts::PI);
        assert!((f.norm() - 2.0 * h).abs() < 1e-14, "{}", f.norm());
    }
}
