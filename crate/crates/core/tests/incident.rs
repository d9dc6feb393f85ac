use bloch_fem::dtn::beta;
use bloch_fem::incident::{
    bloch_incident, exact_flat_bloch, exact_flat_total, herglotz_density, herglotz_field, rhs_data_f, vanishing_band,
};
use bloch_fem::quasigrid::exceptional_set;
use bloch_fem::C64;
use std::f64::consts::{PI, SQRT_2};

const LAMBDA: f64 = 2.0 * PI;

/// Composite Simpson with `n` intervals over both support intervals.
fn simpson_over_support(f: impl Fn(f64) -> C64, n: usize) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (a, b) in [(-1.3, -0.5), (0.5, 1.3)] {
        let h = (b - a) / n as f64;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let t = a + h * i as f64;
            let d = {
                let s = t.abs();
                ((s - 0.5) * (s - 1.3) / 0.16).powi(6)
            };
            acc += f(t) * (w * d * h / 3.0);
        }
    }
    acc
}

fn cis(x: f64) -> C64 {
    C64::new(x.cos(), x.sin())
}

#[test]
fn density() {
    assert_eq!(herglotz_density(0.4), 0.0);
    assert_eq!(herglotz_density(1.3), 0.0);
    assert!((herglotz_density(0.9) - 1.0).abs() < 1e-15);
    let mut max = 0.0f64;
    for i in 0..100_000 {
        max = max.max(herglotz_density(-1.5 + 3.0 * i as f64 / 99_999.0));
    }
    assert!(max <= 1.0 && max > 1.0 - 1e-8);
    assert!((herglotz_density(1.0) - 0.15f64.powi(6) / 0.4f64.powi(12)).abs() < 1e-14);
    for t in [0.55, 0.8, 1.2] {
        assert_eq!(herglotz_density(-t), herglotz_density(t));
    }
}

#[test]
fn herglotz_field_matches_simpson() {
    for (x, k) in [([0.0, 0.0], 1.0), ([PI, 3.0], 1.0), ([-2.0, 1.7], SQRT_2)] {
        let oracle = simpson_over_support(|t| cis(k * (x[0] * t.sin() - x[1] * t.cos())), 10_000);
        assert!((herglotz_field(x, k) - oracle).norm() < 1e-10, "{x:?}");
    }
    let v = herglotz_field([0.0, 0.0], 1.0);
    assert!(v.re > 0.0 && v.im.abs() < 1e-15);
    let a = herglotz_field([1.3, 2.2], 1.0);
    let b = herglotz_field([-1.3, 2.2], 1.0);
    assert!((a - b).norm() < 1e-13);
}

#[test]
fn incident_satisfies_helmholtz() {
    let k = SQRT_2;
    let x = [0.4, 2.0];
    // |d^4 u| <= k^4 * int h, so the five-point error is below step^2 k^4 int h / 6
    let mass = simpson_over_support(|_| C64::new(1.0, 0.0), 10_000).re;
    let mut prev = f64::MAX;
    for step in [0.1, 0.05, 0.025] {
        let u = |dx: f64, dy: f64| herglotz_field([x[0] + dx, x[1] + dy], k);
        let lap = (u(step, 0.0) + u(-step, 0.0) + u(0.0, step) + u(0.0, -step) - u(0.0, 0.0) * 4.0) / (step * step);
        let res = (lap + u(0.0, 0.0) * (k * k)).norm();
        assert!(res < 1.01 * step * step * k.powi(4) * mass / 6.0, "{res:e}");
        assert!(res < prev / 3.0);
        prev = res;
    }
}

#[test]
fn bloch_incident_terms() {
    let k = 1.0;
    let v = bloch_incident(0.1, [0.7, 2.0], k, LAMBDA);
    let xi: f64 = 0.9;
    let b = (1.0 - xi * xi).sqrt();
    let term = cis(xi * 0.7 - b * 2.0) * (herglotz_density(xi.asin()) / b);
    assert!((v - term).norm() < 1e-14);
    assert!((v.norm() - herglotz_density(0.9f64.asin()) / 0.19f64.sqrt()).abs() < 1e-14);
    // alpha = 0.45: only j = 1 is inside the support
    let v = bloch_incident(0.45, [0.0, 0.0], k, LAMBDA);
    let xi: f64 = 0.55;
    assert!((v.norm() - herglotz_density(xi.asin()) / (1.0 - xi * xi).sqrt()).abs() < 1e-14);
    assert_eq!(herglotz_density((-0.45f64).asin()), 0.0);
    for alpha in [0.0005, 0.9995, -0.0003] {
        assert_eq!(bloch_incident(alpha, [0.3, 2.0], k, LAMBDA), C64::new(0.0, 0.0));
    }
}

/// Fourier coefficients of a quasi-periodic function on the top edge and
/// the DtN map applied through them.
fn dtn_apply(f: impl Fn(f64) -> C64, alpha: f64, k: f64, x1: f64) -> C64 {
    let n = 256;
    let mut acc = C64::new(0.0, 0.0);
    for j in -8i64..=8 {
        let xi = j as f64 - alpha;
        let mut c = C64::new(0.0, 0.0);
        for i in 0..n {
            let x = -PI + LAMBDA * i as f64 / n as f64;
            c += f(x) * cis(-xi * x);
        }
        c = c / n as f64;
        acc += beta(k, xi) * c * cis(xi * x1);
    }
    acc
}

#[test]
fn boundary_data_oracle() {
    let h_top = 3.0;
    for (alpha, k) in [(0.1, 1.0), (0.3, SQRT_2), (-0.2, 1.5)] {
        for x1 in [-1.0, 0.4, 2.5] {
            let step = 1e-4;
            let d2 = (bloch_incident(alpha, [x1, h_top + step], k, LAMBDA)
                - bloch_incident(alpha, [x1, h_top - step], k, LAMBDA))
                / (2.0 * step);
            let t = dtn_apply(|x| bloch_incident(alpha, [x, h_top], k, LAMBDA), alpha, k, x1);
            let f = rhs_data_f(alpha, x1, k, h_top, LAMBDA);
            assert!((d2 - t - f).norm() < 1e-8, "alpha {alpha} k {k}: {} vs {f}", d2 - t);
        }
    }
    let f = rhs_data_f(0.1, 0.7, 1.0, 3.0, LAMBDA);
    assert!((f.norm() - 2.0 * herglotz_density(0.9f64.asin())).abs() < 1e-14);
    let phase = f / C64::new(0.0, -1.0) / cis(0.9 * 0.7 - 0.19f64.sqrt() * 3.0);
    assert!(phase.im.abs() < 1e-14 && phase.re > 0.0);
    assert!((0.19f64.sqrt() * 3.0 - 1.3076697).abs() < 1e-7);
    assert_eq!(rhs_data_f(0.999, 0.3, 1.0, 3.0, LAMBDA), C64::new(0.0, 0.0));
    // one propagating mode in the support: modulus independent of x1
    let m0 = rhs_data_f(0.45, 0.0, 1.0, 3.0, LAMBDA).norm();
    for x1 in [-2.0, 1.0, 3.0] {
        assert!((rhs_data_f(0.45, x1, 1.0, 3.0, LAMBDA).norm() - m0).abs() < 1e-14);
    }
}

#[test]
fn vanishing_band_near_exceptional_points() {
    for k in [1.0, SQRT_2, 1.5] {
        let wc = exceptional_set(k, LAMBDA);
        let delta = vanishing_band(k);
        // independent arcsin arithmetic: a mode with |xi| in (k sin 1.3, k] carries no density
        assert!((delta - (k - k * 1.3f64.sin())).abs() < 1e-15);
        for &a0 in &wc.exceptional {
            for i in 1..50 {
                let alpha = a0 + delta * (-1.0 + 2.0 * i as f64 / 50.0) * 0.99;
                for x1 in [-1.0, 0.5] {
                    assert_eq!(rhs_data_f(alpha, x1, k, 3.0, LAMBDA), C64::new(0.0, 0.0), "k {k} alpha {alpha}");
                }
            }
        }
    }
}

#[test]
fn flat_total_field() {
    for x1 in [-3.0, 0.0, 1.7] {
        assert!(exact_flat_total([x1, 1.1], 1.0).norm() < 1e-13);
        let a = exact_flat_total([x1, 2.4], 1.0);
        let b = exact_flat_total([-x1, 2.4], 1.0);
        assert!((a - b).norm() < 1e-13);
    }
    let oracle = simpson_over_support(
        |t| cis(1.0 * (-3.0 * t.cos())) - cis(1.0 * ((3.0 - 2.2) * t.cos())),
        10_000,
    );
    assert!((exact_flat_total([0.0, 3.0], 1.0) - oracle).norm() < 1e-10);
    // reflection identity: incident minus its mirror in x2 = 1.1
    for x in [[0.3, 2.5], [-1.0, 1.6], [2.0, 2.95]] {
        let mirror = herglotz_field([x[0], 2.2 - x[1]], 1.0);
        assert!((exact_flat_total(x, 1.0) - (herglotz_field(x, 1.0) - mirror)).norm() < 1e-12);
    }
}

#[test]
fn flat_bloch_field() {
    for x1 in [-2.0, 0.0, 1.0] {
        assert!(exact_flat_bloch(0.3, [x1, 1.1], 1.0).norm() < 1e-14);
    }
    assert_eq!(exact_flat_bloch(0.0002, [0.1, 2.0], 1.0), C64::new(0.0, 0.0));
    // inverse transform over the dual cell with 64 nodes
    let x = [0.3, 2.5];
    let n = 64;
    let mut u = C64::new(0.0, 0.0);
    for m in 1..=n {
        let alpha = m as f64 / n as f64;
        u += exact_flat_bloch(alpha, x, 1.0) / n as f64;
    }
    assert!((u - exact_flat_total(x, 1.0)).norm() < 1e-6);
}
