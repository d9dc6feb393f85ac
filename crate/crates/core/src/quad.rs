//! Gauss-Legendre rules on intervals.

use gauss_quad::legendre::GaussLegendre;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[a, b]`,
/// sorted by node.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(n.max(2)).expect("degree >= 2");
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut pts: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    pts
}

/// Composite rule: `panels` equal panels of `order` points each on `[a, b]`.
pub fn composite_gauss(order: usize, panels: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let reference = gauss_legendre(order, -1.0, 1.0);
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + width * p as f64;
        for &(x, w) in &reference {
            out.push((lo + 0.5 * width * (x + 1.0), 0.5 * width * w));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let r = gauss_legendre(5, 0.0, 2.0);
        let s: f64 = r.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let c = composite_gauss(8, 7, -1.0, 3.0);
        let s: f64 = c.iter().map(|(x, w)| w * x.cos()).sum();
        assert!((s - (3f64.sin() + 1f64.sin())).abs() < 1e-12);
    }
}
