//! Back to physical space: inverse Bloch reconstruction, top-edge error
//! norms and convergence-slope fits.

use crate::assembly::{inverse_kernel, BlochField, CouplingRule, KernelOptions};
use crate::mesh::PeriodicMesh;
use crate::par::{map_range, Parallelism};
use crate::quad::gauss_legendre;
use crate::quasigrid::QuasiGrid;
use crate::{bloch_normalization, cis, Error, Result, C64};

/// Piecewise 4-point Gauss rule on the top edge, with the interpolation of
/// the periodic top-edge hats at each point.
#[derive(Clone, Debug)]
pub struct TopEdgeSampler {
    pub x1: Vec<f64>,
    pub weights: Vec<f64>,
    /// `(left dof, right dof, weight of the right one)`.
    hats: Vec<(usize, usize, f64)>,
    pub lambda: f64,
    pub h_top: f64,
}

impl TopEdgeSampler {
    pub fn new(mesh: &PeriodicMesh) -> Self {
        let ne = mesh.n_edge();
        let d = mesh.lambda / ne as f64;
        let rule = gauss_legendre(4, 0.0, 1.0);
        let mut x1 = Vec::with_capacity(4 * ne);
        let mut weights = Vec::with_capacity(4 * ne);
        let mut hats = Vec::with_capacity(4 * ne);
        for i in 0..ne {
            for &(s, w) in &rule {
                x1.push(mesh.top_x1[i] + s * d);
                weights.push(w * d);
                hats.push((mesh.top_dofs[i], mesh.top_dofs[(i + 1) % ne], s));
            }
        }
        TopEdgeSampler { x1, weights, hats, lambda: mesh.lambda, h_top: mesh.h_top }
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    /// Values of one nodal field at the sample points.
    pub fn trace(&self, values: &[C64]) -> Vec<C64> {
        self.hats.iter().map(|&(a, b, s)| values[a] * (1.0 - s) + values[b] * s).collect()
    }

    /// Physical sample points of cell `j`.
    pub fn points(&self, cell: i64) -> Vec<[f64; 2]> {
        self.x1.iter().map(|&x| [x + self.lambda * cell as f64, self.h_top]).collect()
    }
}

/// `u(x + Lambda j)` at the top-edge samples from the node fields.
pub fn reconstruct_top(
    field: &BlochField,
    grid: &QuasiGrid,
    sampler: &TopEdgeSampler,
    cell: i64,
    rule: CouplingRule,
) -> Vec<C64> {
    let ys: Vec<f64> = sampler.x1.iter().map(|&x| x + sampler.lambda * cell as f64).collect();
    let kernel = inverse_kernel(grid, sampler.lambda, &ys, KernelOptions { rule, ..Default::default() });
    let traces: Vec<Vec<C64>> = (0..field.n_nodes).map(|m| sampler.trace(field.node(m))).collect();
    (0..ys.len())
        .map(|q| (0..field.n_nodes).map(|m| kernel[(q, m)] * traces[m][q]).sum())
        .collect()
}

/// `u(x + Lambda j)` at arbitrary points `x` of the periodic cell by the
/// node trapezoid rule `C sum_m w_m g'(t_m) W_m(x) exp(-i g(t_m)(x1 + Lambda j))`.
pub fn reconstruct(
    field: &BlochField,
    grid: &QuasiGrid,
    mesh: &PeriodicMesh,
    cell: i64,
    points: &[[f64; 2]],
    par: Parallelism,
) -> Result<Vec<C64>> {
    reconstruct_with(field, grid, mesh, cell, points, CouplingRule::Trapezoid, par)
}

/// [`reconstruct`] with a choice of inverse-transform quadrature.
pub fn reconstruct_with(
    field: &BlochField,
    grid: &QuasiGrid,
    mesh: &PeriodicMesh,
    cell: i64,
    points: &[[f64; 2]],
    rule: CouplingRule,
    par: Parallelism,
) -> Result<Vec<C64>> {
    let ys: Vec<f64> = points.iter().map(|x| x[0] + mesh.lambda * cell as f64).collect();
    let kernel = inverse_kernel(grid, mesh.lambda, &ys, KernelOptions { rule, ..Default::default() });
    let values = map_range(par, points.len(), |q| -> Result<C64> {
        let x = points[q];
        let (t, bary) = mesh
            .locate(x)
            .ok_or_else(|| Error::Domain(format!("({}, {}) is not in the mesh", x[0], x[1])))?;
        let mut acc = C64::new(0.0, 0.0);
        for m in 0..field.n_nodes {
            let w = field.node(m);
            let mut v = C64::new(0.0, 0.0);
            for (a, &vert) in mesh.triangles[t].iter().enumerate() {
                if let Some(d) = mesh.dof_of_vertex[vert] {
                    v += w[d] * bary[a];
                }
            }
            acc += kernel[(q, m)] * v;
        }
        Ok(acc)
    });
    values.into_iter().collect()
}

/// Periodic part of the Bloch transform at quasi-momentum `alpha` from the
/// values `u(x1 + Lambda j)` on cells `j`: `C sum_j u_j exp(i alpha (x1 + Lambda j))`.
pub fn forward_transform(alpha: f64, lambda: f64, x1: f64, cells: &[(i64, C64)]) -> C64 {
    let c = bloch_normalization(lambda);
    cells
        .iter()
        .map(|&(j, u)| u * cis(alpha * (x1 + lambda * j as f64)))
        .sum::<C64>()
        * c
}

/// `|num - ref| / |ref|` in the weighted `L2` norm of the samples.
pub fn relative_l2_error(num: &[C64], reference: &[C64], weights: &[f64]) -> Result<f64> {
    let (mut diff, mut norm) = (0.0, 0.0);
    for ((a, b), w) in num.iter().zip(reference).zip(weights) {
        diff += w * (a - b).norm_sqr();
        norm += w * b.norm_sqr();
    }
    if norm == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((diff / norm).sqrt())
}

/// Plateau factor: trailing points within this factor of the last error.
const PLATEAU: f64 = 3.0;

/// Points kept for the slope fit: a trailing run of at least two points
/// within [`PLATEAU`] of the final error is a plateau, of which only the
/// first point is kept.
pub fn usable_points(table: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let Some(&(_, last)) = table.last() else { return Vec::new() };
    let mut start = table.len();
    while start > 0 && table[start - 1].1 <= PLATEAU * last {
        start -= 1;
    }
    if table.len() - start >= 2 {
        table[..=start].to_vec()
    } else {
        table.to_vec()
    }
}

/// Least-squares slope of `log error` against `log N` over the usable points.
pub fn fit_convergence_slope(table: &[(f64, f64)]) -> Result<f64> {
    let pts = usable_points(table);
    if pts.len() < 3 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|&(n, e)| (n.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
