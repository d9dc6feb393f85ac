//! Finite-section coupling: the perturbation part of the transformed problem,
//! evaluated on the cells `j = -L+1..=L` and transformed back to the nodes.
//!
//! Apply is three stages per distinct `x1` of the volume quadrature:
//! reconstruct the physical field and its gradient on every cell from the
//! node values (a kernel GEMM), multiply by the coefficient perturbation, and
//! Bloch-transform back to the nodes (a phase GEMM) before testing against
//! the basis.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use super::BlochField;
use crate::geometry::{coefficients_at, SurfacePair};
use crate::mesh::{PeriodicMesh, QuadPoint};
use crate::par::{map_range, Parallelism};
use crate::quad::composite_gauss;
use crate::quasigrid::QuasiGrid;
use crate::{bloch_normalization, cis, Result, C64};

/// Quadrature used for the inverse transform inside the coupling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingRule {
    /// Trigonometric interpolation of `W(g(t)) g'(t)` between the nodes,
    /// integrated against the exact phase. Uniformly accurate in the cell index.
    #[default]
    Interpolated,
    /// Periodic trapezoid rule on the nodes. Aliases on cells far from the
    /// origin once `g' * |j|` exceeds the node spacing.
    Trapezoid,
}

#[derive(Clone, Copy, Debug)]
pub struct KernelOptions {
    pub rule: CouplingRule,
    /// Points per Gauss panel of the `t`-integration.
    pub panel_order: usize,
    /// Multiplies the number of panels.
    pub oversampling: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { rule: CouplingRule::Interpolated, panel_order: 16, oversampling: 1.0 }
    }
}

const CHUNKS: usize = 8;

/// Quadrature points sharing one `x1`.
#[derive(Clone, Debug)]
struct Group {
    start: usize,
    end: usize,
    zeta: f64,
    dzeta: f64,
    /// Cell values: rows `j`, columns nodes `m`.
    kernel: Mat<C64>,
    /// Derivative of the kernel in `x1`.
    kernel_dx: Mat<C64>,
    /// `C exp(i alpha_m (x1 + Lambda j))`, rows `m`, columns `j`.
    phases: Mat<C64>,
    /// `(p, p')` at `x1 + Lambda j`.
    perturbation: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct CouplingOperator {
    pub n_nodes: usize,
    pub n_dofs: usize,
    pub half_width: usize,
    pub rule: CouplingRule,
    k: f64,
    h_blend: f64,
    alpha: Vec<f64>,
    points: Vec<QuadPoint>,
    tri_dofs: Vec<[Option<usize>; 3]>,
    tri_grads: Vec<[[f64; 2]; 3]>,
    groups: Vec<Group>,
    trivial: bool,
    par: Parallelism,
}

fn gemm<L, R>(dst: MatMut<'_, C64>, accumulate: bool, lhs: L, rhs: R)
where
    L: faer::mat::AsMatRef<Rows = usize, Cols = usize>,
    L::T: faer::traits::Conjugate<Canonical = C64>,
    R: faer::mat::AsMatRef<Rows = usize, Cols = usize>,
    R::T: faer::traits::Conjugate<Canonical = C64>,
{
    let accum = if accumulate { Accum::Add } else { Accum::Replace };
    matmul(dst, accum, lhs, rhs, C64::new(1.0, 0.0), Par::Seq);
}

impl CouplingOperator {
    /// Cells `j = -L+1..=L`.
    pub fn cells(&self) -> impl Iterator<Item = i64> {
        let l = self.half_width as i64;
        -l + 1..=l
    }

    pub fn new(
        mesh: &PeriodicMesh,
        sp: &SurfacePair,
        grid: &QuasiGrid,
        half_width: usize,
        k: f64,
        opts: KernelOptions,
        par: Parallelism,
    ) -> Result<Self> {
        super::check_cells(half_width)?;
        let lambda = mesh.lambda;
        let l = half_width as i64;
        let trivial = sp.is_unperturbed();
        if !trivial {
            sp.check_perturbation(-0.5 * lambda - lambda * (l - 1) as f64, 0.5 * lambda + lambda * l as f64)?;
        }
        let n = grid.len();
        let cells: Vec<i64> = (-l + 1..=l).collect();

        let mut points = mesh.p1_quadrature();
        points.sort_by(|a, b| a.x[0].total_cmp(&b.x[0]));
        let mut bounds = Vec::new();
        let mut start = 0;
        for i in 1..=points.len() {
            if i == points.len() || points[i].x[0].to_bits() != points[start].x[0].to_bits() {
                bounds.push((start, i));
                start = i;
            }
        }

        let c_norm = bloch_normalization(lambda);
        let t_rule = if opts.rule == CouplingRule::Interpolated {
            Some(TRule::new(grid, lambda * (l as f64 + 0.5), opts, c_norm))
        } else {
            None
        };
        let build = |gi: usize| -> Group {
            let (s, e) = bounds[gi];
            let x1 = points[s].x[0];
            let ys: Vec<f64> = cells.iter().map(|&j| x1 + lambda * j as f64).collect();
            let (kernel, kernel_dx) = match &t_rule {
                Some(tr) => tr.kernels(&ys),
                None => {
                    let kern = Mat::from_fn(ys.len(), n, |r, m| {
                        cis(-grid.alpha[m] * ys[r]) * (c_norm * grid.weights[m] * grid.dg[m])
                    });
                    let dx = Mat::from_fn(ys.len(), n, |r, m| kern[(r, m)] * C64::new(0.0, -grid.alpha[m]));
                    (kern, dx)
                }
            };
            let phases = Mat::from_fn(n, ys.len(), |m, r| cis(grid.alpha[m] * ys[r]) * c_norm);
            let perturbation = ys.iter().map(|&y| (sp.p.value(y), sp.p.derivative(y))).collect();
            Group {
                start: s,
                end: e,
                zeta: sp.zeta.value(x1),
                dzeta: sp.zeta.derivative(x1),
                kernel,
                kernel_dx,
                phases,
                perturbation,
            }
        };
        let groups = if trivial { Vec::new() } else { map_range(par, bounds.len(), build) };

        let tri_dofs = mesh.triangles.iter().map(|t| t.map(|v| mesh.dof_of_vertex[v])).collect();
        let tri_grads = (0..mesh.triangles.len()).map(|t| mesh.gradients(t)).collect();
        Ok(CouplingOperator {
            n_nodes: n,
            n_dofs: mesh.n_dofs,
            half_width,
            rule: opts.rule,
            k,
            h_blend: sp.h_blend,
            alpha: grid.alpha.clone(),
            points,
            tri_dofs,
            tri_grads,
            groups,
            trivial,
            par,
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.trivial
    }

    /// Reconstructed field and gradient on the cells for the group's points:
    /// the kernel rows of the inverse transform at `x1 + Lambda j`.
    pub fn kernel_at_group(&self, gi: usize) -> (f64, MatRef<'_, C64>, MatRef<'_, C64>) {
        let g = &self.groups[gi];
        (self.points[g.start].x[0], g.kernel.as_ref(), g.kernel_dx.as_ref())
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Coefficient perturbation on the cells: turns `[u, d1 u, d2 u]` rows into
    /// `[-k^2 (c-1) u, (A-I) grad u]` in place.
    fn perturb(&self, g: &Group, x2: &[f64], u: &mut Mat<C64>) {
        let ng = x2.len();
        let k2 = self.k * self.k;
        for (q, &h) in x2.iter().enumerate() {
            for (r, &(p, dp)) in g.perturbation.iter().enumerate() {
                let c = coefficients_at(g.zeta, g.dzeta, p, dp, self.h_blend, h);
                let (u0, u1, u2) = (u[(r, q)], u[(r, ng + q)], u[(r, 2 * ng + q)]);
                u[(r, q)] = u0 * (-k2 * (c.c - 1.0));
                u[(r, ng + q)] = u1 * (c.a11 - 1.0) + u2 * c.a12;
                u[(r, 2 * ng + q)] = u1 * c.a12 + u2 * (c.a22 - 1.0);
            }
        }
    }

    /// Node values, `x1`- and `x2`-derivatives of `field` at the group's points,
    /// as columns `[values | d1 | d2]`.
    fn sample(&self, g: &Group, field: &BlochField) -> Mat<C64> {
        let ng = g.end - g.start;
        let mut v = Mat::<C64>::zeros(self.n_nodes, 3 * ng);
        for m in 0..self.n_nodes {
            let w = field.node(m);
            for q in 0..ng {
                let pt = &self.points[g.start + q];
                let (dofs, grads) = (&self.tri_dofs[pt.triangle], &self.tri_grads[pt.triangle]);
                let mut acc = [C64::new(0.0, 0.0); 3];
                for a in 0..3 {
                    if let Some(d) = dofs[a] {
                        acc[0] += w[d] * pt.bary[a];
                        acc[1] += w[d] * grads[a][0];
                        acc[2] += w[d] * grads[a][1];
                    }
                }
                v[(m, q)] = acc[0];
                v[(m, ng + q)] = acc[1];
                v[(m, 2 * ng + q)] = acc[2];
            }
        }
        v
    }

    fn forward_group(&self, g: &Group, w: &BlochField, out: &mut BlochField) {
        let ng = g.end - g.start;
        let nc = g.perturbation.len();
        let v = self.sample(g, w);
        let mut u = Mat::<C64>::zeros(nc, 3 * ng);
        gemm(u.as_mut(), false, g.kernel.as_ref(), v.as_ref());
        gemm(u.as_mut().subcols_mut(ng, ng), true, g.kernel_dx.as_ref(), v.as_ref().subcols(0, ng));
        let x2: Vec<f64> = self.points[g.start..g.end].iter().map(|p| p.x[1]).collect();
        self.perturb(g, &x2, &mut u);
        let mut p = Mat::<C64>::zeros(self.n_nodes, 3 * ng);
        gemm(p.as_mut(), false, g.phases.as_ref(), u.as_ref());
        for m in 0..self.n_nodes {
            let ia = C64::new(0.0, self.alpha[m]);
            let r = out.node_mut(m);
            for q in 0..ng {
                let pt = &self.points[g.start + q];
                let (dofs, grads) = (&self.tri_dofs[pt.triangle], &self.tri_grads[pt.triangle]);
                let (p0, p1, p2) = (p[(m, q)], p[(m, ng + q)], p[(m, 2 * ng + q)]);
                for a in 0..3 {
                    if let Some(d) = dofs[a] {
                        let phi = pt.bary[a];
                        r[d] += (p1 * (ia * phi + grads[a][0]) + p2 * grads[a][1] + p0 * phi) * pt.weight;
                    }
                }
            }
        }
    }

    fn adjoint_group(&self, g: &Group, z: &BlochField, out: &mut BlochField) {
        let ng = g.end - g.start;
        let nc = g.perturbation.len();
        let mut v = self.sample(g, z);
        for m in 0..self.n_nodes {
            let ia = C64::new(0.0, self.alpha[m]);
            for q in 0..ng {
                let w = self.points[g.start + q].weight;
                let z0 = v[(m, q)];
                v[(m, q)] = z0 * w;
                v[(m, ng + q)] = (v[(m, ng + q)] - ia * z0) * w;
                v[(m, 2 * ng + q)] *= w;
            }
        }
        let mut y = Mat::<C64>::zeros(nc, 3 * ng);
        gemm(y.as_mut(), false, g.phases.adjoint(), v.as_ref());
        let x2: Vec<f64> = self.points[g.start..g.end].iter().map(|p| p.x[1]).collect();
        self.perturb(g, &x2, &mut y);
        let mut x = Mat::<C64>::zeros(self.n_nodes, 3 * ng);
        gemm(x.as_mut(), false, g.kernel.adjoint(), y.as_ref());
        gemm(x.as_mut().subcols_mut(0, ng), true, g.kernel_dx.adjoint(), y.as_ref().subcols(ng, ng));
        for m in 0..self.n_nodes {
            let r = out.node_mut(m);
            for q in 0..ng {
                let pt = &self.points[g.start + q];
                let (dofs, grads) = (&self.tri_dofs[pt.triangle], &self.tri_grads[pt.triangle]);
                let (x0, x1, x2) = (x[(m, q)], x[(m, ng + q)], x[(m, 2 * ng + q)]);
                for a in 0..3 {
                    if let Some(d) = dofs[a] {
                        r[d] += x0 * pt.bary[a] + x1 * grads[a][0] + x2 * grads[a][1];
                    }
                }
            }
        }
    }

    fn run(&self, input: &BlochField, adjoint: bool) -> BlochField {
        let mut total = BlochField::zeros(self.n_nodes, self.n_dofs);
        if self.trivial || self.groups.is_empty() {
            return total;
        }
        let chunks = CHUNKS.min(self.groups.len());
        let per = self.groups.len().div_ceil(chunks);
        let partial = map_range(self.par, chunks, |c| {
            let mut out = BlochField::zeros(self.n_nodes, self.n_dofs);
            let end = ((c + 1) * per).min(self.groups.len());
            for g in &self.groups[(c * per).min(end)..end] {
                if adjoint {
                    self.adjoint_group(g, input, &mut out);
                } else {
                    self.forward_group(g, input, &mut out);
                }
            }
            out
        });
        for p in &partial {
            for (t, v) in total.data.iter_mut().zip(&p.data) {
                *t += v;
            }
        }
        total
    }

    /// Coupling residual `B W`.
    pub fn apply(&self, w: &BlochField) -> BlochField {
        self.run(w, false)
    }

    /// Adjoint `B^H Z` with respect to `sum_m sum_l conj(.)`.
    pub fn apply_adjoint(&self, z: &BlochField) -> BlochField {
        self.run(z, true)
    }
}

/// Inverse-transform kernel: `u(y) = sum_m kernel[(r, m)] W_m` at `x1 = ys[r]`
/// for the periodic parts `W_m` (rows follow `ys`, columns the nodes).
pub fn inverse_kernel(grid: &QuasiGrid, lambda: f64, ys: &[f64], opts: KernelOptions) -> Mat<C64> {
    let c_norm = bloch_normalization(lambda);
    match opts.rule {
        CouplingRule::Trapezoid => Mat::from_fn(ys.len(), grid.len(), |r, m| {
            cis(-grid.alpha[m] * ys[r]) * (c_norm * grid.weights[m] * grid.dg[m])
        }),
        CouplingRule::Interpolated => {
            let y_max = ys.iter().fold(0.0f64, |a, y| a.max(y.abs()));
            TRule::new(grid, y_max, opts, c_norm).kernels(ys).0
        }
    }
}

/// Quadrature in `t` for the interpolated inverse transform.
struct TRule {
    /// Rows: quadrature points; columns: nodes. Entry
    /// `C g'(t_m) w_q psi_m(t_q)`.
    weights: Mat<C64>,
    /// Same times `-i g(t_q)`.
    weights_dx: Mat<C64>,
    g: Vec<f64>,
}

impl TRule {
    fn new(grid: &QuasiGrid, y_max: f64, opts: KernelOptions, c_norm: f64) -> Self {
        let n = grid.len();
        let (a0, a1) = (grid.class.a0, grid.class.a1);
        let period = a1 - a0;
        // cycles of the integrand over the dual cell: the interpolant's band
        // plus the phase exp(-i g(t) y) with |y| <= y_max and g' < 3
        let lambda = 2.0 * std::f64::consts::PI / period;
        let cycles = n as f64 / 2.0 + 3.0 * (y_max.abs() / lambda + 1.0) + 2.0;
        let mut pts = Vec::new();
        for (a, b) in grid.g.pieces() {
            let panels = (opts.oversampling * cycles * (b - a) / period).ceil() as usize + 2;
            pts.extend(composite_gauss(opts.panel_order, panels, a, b));
        }
        let omega = 2.0 * std::f64::consts::PI / period;
        let half = (n / 2) as i64;
        let g: Vec<f64> = pts.iter().map(|&(t, _)| grid.g.eval(t).map(|v| v.0).unwrap_or(f64::NAN)).collect();
        let weights = Mat::from_fn(pts.len(), n, |q, m| {
            let theta = omega * (pts[q].0 - grid.t[m]);
            let step = cis(theta);
            let mut z = cis((1 - half) as f64 * theta);
            let mut acc = C64::new(0.0, 0.0);
            for _ in 0..n {
                acc += z;
                z *= step;
            }
            acc * (c_norm * grid.dg[m] * pts[q].1 / n as f64)
        });
        let weights_dx = Mat::from_fn(pts.len(), n, |q, m| weights[(q, m)] * C64::new(0.0, -g[q]));
        TRule { weights, weights_dx, g }
    }

    fn kernels(&self, ys: &[f64]) -> (Mat<C64>, Mat<C64>) {
        let phase = Mat::from_fn(ys.len(), self.g.len(), |r, q| cis(-self.g[q] * ys[r]));
        let mut k = Mat::<C64>::zeros(ys.len(), self.weights.ncols());
        let mut kd = Mat::<C64>::zeros(ys.len(), self.weights.ncols());
        gemm(k.as_mut(), false, phase.as_ref(), self.weights.as_ref());
        gemm(kd.as_mut(), false, phase.as_ref(), self.weights_dx.as_ref());
        (k, kd)
    }
}
