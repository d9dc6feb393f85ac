//! Coupled solve: block-diagonal sparse node systems plus the dense
//! finite-section coupling, by right-preconditioned GMRES with the exact
//! block inverse as preconditioner.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::MatMut;

use crate::assembly::{BlochField, CouplingOperator, NodeSystem};
use crate::par::{map_range, Parallelism};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Krylov basis vectors kept before switching to the stationary iteration.
    pub krylov_max_vectors: usize,
    /// Memory budget for stored factorizations; nodes beyond it are
    /// refactored on every preconditioner application.
    pub factor_budget_bytes: usize,
    pub par: Parallelism,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iterations: 200,
            krylov_max_vectors: 60,
            factor_budget_bytes: 1_500_000_000,
            par: Parallelism::Rayon,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    /// Operator applications, counting the initial block solve.
    pub iterations: usize,
    pub krylov_iterations: usize,
    pub stationary_iterations: usize,
    /// `|K W + B W - F| / |F|` of the returned field.
    pub residual: f64,
    /// Residual estimates, one per iteration.
    pub history: Vec<f64>,
    /// Whether each node's factorization is stored and reused.
    pub reused: Vec<bool>,
    pub factorizations: usize,
    pub wall: Duration,
}

/// Rough size of a sparse LU factor of a mesh system with `n` unknowns.
pub fn estimate_factor_bytes(n: usize) -> usize {
    let n = n.max(2) as f64;
    (16.0 * n * (20.0 + 10.0 * n.log2())) as usize
}

/// Exact inverse of the block-diagonal part, one sparse LU per node.
pub struct BlockPreconditioner {
    systems: Vec<NodeSystem>,
    symbolic: SymbolicLu<usize>,
    stored: Vec<Option<Lu<usize, C64>>>,
    factorizations: AtomicUsize,
    par: Parallelism,
}

fn factor(symbolic: &SymbolicLu<usize>, sys: &NodeSystem) -> Result<Lu<usize, C64>> {
    Lu::try_new_with_symbolic(symbolic.clone(), sys.matrix.as_ref())
        .map_err(|e| Error::LinearAlgebra(format!("LU of node alpha = {}: {e:?}", sys.alpha)))
}

impl BlockPreconditioner {
    pub fn new(systems: Vec<NodeSystem>, budget_bytes: usize, par: Parallelism) -> Result<Self> {
        let first = systems
            .first()
            .ok_or_else(|| Error::Config("no quasi-momentum nodes".into()))?;
        let symbolic = SymbolicLu::try_new(first.matrix.symbolic())
            .map_err(|e| Error::LinearAlgebra(format!("symbolic LU: {e:?}")))?;
        let keep = (budget_bytes / estimate_factor_bytes(first.matrix.nrows())).min(systems.len());
        let stored = map_range(par, keep, |m| factor(&symbolic, &systems[m]));
        let mut kept = Vec::with_capacity(systems.len());
        for f in stored {
            kept.push(Some(f?));
        }
        kept.resize_with(systems.len(), || None);
        Ok(BlockPreconditioner {
            factorizations: AtomicUsize::new(keep),
            systems,
            symbolic,
            stored: kept,
            par,
        })
    }

    pub fn systems(&self) -> &[NodeSystem] {
        &self.systems
    }

    pub fn stored_flags(&self) -> Vec<bool> {
        self.stored.iter().map(Option::is_some).collect()
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    fn solve_node(&self, m: usize, rhs: &[C64]) -> Result<Vec<C64>> {
        let mut x = rhs.to_vec();
        let n = x.len();
        let view = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        match &self.stored[m] {
            Some(lu) => lu.solve_in_place(view),
            None => {
                self.factorizations.fetch_add(1, Ordering::Relaxed);
                factor(&self.symbolic, &self.systems[m])?.solve_in_place(view)
            }
        }
        Ok(x)
    }

    /// `K^-1 r`, node by node.
    pub fn apply(&self, r: &BlochField) -> Result<BlochField> {
        let parts = map_range(self.par, r.n_nodes, |m| self.solve_node(m, r.node(m)));
        let mut out = BlochField::zeros(r.n_nodes, r.n_dofs);
        for (m, p) in parts.into_iter().enumerate() {
            out.node_mut(m).copy_from_slice(&p?);
        }
        Ok(out)
    }

    /// `K W`, node by node.
    pub fn block_apply(&self, w: &BlochField) -> BlochField {
        let parts = map_range(self.par, w.n_nodes, |m| {
            let mut y = vec![C64::new(0.0, 0.0); w.n_dofs];
            self.systems[m].apply(w.node(m), &mut y);
            y
        });
        let mut out = BlochField::zeros(w.n_nodes, w.n_dofs);
        for (m, p) in parts.into_iter().enumerate() {
            out.node_mut(m).copy_from_slice(&p);
        }
        out
    }
}

fn axpy(y: &mut BlochField, a: C64, x: &BlochField) {
    for (yi, xi) in y.data.iter_mut().zip(&x.data) {
        *yi += a * xi;
    }
}

fn scale(x: &mut BlochField, a: C64) {
    x.data.iter_mut().for_each(|v| *v *= a);
}

fn residual(pre: &BlockPreconditioner, coupling: &CouplingOperator, w: &BlochField, f: &BlochField) -> BlochField {
    let mut r = f.clone();
    let kw = pre.block_apply(w);
    let bw = coupling.apply(w);
    for ((ri, a), b) in r.data.iter_mut().zip(&kw.data).zip(&bw.data) {
        *ri -= a + b;
    }
    r
}

/// Givens rotation zeroing `b` in `(a, b)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    if b.norm() == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let r = na.hypot(b.norm());
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

/// Solves `(K + B) W = F`.
pub fn solve_coupled(
    pre: &BlockPreconditioner,
    coupling: &CouplingOperator,
    loads: &BlochField,
    opts: &SolverOptions,
) -> Result<(BlochField, SolveReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let start = Instant::now();
    let mut report = SolveReport { reused: pre.stored_flags(), ..Default::default() };
    let fnorm = loads.norm();
    if fnorm == 0.0 {
        report.wall = start.elapsed();
        return Ok((BlochField::zeros(loads.n_nodes, loads.n_dofs), report));
    }

    // Right preconditioning: (I + B K^-1) y = F, W = K^-1 y, started at y = F.
    let mut y = loads.clone();
    let mut w = pre.apply(&y)?;
    let mut bw = coupling.apply(&w);
    report.iterations = 1;
    let mut r = loads.clone();
    for (ri, (yi, bi)) in r.data.iter_mut().zip(y.data.iter().zip(&bw.data)) {
        *ri -= yi + bi;
    }
    let mut rnorm = r.norm();
    report.history.push(rnorm / fnorm);

    let cap = opts.krylov_max_vectors.max(2);
    while rnorm / fnorm > opts.tol {
        if report.iterations >= opts.max_iterations {
            return Err(Error::NoConvergence { iterations: report.iterations, residual: rnorm / fnorm });
        }
        // One Arnoldi cycle from the current residual.
        let mut basis = vec![r.clone()];
        scale(&mut basis[0], C64::new(1.0 / rnorm, 0.0));
        let mut hess: Vec<Vec<C64>> = Vec::new();
        let mut rot: Vec<(f64, C64)> = Vec::new();
        let mut rhs = vec![C64::new(rnorm, 0.0)];
        let mut converged = false;
        while basis.len() < cap && report.iterations < opts.max_iterations {
            let v = basis.last().unwrap();
            let mut next = v.clone();
            let bk = coupling.apply(&pre.apply(v)?);
            axpy(&mut next, C64::new(1.0, 0.0), &bk);
            report.iterations += 1;
            report.krylov_iterations += 1;
            let mut col = Vec::with_capacity(basis.len() + 1);
            for b in &basis {
                let h = next.inner(b);
                axpy(&mut next, -h, b);
                col.push(h);
            }
            let hn = next.norm();
            col.push(C64::new(hn, 0.0));
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, b) = (col[i], col[i + 1]);
                col[i] = a * c + s * b;
                col[i + 1] = -s.conj() * a + b * c;
            }
            let j = col.len() - 2;
            let (c, s) = givens(col[j], col[j + 1]);
            let (a, b) = (col[j], col[j + 1]);
            col[j] = a * c + s * b;
            col[j + 1] = C64::new(0.0, 0.0);
            rot.push((c, s));
            let g = rhs[j];
            rhs[j] = g * c;
            rhs.push(-s.conj() * g);
            hess.push(col);
            let est = rhs[j + 1].norm() / fnorm;
            report.history.push(est);
            if est <= opts.tol || hn == 0.0 {
                converged = true;
                break;
            }
            if hn > 0.0 {
                scale(&mut next, C64::new(1.0 / hn, 0.0));
            }
            basis.push(next);
        }
        // Back substitution for the Krylov coefficients.
        let k = hess.len();
        let mut z = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = rhs[i];
            for jj in i + 1..k {
                acc -= hess[jj][i] * z[jj];
            }
            z[i] = acc / hess[i][i];
        }
        for (i, zi) in z.iter().enumerate() {
            axpy(&mut y, *zi, &basis[i]);
        }
        drop(basis);
        w = pre.apply(&y)?;
        r = residual(pre, coupling, &w, loads);
        rnorm = r.norm();
        if rnorm / fnorm <= opts.tol {
            break;
        }
        if !converged && report.iterations < opts.max_iterations {
            // Krylov memory exhausted: continue with W <- K^-1 (F - B W).
            bw = coupling.apply(&w);
            while rnorm / fnorm > opts.tol {
                if report.iterations >= opts.max_iterations {
                    return Err(Error::NoConvergence { iterations: report.iterations, residual: rnorm / fnorm });
                }
                let mut rhs_s = loads.clone();
                axpy(&mut rhs_s, C64::new(-1.0, 0.0), &bw);
                let w_new = pre.apply(&rhs_s)?;
                let bw_new = coupling.apply(&w_new);
                let mut diff = bw.clone();
                axpy(&mut diff, C64::new(-1.0, 0.0), &bw_new);
                rnorm = diff.norm();
                w = w_new;
                bw = bw_new;
                report.iterations += 1;
                report.stationary_iterations += 1;
                report.history.push(rnorm / fnorm);
            }
            break;
        }
        // Estimate converged but the true residual did not: restart.
    }
    report.residual = rnorm / fnorm;
    report.factorizations = pre.factorizations();
    report.wall = start.elapsed();
    Ok((w, report))
}
