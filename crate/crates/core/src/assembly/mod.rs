//! Discrete problem: one sparse quasi-periodic Helmholtz system per
//! quasi-momentum node, the load vectors, and the finite-section coupling.

mod coupling;

pub use coupling::{inverse_kernel, CouplingOperator, CouplingRule, KernelOptions};

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use crate::dtn::{dtn_matrix, DtnBlock, TraceFourier};
use crate::mesh::PeriodicMesh;
use crate::quad::gauss_legendre;
use crate::{Error, Result, C64};

/// Per-node unknowns, node-major: node `m` occupies
/// `data[m * n_dofs..(m + 1) * n_dofs]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochField {
    pub n_nodes: usize,
    pub n_dofs: usize,
    pub data: Vec<C64>,
}

impl BlochField {
    pub fn zeros(n_nodes: usize, n_dofs: usize) -> Self {
        BlochField { n_nodes, n_dofs, data: vec![C64::new(0.0, 0.0); n_nodes * n_dofs] }
    }

    pub fn from_fn(n_nodes: usize, n_dofs: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let data = (0..n_nodes * n_dofs).map(|i| f(i / n_dofs, i % n_dofs)).collect();
        BlochField { n_nodes, n_dofs, data }
    }

    pub fn node(&self, m: usize) -> &[C64] {
        &self.data[m * self.n_dofs..(m + 1) * self.n_dofs]
    }

    pub fn node_mut(&mut self, m: usize) -> &mut [C64] {
        &mut self.data[m * self.n_dofs..(m + 1) * self.n_dofs]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `sum conj(other) * self`.
    pub fn inner(&self, other: &BlochField) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum()
    }
}

/// Column-compressed pattern shared by all node matrices.
#[derive(Clone, Debug)]
struct Pattern {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl Pattern {
    fn new(n: usize, mut entries: Vec<(usize, usize)>) -> Self {
        // (col, row) order
        entries.sort_unstable_by_key(|&(r, c)| (c, r));
        entries.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        for &(_, c) in &entries {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let row_idx = entries.iter().map(|&(r, _)| r).collect();
        Pattern { col_ptr, row_idx }
    }

    fn position(&self, row: usize, col: usize) -> usize {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        let off = self.row_idx[range.clone()].binary_search(&row).expect("entry in pattern");
        range.start + off
    }

    fn nnz(&self) -> usize {
        self.row_idx.len()
    }
}

/// Mesh-dependent parts of the node matrices, assembled once:
/// `K(alpha) = S + i alpha X + (alpha^2 - k^2) M - DtN(alpha)`.
#[derive(Clone, Debug)]
pub struct FemOperators {
    pattern: Pattern,
    symbolic: SymbolicSparseColMat<usize>,
    stiffness: Vec<f64>,
    cross: Vec<f64>,
    mass: Vec<f64>,
    /// Positions of the dense top-edge block, row-major over top nodes.
    top_positions: Vec<usize>,
    pub n_dofs: usize,
}

impl FemOperators {
    pub fn new(mesh: &PeriodicMesh) -> Self {
        let n = mesh.n_dofs;
        let mut entries = Vec::with_capacity(9 * mesh.triangles.len() + mesh.n_edge().pow(2));
        for tri in &mesh.triangles {
            for &a in tri {
                for &b in tri {
                    if let (Some(r), Some(c)) = (mesh.dof_of_vertex[a], mesh.dof_of_vertex[b]) {
                        entries.push((r, c));
                    }
                }
            }
        }
        for &r in &mesh.top_dofs {
            for &c in &mesh.top_dofs {
                entries.push((r, c));
            }
        }
        let pattern = Pattern::new(n, entries);
        let mut stiffness = vec![0.0; pattern.nnz()];
        let mut cross = vec![0.0; pattern.nnz()];
        let mut mass = vec![0.0; pattern.nnz()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.area(t);
            let grad = mesh.gradients(t);
            for a in 0..3 {
                let Some(r) = mesh.dof_of_vertex[tri[a]] else { continue };
                for b in 0..3 {
                    let Some(c) = mesh.dof_of_vertex[tri[b]] else { continue };
                    let p = pattern.position(r, c);
                    stiffness[p] += area * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                    // row: test function a, column: trial function b
                    cross[p] += area / 3.0 * (grad[b][0] - grad[a][0]);
                    mass[p] += area / 12.0 * if a == b { 2.0 } else { 1.0 };
                }
            }
        }
        let top_positions = mesh
            .top_dofs
            .iter()
            .flat_map(|&r| mesh.top_dofs.iter().map(move |&c| (r, c)))
            .map(|(r, c)| pattern.position(r, c))
            .collect();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, pattern.col_ptr.clone(), None, pattern.row_idx.clone());
        FemOperators { pattern, symbolic, stiffness, cross, mass, top_positions, n_dofs: n }
    }

    pub fn symbolic(&self) -> &SymbolicSparseColMat<usize> {
        &self.symbolic
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    /// Values of the volume part on the shared pattern.
    pub fn volume_values(&self, alpha: f64, k: f64) -> Vec<C64> {
        let shift = alpha * alpha - k * k;
        (0..self.pattern.nnz())
            .map(|p| C64::new(self.stiffness[p] + shift * self.mass[p], alpha * self.cross[p]))
            .collect()
    }

    pub fn node_matrix(&self, alpha: f64, k: f64, dtn: &DtnBlock) -> SparseColMat<usize, C64> {
        let mut values = self.volume_values(alpha, k);
        let nt = dtn.trace.nrows();
        for (i, &p) in self.top_positions.iter().enumerate() {
            values[p] -= dtn.trace[(i / nt, i % nt)];
        }
        SparseColMat::new(self.symbolic.clone(), values)
    }
}

/// System matrix of one quasi-momentum node.
#[derive(Clone, Debug)]
pub struct NodeSystem {
    pub alpha: f64,
    pub matrix: SparseColMat<usize, C64>,
}

pub fn assemble_node(ops: &FemOperators, tf: &TraceFourier, alpha: f64, k: f64) -> NodeSystem {
    let dtn = dtn_matrix(tf, alpha, k);
    NodeSystem { alpha, matrix: ops.node_matrix(alpha, k, &dtn) }
}

impl NodeSystem {
    /// `y = K x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let (sym, val) = self.matrix.parts();
        let col_ptr = sym.col_ptr();
        let row_idx = sym.row_idx();
        for c in 0..sym.ncols() {
            let xc = x[c];
            for p in col_ptr[c]..col_ptr[c + 1] {
                y[row_idx[p]] += val[p] * xc;
            }
        }
    }
}

/// `b_l = \int_top f(x1) phi_l(x1) dx1` with the periodic top-edge hats;
/// `f` is the periodic part of the boundary data, i.e. `e^{i alpha x1} F`.
pub fn load_vector(mesh: &PeriodicMesh, f: impl Fn(f64) -> C64) -> Vec<C64> {
    let mut b = vec![C64::new(0.0, 0.0); mesh.n_dofs];
    let ne = mesh.n_edge();
    let d = mesh.lambda / ne as f64;
    let rule = gauss_legendre(4, 0.0, 1.0);
    for i in 0..ne {
        let x0 = mesh.top_x1[i];
        for &(s, w) in &rule {
            let v = f(x0 + s * d) * (w * d);
            b[mesh.top_dofs[i]] += v * (1.0 - s);
            b[mesh.top_dofs[(i + 1) % ne]] += v * s;
        }
    }
    b
}

/// Checks the finite-section width against the node count.
pub fn check_cells(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Config("finite-section half-width L must be at least 1".into()));
    }
    Ok(())
}
