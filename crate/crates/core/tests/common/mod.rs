//! Hand-built coupling instance shared by the integration tests.

use bloch_fem::assembly::BlochField;
use bloch_fem::geometry::SurfacePair;
use bloch_fem::mesh::PeriodicMesh;
use bloch_fem::quasigrid::QuasiGrid;
use bloch_fem::C64;
use std::f64::consts::PI;

const LAMBDA: f64 = 2.0 * PI;

fn cis(x: f64) -> C64 {
    C64::new(x.cos(), x.sin())
}

/// The hand-built instance: two triangles on the left, one on the right.
pub fn micro_mesh() -> PeriodicMesh {
    let vertices = vec![[-PI, 1.0], [PI, 1.0], [-PI, 3.0], [0.0, 3.0], [PI, 3.0]];
    let triangles = vec![[0, 1, 3], [0, 3, 2], [1, 4, 3]];
    let dofs = vec![None, None, Some(0), Some(1), Some(0)];
    PeriodicMesh::from_parts(LAMBDA, 3.0, vertices, triangles, dofs, vec![0, 1]).unwrap()
}

/// Direct evaluation of the finite-section form: for each node `m`, cell `j`,
/// quadrature point and source node `m'`.
pub fn brute_force(mesh: &PeriodicMesh, sp: &SurfacePair, grid: &QuasiGrid, l: i64, k: f64, w: &BlochField) -> BlochField {
    let c = (LAMBDA / (2.0 * PI)).sqrt();
    let n = grid.len();
    let mut out = BlochField::zeros(n, mesh.n_dofs);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = tri.map(|i| mesh.vertices[i]);
        let grads = mesh.gradients(t);
        let weight = mesh.area(t) / 3.0;
        for (p, q) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let x = [0.5 * (v[p][0] + v[q][0]), 0.5 * (v[p][1] + v[q][1])];
            let mut phi = [0.0; 3];
            phi[p] = 0.5;
            phi[q] = 0.5;
            let dof = tri.map(|i| mesh.dof_of_vertex[i]);
            let eval = |m: usize| {
                let mut acc = [C64::new(0.0, 0.0); 3];
                for a in 0..3 {
                    if let Some(d) = dof[a] {
                        let wd = w.node(m)[d];
                        acc[0] += wd * phi[a];
                        acc[1] += wd * grads[a][0];
                        acc[2] += wd * grads[a][1];
                    }
                }
                acc
            };
            for m in 0..n {
                for j in -l + 1..=l {
                    let y = x[0] + LAMBDA * j as f64;
                    let coef = sp.coefficients_extended([y, x[1]]);
                    let mut u = [C64::new(0.0, 0.0); 3];
                    for mp in 0..n {
                        let a = grid.alpha[mp];
                        let kern = cis(-a * y) * (c * grid.weights[mp] * grid.dg[mp]);
                        let e = eval(mp);
                        u[0] += kern * e[0];
                        u[1] += kern * (e[1] - C64::new(0.0, a) * e[0]);
                        u[2] += kern * e[2];
                    }
                    let q0 = u[0] * (-k * k * (coef.c - 1.0));
                    let q1 = u[1] * (coef.a11 - 1.0) + u[2] * coef.a12;
                    let q2 = u[1] * coef.a12 + u[2] * (coef.a22 - 1.0);
                    let phase = cis(grid.alpha[m] * y) * c;
                    for a in 0..3 {
                        if let Some(d) = dof[a] {
                            let test1 = C64::new(grads[a][0], grid.alpha[m] * phi[a]);
                            out.node_mut(m)[d] += phase * (q1 * test1 + q2 * grads[a][1] + q0 * phi[a]) * weight;
                        }
                    }
                }
            }
        }
    }
    out
}

