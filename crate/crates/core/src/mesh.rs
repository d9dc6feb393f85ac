//! Triangulation of one periodic cell `[-Lambda/2, Lambda/2] x [zeta, H]`.

use std::io::Write;
use std::path::Path;

use crate::geometry::SurfacePair;
use crate::{Error, Result};

/// One quadrature point of the volume rule.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub x: [f64; 2],
    pub weight: f64,
    pub triangle: usize,
    /// Values of the three vertex basis functions at `x`.
    pub bary: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct PeriodicMesh {
    pub lambda: f64,
    pub h_top: f64,
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Free unknown of each vertex; `None` on the Dirichlet boundary. The left
    /// and right ends of each horizontal line share an unknown.
    pub dof_of_vertex: Vec<Option<usize>>,
    pub n_dofs: usize,
    /// Unknowns of the top edge ordered by `x1`, one per top node.
    pub top_dofs: Vec<usize>,
    /// `x1` of the top nodes, uniformly spaced from `-Lambda/2`.
    pub top_x1: Vec<f64>,
    /// Longest edge.
    pub h: f64,
    /// `(columns, rows)` of a structured grid, used for point location.
    grid: Option<(usize, usize)>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Mapped structured grid: `round(Lambda/h)` columns, `round((H - min zeta)/h)`
/// rows on every vertical line, each quad cut into two triangles.
pub fn build_mesh(sp: &SurfacePair, h_target: f64) -> Result<PeriodicMesh> {
    if !(h_target > 0.0) || h_target >= sp.h_top - sp.zeta_max() {
        return Err(Error::Config(format!(
            "mesh width {h_target} must be positive and below H - sup zeta = {}",
            sp.h_top - sp.zeta_max()
        )));
    }
    let lambda = sp.lambda;
    let nc = ((lambda / h_target).round() as usize).max(2);
    let nr = (((sp.h_top - sp.zeta_min()) / h_target).round() as usize).max(1);
    let stride = nc + 1;
    let mut vertices = Vec::with_capacity(stride * (nr + 1));
    let mut dof_of_vertex = Vec::with_capacity(stride * (nr + 1));
    for l in 0..=nr {
        for i in 0..=nc {
            let x1 = -0.5 * lambda + lambda * i as f64 / nc as f64;
            // The right column duplicates the left one; use its height exactly.
            let z = sp.zeta.value(if i == nc { -0.5 * lambda } else { x1 });
            vertices.push([x1, z + (sp.h_top - z) * l as f64 / nr as f64]);
            dof_of_vertex.push((l > 0).then(|| (l - 1) * nc + i % nc));
        }
    }
    let mut triangles = Vec::with_capacity(2 * nc * nr);
    for l in 0..nr {
        for i in 0..nc {
            let v00 = l * stride + i;
            let (v10, v01, v11) = (v00 + 1, v00 + stride, v00 + stride + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let top_dofs = ((nr - 1) * nc..nr * nc).collect();
    let top_x1 = (0..nc).map(|i| -0.5 * lambda + lambda * i as f64 / nc as f64).collect();
    let mut mesh = PeriodicMesh {
        lambda,
        h_top: sp.h_top,
        vertices,
        triangles,
        dof_of_vertex,
        n_dofs: nr * nc,
        top_dofs,
        top_x1,
        h: 0.0,
        grid: Some((nc, nr)),
    };
    mesh.h = mesh.longest_edge();
    mesh.validate()?;
    Ok(mesh)
}

impl PeriodicMesh {
    /// A mesh from explicit parts (small hand-built instances).
    pub fn from_parts(
        lambda: f64,
        h_top: f64,
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        dof_of_vertex: Vec<Option<usize>>,
        top_dofs: Vec<usize>,
    ) -> Result<Self> {
        let n_dofs = dof_of_vertex.iter().flatten().map(|d| d + 1).max().unwrap_or(0);
        let nt = top_dofs.len();
        let top_x1 = (0..nt).map(|i| -0.5 * lambda + lambda * i as f64 / nt as f64).collect();
        let mut mesh = PeriodicMesh {
            lambda,
            h_top,
            vertices,
            triangles,
            dof_of_vertex,
            n_dofs,
            top_dofs,
            top_x1,
            h: 0.0,
            grid: None,
        };
        mesh.h = mesh.longest_edge();
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| self.vertices[v]);
            if !(signed_area(a, b, c) > 0.0) {
                return Err(Error::Geometry(format!("triangle {t} is not positively oriented")));
            }
        }
        Ok(())
    }

    fn longest_edge(&self) -> f64 {
        let mut h = 0.0f64;
        for tri in &self.triangles {
            for e in 0..3 {
                let (p, q) = (self.vertices[tri[e]], self.vertices[tri[(e + 1) % 3]]);
                h = h.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        h
    }

    pub fn n_edge(&self) -> usize {
        self.top_dofs.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        signed_area(a, b, c)
    }

    /// Constant gradients of the three vertex basis functions of triangle `t`.
    pub fn gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let two_area = 2.0 * signed_area(a, b, c);
        let opposite = [(b, c), (c, a), (a, b)];
        opposite.map(|(p, q)| [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area])
    }

    /// Ratio of circumradius to inradius of triangle `t`.
    pub fn aspect_ratio(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let la = (b[0] - c[0]).hypot(b[1] - c[1]);
        let lb = (a[0] - c[0]).hypot(a[1] - c[1]);
        let lc = (a[0] - b[0]).hypot(a[1] - b[1]);
        let area = signed_area(a, b, c);
        let circum = la * lb * lc / (4.0 * area);
        let inr = 2.0 * area / (la + lb + lc);
        circum / inr
    }

    /// Edge-midpoint rule, three points per triangle, exact for quadratics.
    pub fn p1_quadrature(&self) -> Vec<QuadPoint> {
        let mut out = Vec::with_capacity(3 * self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let v = tri.map(|i| self.vertices[i]);
            let w = self.area(t) / 3.0;
            for (p, q) in [(0, 1), (1, 2), (2, 0)] {
                let mut bary = [0.0; 3];
                bary[p] = 0.5;
                bary[q] = 0.5;
                out.push(QuadPoint {
                    x: [0.5 * (v[p][0] + v[q][0]), 0.5 * (v[p][1] + v[q][1])],
                    weight: w,
                    triangle: t,
                    bary,
                });
            }
        }
        out
    }

    /// Triangle containing `x` (periodic coordinate) and the barycentric
    /// coordinates of `x` in it.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10;
        let try_tri = |t: usize| {
            let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
            let area = signed_area(a, b, c);
            let l = [
                signed_area(x, b, c) / area,
                signed_area(a, x, c) / area,
                signed_area(a, b, x) / area,
            ];
            (l.iter().all(|&v| v >= -tol)).then_some((t, l))
        };
        if let Some((nc, nr)) = self.grid {
            let s = (x[0] + 0.5 * self.lambda) / self.lambda * nc as f64;
            let i0 = (s.floor() as i64).clamp(0, nc as i64 - 1) as usize;
            for i in [i0, i0.saturating_sub(1), (i0 + 1).min(nc - 1)] {
                for l in 0..nr {
                    let base = 2 * (l * nc + i);
                    if let Some(hit) = try_tri(base).or_else(|| try_tri(base + 1)) {
                        return Some(hit);
                    }
                }
            }
            return None;
        }
        (0..self.triangles.len()).find_map(try_tri)
    }

    /// Evaluates a nodal field (one value per unknown) at `x`; Dirichlet
    /// vertices carry zero.
    pub fn evaluate<T>(&self, values: &[T], x: [f64; 2]) -> Option<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let (t, l) = self.locate(x)?;
        let mut acc = T::default();
        for (a, &v) in self.triangles[t].iter().enumerate() {
            if let Some(d) = self.dof_of_vertex[v] {
                acc = acc + values[d] * l[a];
            }
        }
        Some(acc)
    }

    /// Writes `vertices.csv` (x1, x2, dof) and `triangles.csv` (v0, v1, v2).
    pub fn dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("vertices.csv"))?);
        writeln!(f, "x1,x2,dof")?;
        for (v, d) in self.vertices.iter().zip(&self.dof_of_vertex) {
            let d = d.map(|d| d as i64).unwrap_or(-1);
            writeln!(f, "{},{},{}", v[0], v[1], d)?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("triangles.csv"))?);
        writeln!(f, "v0,v1,v2")?;
        for t in &self.triangles {
            writeln!(f, "{},{},{}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}
