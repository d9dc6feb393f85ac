use bloch_fem::geometry::{Profile, SurfacePair};
use bloch_fem::mesh::{build_mesh, PeriodicMesh};
use bloch_fem::quad::gauss_legendre;
use bloch_fem::Error;
use std::f64::consts::PI;

fn flat() -> SurfacePair {
    SurfacePair::new(Profile::Flat(1.0), Profile::Flat(0.0), 2.0 * PI, 3.0, 2.9).unwrap()
}

#[test]
fn flat_mesh_counts() {
    let mesh = build_mesh(&flat(), 0.5).unwrap();
    // round(2 pi / 0.5) = 13 intervals: 14 columns, 13 after identification
    let columns: std::collections::BTreeSet<i64> = mesh.vertices.iter().map(|v| (v[0] * 1e9).round() as i64).collect();
    assert_eq!(columns.len(), 14);
    assert_eq!(mesh.n_edge(), 13);
    let rows: std::collections::BTreeSet<i64> = mesh.vertices.iter().map(|v| (v[1] * 1e9).round() as i64).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(mesh.n_dofs, 13 * 4);
    for t in 0..mesh.triangles.len() {
        assert!(mesh.area(t) > 0.0);
    }
}

#[test]
fn structural_invariants() {
    for sp in [SurfacePair::example1(), SurfacePair::example2(), SurfacePair::example3()] {
        let mesh = build_mesh(&sp, 0.2).unwrap();
        assert_eq!(mesh.top_dofs.len(), mesh.n_edge());
        let d = mesh.lambda / mesh.n_edge() as f64;
        for (i, x) in mesh.top_x1.iter().enumerate() {
            assert!((x - (-PI + d * i as f64)).abs() < 1e-12);
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        for (v, x) in mesh.vertices.iter().enumerate() {
            if (x[1] - sp.zeta.value(x[0])).abs() < 1e-12 {
                assert!(mesh.dof_of_vertex[v].is_none());
            } else {
                assert!(mesh.dof_of_vertex[v].is_some());
            }
            if (x[0] + PI).abs() < 1e-12 {
                left.push((x[1], mesh.dof_of_vertex[v]));
            }
            if (x[0] - PI).abs() < 1e-12 {
                right.push((x[1], mesh.dof_of_vertex[v]));
            }
        }
        assert_eq!(left.len(), right.len());
        for (l, r) in left.iter().zip(&right) {
            assert!((l.0 - r.0).abs() < 1e-12);
            assert_eq!(l.1, r.1);
        }
        for t in 0..mesh.triangles.len() {
            assert!(mesh.area(t) > 0.0);
        }
        assert!(mesh.h >= 0.2 / 2f64.sqrt() && mesh.h <= 0.4, "h = {}", mesh.h);
    }
}

#[test]
fn too_coarse_is_rejected() {
    assert!(matches!(build_mesh(&flat(), 2.0), Err(Error::Config(_))));
    assert!(matches!(build_mesh(&flat(), -0.1), Err(Error::Config(_))));
}

#[test]
fn quadrature_weights() {
    let mesh = PeriodicMesh::from_parts(1.0, 1.0, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], vec![None; 3], vec![])
        .unwrap();
    let q = mesh.p1_quadrature();
    assert_eq!(q.len(), 3);
    assert!((q.iter().map(|p| p.weight).sum::<f64>() - 0.5).abs() < 1e-15);
    // exact for quadratics
    let v: f64 = q.iter().map(|p| p.weight * p.x[0] * p.x[1]).sum();
    assert!((v - 1.0 / 24.0).abs() < 1e-15);
}

#[test]
fn area_integral_matches_profile_integral() {
    let sp = SurfacePair::example2();
    let exact: f64 = gauss_legendre(64, -PI, PI).iter().map(|&(x, w)| w * (3.0 - sp.zeta.value(x))).sum();
    for h in [0.2, 0.1, 0.05] {
        let mesh = build_mesh(&sp, h).unwrap();
        let area: f64 = mesh.p1_quadrature().iter().map(|p| p.weight).sum();
        let err = (area - exact).abs();
        assert!(err < 2.0 * h * h, "h = {h}: {err}");
    }
    // antisymmetric integrand over a symmetric domain
    let mesh = build_mesh(&flat(), 0.1).unwrap();
    let moment: f64 = mesh.p1_quadrature().iter().map(|p| p.weight * p.x[0]).sum();
    assert!(moment.abs() < 1e-10);
}

#[test]
fn quasi_uniform_under_refinement() {
    let sp = SurfacePair::example2();
    for h in [0.2, 0.1, 0.05] {
        let mesh = build_mesh(&sp, h).unwrap();
        let worst = (0..mesh.triangles.len()).map(|t| mesh.aspect_ratio(t)).fold(0.0, f64::max);
        assert!(worst < 10.0, "h = {h}: aspect {worst}");
    }
}

/// `L2` and `H1`-seminorm errors of the nodal interpolant of `u` on the
/// flat strip, by Gauss rules on collapsed squares.
fn interpolation_errors(h: f64) -> (f64, f64) {
    let sp = flat();
    let mesh = build_mesh(&sp, h).unwrap();
    let u = |x: [f64; 2]| x[0].sin() * (PI * (x[1] - 1.0) / 2.0).sin();
    let du = |x: [f64; 2]| {
        [x[0].cos() * (PI * (x[1] - 1.0) / 2.0).sin(), x[0].sin() * PI / 2.0 * (PI * (x[1] - 1.0) / 2.0).cos()]
    };
    let g = gauss_legendre(4, 0.0, 1.0);
    let (mut l2, mut h1) = (0.0, 0.0);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = tri.map(|i| mesh.vertices[i]);
        let vals = v.map(u);
        let grads = mesh.gradients(t);
        let gi = [0, 1].map(|c| (0..3).map(|a| vals[a] * grads[a][c]).sum::<f64>());
        let area = mesh.area(t);
        for &(s, ws) in &g {
            for &(r, wr) in &g {
                // Duffy map of the unit square onto the triangle
                let (l1, l2b) = (s * (1.0 - r), s * r);
                let l0 = 1.0 - l1 - l2b;
                let x = [
                    l0 * v[0][0] + l1 * v[1][0] + l2b * v[2][0],
                    l0 * v[0][1] + l1 * v[1][1] + l2b * v[2][1],
                ];
                let w = ws * wr * s * 2.0 * area;
                let ih = l0 * vals[0] + l1 * vals[1] + l2b * vals[2];
                l2 += w * (u(x) - ih).powi(2);
                let d = du(x);
                h1 += w * ((d[0] - gi[0]).powi(2) + (d[1] - gi[1]).powi(2));
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

#[test]
fn interpolation_orders() {
    let (l2a, h1a) = interpolation_errors(0.2);
    let (l2b, h1b) = interpolation_errors(0.1);
    let (l2c, h1c) = interpolation_errors(0.05);
    for (r, lo, hi) in [(l2a / l2b, 3.4, 4.6), (l2b / l2c, 3.4, 4.6), (h1a / h1b, 1.7, 2.3), (h1b / h1c, 1.7, 2.3)] {
        assert!(r > lo && r < hi, "ratio {r}");
    }
}

#[test]
fn locate_and_evaluate() {
    let sp = SurfacePair::example2();
    let mesh = build_mesh(&sp, 0.1).unwrap();
    // a linear function in x2 is reproduced exactly
    let values: Vec<f64> = {
        let mut v = vec![0.0; mesh.n_dofs];
        for (i, x) in mesh.vertices.iter().enumerate() {
            if let Some(d) = mesh.dof_of_vertex[i] {
                v[d] = 3.0 - x[1];
            }
        }
        v
    };
    let x = [0.3, 2.95];
    let got = mesh.evaluate(&values, x).unwrap();
    assert!((got - 0.05).abs() < 1e-12);
    assert!(mesh.locate([0.0, 0.1]).is_none());
}

#[test]
fn dump_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = build_mesh(&flat(), 0.5).unwrap();
    mesh.dump(dir.path()).unwrap();
    let v = std::fs::read_to_string(dir.path().join("vertices.csv")).unwrap();
    assert_eq!(v.lines().count(), 1 + mesh.vertices.len());
    let t = std::fs::read_to_string(dir.path().join("triangles.csv")).unwrap();
    assert_eq!(t.lines().count(), 1 + mesh.triangles.len());
}
