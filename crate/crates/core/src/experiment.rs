//! Sweep driver: runs the pipeline for every `(k, N)` of a configuration and
//! writes `errors.csv`, `slope.txt` and optional field dumps.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::info;

use crate::assembly::{assemble_node, load_vector, BlochField, CouplingOperator, FemOperators, KernelOptions, NodeSystem};
use crate::config::{Reference, RunConfig};
use crate::dtn::{default_order, TraceFourier};
use crate::geometry::SurfacePair;
use crate::incident::{exact_flat_total_at, rhs_data_f};
use crate::mesh::{build_mesh, PeriodicMesh};
use crate::postprocess::{fit_convergence_slope, reconstruct_top, reconstruct_with, TopEdgeSampler};
use crate::quasigrid::QuasiGrid;
use crate::solver::{solve_coupled, BlockPreconditioner, SolveReport, SolverOptions};
use crate::{cis, Result, C64};

/// One line of `errors.csv`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub example: String,
    pub k: f64,
    #[serde(rename = "N")]
    pub n_nodes: usize,
    #[serde(rename = "L")]
    pub half_width: usize,
    pub h: f64,
    pub rel_l2_error: f64,
    pub iterations: usize,
    pub wall_ms: u128,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Fitted slope per wavenumber, `None` when too few usable points.
    pub slopes: Vec<(f64, Option<f64>)>,
}

/// A solved configuration: the node fields and what produced them.
pub struct Solution {
    pub grid: QuasiGrid,
    pub field: BlochField,
    pub report: SolveReport,
    pub half_width: usize,
}

/// Mesh-level work shared by every run of a sweep.
pub struct Workspace {
    pub cfg: RunConfig,
    pub surfaces: SurfacePair,
    pub mesh: PeriodicMesh,
    pub ops: FemOperators,
    pub sampler: TopEdgeSampler,
    systems: HashMap<(u64, u64), NodeSystem>,
    traces: HashMap<u64, TraceFourier>,
}

impl Workspace {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let surfaces = cfg.surfaces()?;
        let mesh = build_mesh(&surfaces, cfg.h)?;
        let ops = FemOperators::new(&mesh);
        let sampler = TopEdgeSampler::new(&mesh);
        info!("mesh: {} unknowns, {} triangles, h = {:.4}", mesh.n_dofs, mesh.triangles.len(), mesh.h);
        Ok(Workspace { cfg, surfaces, mesh, ops, sampler, systems: HashMap::new(), traces: HashMap::new() })
    }

    fn trace(&mut self, k: f64) -> Result<&TraceFourier> {
        if !self.traces.contains_key(&k.to_bits()) {
            let order = self.cfg.dtn_order.unwrap_or_else(|| default_order(k, self.mesh.lambda, self.mesh.n_edge()));
            let tf = TraceFourier::new(&self.mesh, order, k)?;
            self.traces.insert(k.to_bits(), tf);
        }
        Ok(&self.traces[&k.to_bits()])
    }

    fn node_systems(&mut self, k: f64, grid: &QuasiGrid) -> Result<Vec<NodeSystem>> {
        self.trace(k)?;
        let tf = &self.traces[&k.to_bits()];
        let mut out = Vec::with_capacity(grid.len());
        for &alpha in &grid.alpha {
            let key = (k.to_bits(), alpha.to_bits());
            if let Some(s) = self.systems.get(&key) {
                out.push(s.clone());
                continue;
            }
            let s = assemble_node(&self.ops, tf, alpha, k);
            if self.cfg.cache {
                self.systems.insert(key, s.clone());
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Drops cached node systems (they are only shared between runs with
    /// the same `k`).
    pub fn clear_cache(&mut self) {
        self.systems.clear();
    }

    /// Solves with `N` nodes and finite-section half-width `L`.
    pub fn solve(&mut self, k: f64, n_nodes: usize, half_width: usize) -> Result<Solution> {
        let cfg = self.cfg.clone();
        let grid = QuasiGrid::new(k, cfg.lambda, cfg.n, n_nodes, cfg.cutoff)?;
        let systems = self.node_systems(k, &grid)?;
        let mut loads = BlochField::zeros(grid.len(), self.mesh.n_dofs);
        for (m, &alpha) in grid.alpha.iter().enumerate() {
            let b = load_vector(&self.mesh, |x1| {
                rhs_data_f(alpha, x1, k, cfg.h_top, cfg.lambda) * cis(alpha * x1)
            });
            loads.node_mut(m).copy_from_slice(&b);
        }
        let opts = KernelOptions { rule: cfg.coupling_rule, ..Default::default() };
        let coupling = CouplingOperator::new(&self.mesh, &self.surfaces, &grid, half_width, k, opts, cfg.par)?;
        let pre = BlockPreconditioner::new(systems, cfg.factor_budget_bytes, cfg.par)?;
        let solver = SolverOptions {
            tol: cfg.tol,
            krylov_max_vectors: cfg.krylov_max_vectors,
            max_iterations: cfg.max_iterations,
            factor_budget_bytes: cfg.factor_budget_bytes,
            par: cfg.par,
            ..Default::default()
        };
        let (field, report) = solve_coupled(&pre, &coupling, &loads, &solver)?;
        info!(
            "k = {k}, N = {n_nodes}, L = {half_width}: {} iterations, residual {:.2e}",
            report.iterations, report.residual
        );
        Ok(Solution { grid, field, report, half_width })
    }

    /// Total field on the top edge of cell `j`.
    pub fn top_values(&self, sol: &Solution, cell: i64) -> Vec<C64> {
        reconstruct_top(&sol.field, &sol.grid, &self.sampler, cell, self.cfg.coupling_rule)
    }

    /// Closed-form total field on the top edge of cell `j` (flat surfaces).
    pub fn exact_top_values(&self, k: f64, cell: i64) -> Vec<C64> {
        let c = self.surfaces.zeta_p(0.0);
        self.sampler.points(cell).iter().map(|&x| exact_flat_total_at(x, k, c)).collect()
    }

    pub fn dump_field(&self, sol: &Solution, path: &Path) -> Result<()> {
        let pts: Vec<[f64; 2]> = self.mesh.vertices.clone();
        let values = reconstruct_with(&sol.field, &sol.grid, &self.mesh, 0, &pts, self.cfg.coupling_rule, self.cfg.par)?;
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x1", "x2", "re_u", "im_u"])?;
        for (x, u) in pts.iter().zip(values) {
            let (phys, _) = self.surfaces.diffeo(*x)?;
            w.write_record([phys[0].to_string(), phys[1].to_string(), u.re.to_string(), u.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the sweep without writing anything.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome> {
    run(cfg, None)
}

/// Runs the sweep and writes the artifacts into `cfg.out`.
pub fn run_experiment(cfg: &RunConfig) -> Result<SweepOutcome> {
    std::fs::create_dir_all(&cfg.out)?;
    let outcome = run(cfg, Some(&cfg.out))?;
    let mut w = csv::Writer::from_path(cfg.out.join("errors.csv"))?;
    for row in &outcome.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut f = std::fs::File::create(cfg.out.join("slope.txt"))?;
    for (k, s) in &outcome.slopes {
        match s {
            Some(s) => writeln!(f, "k={k} slope={s:.4}")?,
            None => writeln!(f, "k={k} slope=NA")?,
        }
    }
    Ok(outcome)
}

fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<SweepOutcome> {
    let mut ws = Workspace::new(cfg.clone())?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &k in &cfg.ks {
        let reference = match cfg.reference {
            Reference::ExactFlat => ws.exact_top_values(k, 0),
            Reference::Numerical(nr) => {
                let sol = ws.solve(k, nr, cfg.half_width_for(nr))?;
                ws.top_values(&sol, 0)
            }
        };
        let mut table = Vec::new();
        for &nn in &cfg.n_nodes {
            let start = Instant::now();
            let sol = ws.solve(k, nn, cfg.half_width_for(nn))?;
            let values = ws.top_values(&sol, 0);
            let wall_ms = if cfg.timing { start.elapsed().as_millis() } else { 0 };
            let err = crate::postprocess::relative_l2_error(&values, &reference, &ws.sampler.weights)?;
            info!("k = {k}, N = {nn}: relative error {err:.3e}");
            if let (true, Some(dir)) = (cfg.dump_fields, out) {
                ws.dump_field(&sol, &dir.join("fields").join(format!("{}_k{k}_N{nn}.csv", cfg.label)))?;
            }
            table.push((nn as f64, err));
            rows.push(SweepRow {
                example: cfg.label.clone(),
                k,
                n_nodes: nn,
                half_width: sol.half_width,
                h: cfg.h,
                rel_l2_error: err,
                iterations: sol.report.iterations,
                wall_ms,
            });
        }
        slopes.push((k, fit_convergence_slope(&table).ok()));
        ws.clear_cache();
    }
    Ok(SweepOutcome { rows, slopes })
}
