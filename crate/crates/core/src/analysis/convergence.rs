//! h-convergence studies against exact solutions.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{dg_norm, l2q_error, AnalysisError};
use crate::assembly::{assemble_global, face_points, FluxParams};
use crate::mesh::{FaceKind, MeshSpec};
use crate::problem::{ExactSolution, ProblemData};
use crate::solver::{solve_causal, solve_global, Difference, Smooth};

/// Errors below this are treated as exact; no order is reported for them.
pub const ERROR_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub h: f64,
    pub dofs: usize,
    pub l2q_error: f64,
    pub dg_error: f64,
    pub order_l2: Option<f64>,
    pub order_dg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub solution: String,
    pub degree: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Some error reached the floor, so the corresponding orders are missing.
    pub at_floor: bool,
}

fn order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> Option<f64> {
    if e_coarse < ERROR_FLOOR || e_fine < ERROR_FLOOR {
        return None;
    }
    Some((e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
}

impl ConvergenceTable {
    pub fn final_order_l2(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order_l2)
    }

    /// Both errors strictly decrease from row to row.
    pub fn is_monotone(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].l2q_error < w[0].l2q_error && w[1].dg_error < w[0].dg_error)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let opt = |o: Option<f64>| o.map_or(String::new(), |v| format!("{v:.6}"));
        writeln!(out, "h,dofs,l2q_error,dg_error,order_l2,order_dg")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.12e},{},{:.12e},{:.12e},{},{}",
                r.h,
                r.dofs,
                r.l2q_error,
                r.dg_error,
                opt(r.order_l2),
                opt(r.order_dg)
            )?;
        }
        Ok(())
    }
}

/// Solves on `levels` successive refinements of `spec` for each degree and
/// tabulates L²(Q) and DG errors with observed orders.
///
/// Meshes without time-like faces are solved by the causal sweep, others by
/// the global solver. Levels are processed in parallel.
pub fn convergence_study(
    exact: Arc<dyn ExactSolution>,
    spec: &MeshSpec,
    degrees: &[usize],
    levels: u32,
    params: &FluxParams,
) -> Result<Vec<ConvergenceTable>, AnalysisError> {
    let data = ProblemData::from_exact(exact.clone());
    let mut tables = Vec::with_capacity(degrees.len());
    for &p in degrees {
        let mut rows: Vec<ConvergenceRow> = (0..levels)
            .into_par_iter()
            .map(|level| {
                let mesh = spec.refined(level)?;
                let solution = if mesh.count_faces(FaceKind::InteriorTimeLike) == 0 {
                    solve_causal(&mesh, p, params, &data)?
                } else {
                    solve_global(&assemble_global(&mesh, p, params, &data)?)?
                };
                let smooth = Smooth(exact.as_ref());
                let diff = Difference(&smooth, &solution);
                Ok(ConvergenceRow {
                    level,
                    h: mesh.max_diameter(),
                    dofs: solution.num_dofs(),
                    l2q_error: l2q_error(&solution, exact.as_ref(), &mesh)?,
                    dg_error: dg_norm(&diff, &mesh, params, face_points(p) + 4)?,
                    order_l2: None,
                    order_dg: None,
                })
            })
            .collect::<Result<_, AnalysisError>>()?;
        for i in 1..rows.len() {
            let (h0, h1) = (rows[i - 1].h, rows[i].h);
            rows[i].order_l2 = order(rows[i - 1].l2q_error, rows[i].l2q_error, h0, h1);
            rows[i].order_dg = order(rows[i - 1].dg_error, rows[i].dg_error, h0, h1);
        }
        let at_floor = rows.iter().any(|r| r.l2q_error < ERROR_FLOOR || r.dg_error < ERROR_FLOOR);
        tables.push(ConvergenceTable {
            solution: exact.name(),
            degree: p,
            rows,
            at_floor,
        });
    }
    Ok(tables)
}
