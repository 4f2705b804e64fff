//! Norms, energies, stability constants and error measurements.

mod convergence;
mod energy;
mod norms;

use serde::Serialize;
use thiserror::Error;

use crate::assembly::{AssemblyError, FluxParams};
use crate::mesh::{interface_layers, FaceId, FaceKind, Mesh, MeshError};
use crate::problem::ExactSolution;
use crate::quadrature::{element_rule, QuadratureError};
use crate::solver::{Difference, DiscreteSolution, PiecewiseField, Smooth, SolverError};

pub use convergence::{convergence_study, ConvergenceRow, ConvergenceTable, ERROR_FLOOR};
pub use energy::{
    dissipation_report, energy, energy_with_bounds, initial_energy, stability_data_bound, EnergyBounds,
    EnergyReport, TraceSide,
};
pub use norms::{dg_norm, dg_plus_norm, norm_report, NormOptions, NormReport, NormTerm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("field has no finite trace on face {0}")]
    MissingTrace(FaceId),
    #[error("face {0} is not part of a space-like interface")]
    NotSpaceLike(FaceId),
    #[error("stability constant assumptions violated: {0}")]
    AssumptionViolated(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// (∫_Q (v²/c² + σ²))^{1/2} of a piecewise field, using a volume rule exact
/// for polynomials of `degree`.
pub fn l2q_norm(field: &dyn PiecewiseField, mesh: &Mesh, degree: usize) -> Result<f64, AnalysisError> {
    let mut total = 0.0;
    for el in &mesh.elements {
        let rule = element_rule(el, &mesh.vertices, degree)?;
        let c2 = el.wave_speed * el.wave_speed;
        total += rule.integrate(|p| {
            let (v, s) = field.eval(el.id, p);
            v * v / c2 + s * s
        });
    }
    Ok(total.sqrt())
}

/// L²(Q) error (‖c⁻¹(v − v_hp)‖² + ‖σ − σ_hp‖²)^{1/2}.
pub fn l2q_error(solution: &DiscreteSolution, exact: &dyn ExactSolution, mesh: &Mesh) -> Result<f64, AnalysisError> {
    let smooth = Smooth(exact);
    l2q_norm(&Difference(&smooth, solution), mesh, 2 * solution.degree + 10)
}

/// Continuity constant of the bilinear form: 2 without Robin faces, otherwise
/// 2 max{‖(1 − δ)/δ‖∞^{1/2}, ‖δ/(1 − δ)‖∞^{1/2}}.
pub fn continuity_constant(params: &FluxParams, mesh: &Mesh) -> Result<f64, AnalysisError> {
    let mut worst: f64 = 0.0;
    let mut any = false;
    for face in mesh.faces.iter().filter(|f| f.kind == FaceKind::Robin) {
        let d = params.delta(face.id)?;
        worst = worst.max((1.0 - d) / d).max(d / (1.0 - d));
        any = true;
    }
    Ok(if any { 2.0 * worst.sqrt() } else { 2.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityConstant {
    /// Number of ordered space-like interfaces, the last one at t = T.
    pub interfaces: usize,
    /// ‖4(1 + γ²)/(1 − γ)²‖∞ over interior space-like and final faces.
    pub gamma_factor: f64,
    /// ‖1/(δ(1 − δ))‖∞ over Robin faces.
    pub robin_factor: f64,
    pub c_stab_squared: f64,
    pub c_stab: f64,
}

/// Constant of the L²(Q) stability estimate, for Robin-only meshes without
/// time-like faces:
///
/// ```text
/// C_stab² = 2T (N ‖4(1 + γ²)/(1 − γ)²‖∞ + ‖1/(δ(1 − δ))‖∞)
/// ```
pub fn stability_constant(mesh: &Mesh, params: &FluxParams) -> Result<StabilityConstant, AnalysisError> {
    let bad: Vec<_> = [FaceKind::Dirichlet, FaceKind::Neumann, FaceKind::InteriorTimeLike]
        .into_iter()
        .filter(|&k| mesh.has_face_kind(k))
        .collect();
    if !bad.is_empty() {
        return Err(AnalysisError::AssumptionViolated(format!("mesh has {bad:?} faces")));
    }
    let layers = interface_layers(mesh)?;
    let gamma_factor = mesh
        .faces
        .iter()
        .filter(|f| matches!(f.kind, FaceKind::InteriorSpaceLike | FaceKind::Final))
        .map(|f| 4.0 * (1.0 + f.gamma * f.gamma) / (1.0 - f.gamma).powi(2))
        .fold(0.0, f64::max);
    let mut robin_factor: f64 = 0.0;
    for face in mesh.faces.iter().filter(|f| f.kind == FaceKind::Robin) {
        let d = params.delta(face.id)?;
        robin_factor = robin_factor.max(1.0 / (d * (1.0 - d)));
    }
    let n = layers.greedy;
    let c_stab_squared = 2.0 * mesh.domain.t_final * (n as f64 * gamma_factor + robin_factor);
    Ok(StabilityConstant {
        interfaces: n,
        gamma_factor,
        robin_factor,
        c_stab_squared,
        c_stab: c_stab_squared.sqrt(),
    })
}
