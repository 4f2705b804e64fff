//! Energies on space-like interfaces and the discrete dissipation balance.

use serde::Serialize;

use super::AnalysisError;
use crate::assembly::{face_points, FluxParams};
use crate::mesh::{interface_fronts, FaceId, FaceKind, Mesh};
use crate::problem::{BoundaryPoint, ProblemData};
use crate::quadrature::face_rule_with_points;
use crate::solver::{DiscreteSolution, PiecewiseField};

/// Which trace of a discontinuous field enters an interface integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSide {
    /// Trace from the element below the interface.
    Past,
    /// Trace from the element above the interface.
    Future,
}

fn side_element(mesh: &Mesh, f: FaceId, side: TraceSide) -> usize {
    let face = &mesh.faces[f];
    match (face.kind, side, face.adjacency.plus) {
        (FaceKind::InteriorSpaceLike, TraceSide::Future, Some(plus)) => plus.element,
        _ => face.adjacency.minus.element,
    }
}

fn check_space_like(mesh: &Mesh, faces: &[FaceId]) -> Result<(), AnalysisError> {
    match faces.iter().find(|&&f| !mesh.faces[f].kind.is_space_like()) {
        Some(&f) => Err(AnalysisError::NotSpaceLike(f)),
        None => Ok(()),
    }
}

/// E(Σ) = ∫_Σ (w τ n_x + ½(w²/c² + τ²) n_t) with the future-pointing normal.
pub fn energy(
    field: &dyn PiecewiseField,
    mesh: &Mesh,
    faces: &[FaceId],
    side: TraceSide,
    points: usize,
) -> Result<f64, AnalysisError> {
    Ok(energy_with_bounds(field, mesh, faces, side, points)?.energy)
}

/// Energy together with its (1 ∓ γ) lower and upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBounds {
    pub lower: f64,
    pub energy: f64,
    pub upper: f64,
}

pub fn energy_with_bounds(
    field: &dyn PiecewiseField,
    mesh: &Mesh,
    faces: &[FaceId],
    side: TraceSide,
    points: usize,
) -> Result<EnergyBounds, AnalysisError> {
    check_space_like(mesh, faces)?;
    let mut out = EnergyBounds {
        lower: 0.0,
        energy: 0.0,
        upper: 0.0,
    };
    for &f in faces {
        let face = &mesh.faces[f];
        let e = side_element(mesh, f, side);
        let c = mesh.elements[e].wave_speed;
        let n = face.future_normal();
        let gamma = c * n.x.abs() / n.t;
        let rule = face_rule_with_points(face, points)?;
        for (pt, wt) in rule.iter() {
            let (w, tau) = field.eval(e, pt);
            let density = 0.5 * (w * w / (c * c) + tau * tau) * n.t;
            out.energy += wt * (w * tau * n.x + density);
            out.lower += wt * (1.0 - gamma) * density;
            out.upper += wt * (1.0 + gamma) * density;
        }
    }
    Ok(out)
}

/// Energy of the initial data, E(0; v₀, σ₀) = ½ ∫ (v₀²/c² + σ₀²) dx.
pub fn initial_energy(mesh: &Mesh, data: &ProblemData, points: usize) -> Result<f64, AnalysisError> {
    let mut e = 0.0;
    for face in mesh.faces.iter().filter(|f| f.kind == FaceKind::Initial) {
        let c = face.adjacency.minus.wave_speed;
        let rule = face_rule_with_points(face, points)?;
        e += rule.integrate(|p| 0.5 * ((data.v0)(p.x).powi(2) / (c * c) + (data.sigma0)(p.x).powi(2)));
    }
    Ok(e)
}

/// Right-hand side (2‖v₀/c‖² + 2‖σ₀‖² + ‖(c/θ)^{1/2} g_R‖²)^{1/2} of the
/// stability bound for data with g_D = g_N = 0.
pub fn stability_data_bound(
    mesh: &Mesh,
    data: &ProblemData,
    params: &FluxParams,
    points: usize,
) -> Result<f64, AnalysisError> {
    let mut total = 4.0 * initial_energy(mesh, data, points)?;
    for face in mesh.faces.iter().filter(|f| f.kind == FaceKind::Robin) {
        let c = face.adjacency.minus.wave_speed;
        let theta = params.theta(face.id)?;
        let rule = face_rule_with_points(face, points)?;
        total += rule.integrate(|p| {
            let g = (data.g_robin)(&BoundaryPoint {
                x: p.x,
                t: p.t,
                normal_x: face.normal.x,
                wave_speed: c,
                theta,
            });
            c / theta * g * g
        });
    }
    Ok(total.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// E(0; v₀, σ₀) from the data.
    pub initial: f64,
    /// E(T) of the discrete solution.
    pub final_energy: f64,
    /// Energy of the discrete solution on each interior front of the causal
    /// sweep (past-side traces), in time order.
    pub interfaces: Vec<f64>,
    /// E(T) ≤ E(0) up to 1e-12 relative slack.
    pub dissipative: bool,
}

/// Energy balance of a discrete solution. The inequality E(T) ≤ E(0) is
/// expected for homogeneous boundary data.
pub fn dissipation_report(
    solution: &DiscreteSolution,
    mesh: &Mesh,
    data: &ProblemData,
) -> Result<EnergyReport, AnalysisError> {
    let points = face_points(solution.degree);
    let initial = initial_energy(mesh, data, points)?;
    let finals: Vec<FaceId> = mesh.faces.iter().filter(|f| f.kind == FaceKind::Final).map(|f| f.id).collect();
    let final_energy = energy(solution, mesh, &finals, TraceSide::Past, points)?;
    let interfaces = match interface_fronts(mesh) {
        Ok(fronts) => fronts[1..fronts.len() - 1]
            .iter()
            .map(|f| energy(solution, mesh, &f.faces, TraceSide::Past, points))
            .collect::<Result<_, _>>()?,
        _ => Vec::new(),
    };
    Ok(EnergyReport {
        initial,
        final_energy,
        interfaces,
        dissipative: final_energy <= initial * (1.0 + 1e-12) + 1e-300,
    })
}
