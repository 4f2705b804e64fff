//! Mesh- and flux-dependent DG norms.

use serde::Serialize;

use super::AnalysisError;
use crate::assembly::{jump_n, jump_t, mean, FluxParams};
use crate::mesh::{FaceKind, Mesh};
use crate::quadrature::face_rule_with_points;
use crate::solver::PiecewiseField;

/// One summand of a squared norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormTerm {
    pub name: &'static str,
    /// Contribution to the squared norm.
    pub value: f64,
    /// Part of the DG⁺ additions rather than of the DG norm.
    pub plus_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub dg_norm: f64,
    pub dg_plus_norm: f64,
    pub terms: Vec<NormTerm>,
}

impl NormReport {
    pub fn term(&self, name: &str) -> f64 {
        self.terms.iter().filter(|t| t.name == name).map(|t| t.value).sum()
    }
}

/// Options of the norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormOptions {
    /// Gauss points per face.
    pub points: usize,
    /// Keep the (1 − γ)^{±1} weights on space-like faces.
    pub gamma_weights: bool,
}

impl NormOptions {
    pub fn new(points: usize) -> Self {
        Self {
            points,
            gamma_weights: true,
        }
    }
}

const TERMS: [(&str, bool); 18] = [
    ("space_jump_w", false),
    ("space_jump_tau", false),
    ("initial_w", false),
    ("initial_tau", false),
    ("final_w", false),
    ("final_tau", false),
    ("time_jump_w", false),
    ("time_jump_tau", false),
    ("dirichlet_w", false),
    ("neumann_tau", false),
    ("robin_w", false),
    ("robin_tau", false),
    ("space_past_w", true),
    ("space_past_tau", true),
    ("time_mean_w", true),
    ("time_mean_tau", true),
    ("dirichlet_tau", true),
    ("neumann_w", true),
];

fn slot(name: &str) -> usize {
    TERMS.iter().position(|(n, _)| *n == name).expect("known norm term")
}

/// Evaluates every summand of the DG and DG⁺ norms of `field`.
pub fn norm_report(
    field: &dyn PiecewiseField,
    mesh: &Mesh,
    params: &FluxParams,
    options: NormOptions,
) -> Result<NormReport, AnalysisError> {
    let mut acc = [0.0f64; TERMS.len()];
    for face in &mesh.faces {
        let rule = face_rule_with_points(face, options.points)?;
        let n = face.normal;
        let minus = face.adjacency.minus;
        let c = minus.wave_speed;
        let c2 = c * c;
        let mut add = |name: &str, v: f64| acc[slot(name)] += v;
        for (pt, wt) in rule.iter() {
            let (wm, tm) = field.eval(minus.element, pt);
            let (wp, tp) = match face.adjacency.plus {
                Some(s) => field.eval(s.element, pt),
                None => (0.0, 0.0),
            };
            if ![wm, tm, wp, tp].iter().all(|v| v.is_finite()) {
                return Err(AnalysisError::MissingTrace(face.id));
            }
            match face.kind {
                FaceKind::InteriorSpaceLike => {
                    let g = if options.gamma_weights { face.gamma } else { 0.0 };
                    let jw = jump_t(wm, wp, n.t);
                    let jt = jump_t(tm, tp, n.t);
                    add("space_jump_w", wt * 0.5 * (1.0 - g) / n.t * jw * jw / c2);
                    add("space_jump_tau", wt * 0.5 * (1.0 - g) / n.t * jt * jt);
                    add("space_past_w", wt * n.t / (1.0 - g) * wm * wm / c2);
                    add("space_past_tau", wt * n.t / (1.0 - g) * tm * tm);
                }
                FaceKind::Initial => {
                    add("initial_w", wt * 0.5 * wm * wm / c2);
                    add("initial_tau", wt * 0.5 * tm * tm);
                }
                FaceKind::Final => {
                    add("final_w", wt * 0.5 * wm * wm / c2);
                    add("final_tau", wt * 0.5 * tm * tm);
                }
                FaceKind::InteriorTimeLike => {
                    let (a, b) = (params.alpha(face.id)?, params.beta(face.id)?);
                    add("time_jump_w", wt * a * jump_n(wm, wp, n.x).powi(2));
                    add("time_jump_tau", wt * b * jump_n(tm, tp, n.x).powi(2));
                    add("time_mean_w", wt / b * mean(wm, wp).powi(2));
                    add("time_mean_tau", wt / a * mean(tm, tp).powi(2));
                }
                FaceKind::Dirichlet => {
                    let a = params.alpha(face.id)?;
                    add("dirichlet_w", wt * a * wm * wm);
                    add("dirichlet_tau", wt / a * (tm * n.x).powi(2));
                }
                FaceKind::Neumann => {
                    let b = params.beta(face.id)?;
                    add("neumann_tau", wt * b * (tm * n.x).powi(2));
                    add("neumann_w", wt / b * wm * wm);
                }
                FaceKind::Robin => {
                    let (d, th) = (params.delta(face.id)?, params.theta(face.id)?);
                    add("robin_w", wt * (1.0 - d) * th / c * wm * wm);
                    add("robin_tau", wt * d * c / th * (tm * n.x).powi(2));
                }
            }
        }
    }
    let dg2: f64 = TERMS.iter().zip(&acc).filter(|((_, p), _)| !p).map(|(_, v)| v).sum();
    let plus2: f64 = TERMS.iter().zip(&acc).filter(|((_, p), _)| *p).map(|(_, v)| v).sum();
    Ok(NormReport {
        dg_norm: dg2.sqrt(),
        dg_plus_norm: (dg2 + plus2).sqrt(),
        terms: TERMS
            .iter()
            .zip(acc)
            .map(|(&(name, plus_only), value)| NormTerm { name, value, plus_only })
            .collect(),
    })
}

/// |||field|||_DG.
pub fn dg_norm(field: &dyn PiecewiseField, mesh: &Mesh, params: &FluxParams, points: usize) -> Result<f64, AnalysisError> {
    Ok(norm_report(field, mesh, params, NormOptions::new(points))?.dg_norm)
}

/// |||field|||_DG⁺.
pub fn dg_plus_norm(field: &dyn PiecewiseField, mesh: &Mesh, params: &FluxParams, points: usize) -> Result<f64, AnalysisError> {
    Ok(norm_report(field, mesh, params, NormOptions::new(points))?.dg_plus_norm)
}
