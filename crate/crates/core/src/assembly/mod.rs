//! Face-by-face assembly of the Trefftz DG bilinear form and load functional.
//!
//! With trial field (v, σ) and test field (w, τ), every face contributes
//! integrals of the form `[w τ] · C · [v σ]ᵀ`, where the 2×2 coupling matrix
//! `C` depends on the face kind, the side of the trial and test traces and the
//! flux parameters. There are no volume terms since both fields solve the
//! wave system exactly inside every element.
//!
//! Blocks are stored with the test dofs as rows and the trial dofs as
//! columns, so that `A u = ℓ` is the discrete problem.

mod flux;
mod system;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{build_bases, TrefftzBasis};
use crate::mesh::{ElementId, Face, FaceId, FaceKind, Mesh};
use crate::problem::{BoundaryPoint, ProblemData};
use crate::quadrature::{face_rule_with_points, QuadratureError};

pub use flux::{
    boundary_flux_decomposition, check_elemental_identity, check_jump_identities,
    check_neighbour_cancellation, flux_matrix_decomposition, jump_n, jump_t, mean,
    FluxDecomposition, JumpIdentityReport, EIGEN_TOL,
};
pub use system::LinearSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("face {0} has no usable classification")]
    UnclassifiedFace(FaceId),
    #[error("interior face {0} needs the basis of both adjacent elements")]
    MissingNeighbourBasis(FaceId),
    #[error("flux parameter {name} is not set on face {face}")]
    MissingParam { face: FaceId, name: &'static str },
    #[error("flux parameter {name} = {value} is inadmissible on face {face}: {reason}")]
    InadmissibleParam {
        face: FaceId,
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("face {face} of kind {kind:?} carries no load term")]
    WrongFaceKind { face: FaceId, kind: FaceKind },
    #[error("basis of element {got} passed for face {face} (expected element {expected})")]
    BasisMismatch {
        face: FaceId,
        expected: ElementId,
        got: ElementId,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Per-face overrides of the flux parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

/// Flux parameters: α on time-like and Dirichlet faces, β on time-like and
/// Neumann faces, δ and the impedance θ on Robin faces.
///
/// Global values apply unless a face has an override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxParams {
    #[serde(default = "half")]
    pub alpha: Option<f64>,
    #[serde(default = "half")]
    pub beta: Option<f64>,
    #[serde(default = "half")]
    pub delta: Option<f64>,
    #[serde(default = "one")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<FaceId, FaceParams>,
}

fn half() -> Option<f64> {
    Some(0.5)
}

fn one() -> Option<f64> {
    Some(1.0)
}

impl Default for FluxParams {
    fn default() -> Self {
        Self {
            alpha: half(),
            beta: half(),
            delta: half(),
            theta: one(),
            overrides: BTreeMap::new(),
        }
    }
}

impl FluxParams {
    /// Same α and β everywhere, other values at their defaults.
    pub fn with_alpha_beta(alpha: f64, beta: f64) -> Self {
        Self {
            alpha: Some(alpha),
            beta: Some(beta),
            ..Self::default()
        }
    }

    /// No global values at all; every needed parameter must come from an override.
    pub fn unset() -> Self {
        Self {
            alpha: None,
            beta: None,
            delta: None,
            theta: None,
            overrides: BTreeMap::new(),
        }
    }

    fn lookup(
        &self,
        face: FaceId,
        name: &'static str,
        global: Option<f64>,
        pick: fn(&FaceParams) -> Option<f64>,
    ) -> Result<f64, AssemblyError> {
        self.overrides
            .get(&face)
            .and_then(pick)
            .or(global)
            .ok_or(AssemblyError::MissingParam { face, name })
    }

    pub fn alpha(&self, face: FaceId) -> Result<f64, AssemblyError> {
        self.lookup(face, "alpha", self.alpha, |f| f.alpha)
    }

    pub fn beta(&self, face: FaceId) -> Result<f64, AssemblyError> {
        self.lookup(face, "beta", self.beta, |f| f.beta)
    }

    pub fn delta(&self, face: FaceId) -> Result<f64, AssemblyError> {
        self.lookup(face, "delta", self.delta, |f| f.delta)
    }

    pub fn theta(&self, face: FaceId) -> Result<f64, AssemblyError> {
        self.lookup(face, "theta", self.theta, |f| f.theta)
    }

    /// Checks that every parameter a face needs is present and admissible:
    /// α, β, θ > 0 and 0 < δ < 1.
    pub fn check(&self, mesh: &Mesh) -> Result<(), AssemblyError> {
        let positive = |face, name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(AssemblyError::InadmissibleParam {
                    face,
                    name,
                    value,
                    reason: "must be positive and finite",
                })
            }
        };
        for face in &mesh.faces {
            let id = face.id;
            match face.kind {
                FaceKind::InteriorTimeLike => {
                    positive(id, "alpha", self.alpha(id)?)?;
                    positive(id, "beta", self.beta(id)?)?;
                }
                FaceKind::Dirichlet => positive(id, "alpha", self.alpha(id)?)?,
                FaceKind::Neumann => positive(id, "beta", self.beta(id)?)?,
                FaceKind::Robin => {
                    positive(id, "theta", self.theta(id)?)?;
                    let delta = self.delta(id)?;
                    if !(delta > 0.0 && delta < 1.0) {
                        return Err(AssemblyError::InadmissibleParam {
                            face: id,
                            name: "delta",
                            value: delta,
                            reason: "must lie in (0, 1)",
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Which adjacent element a trace belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceSideRole {
    Minus,
    Plus,
}

/// One term `[w τ] · matrix · [v σ]ᵀ` of a face integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub trial: FaceSideRole,
    pub test: FaceSideRole,
    pub matrix: Matrix2<f64>,
}

/// Coupling matrices of a face. Initial faces have none.
pub fn face_couplings(face: &Face, params: &FluxParams) -> Result<Vec<Coupling>, AssemblyError> {
    use FaceSideRole::{Minus, Plus};
    let n = face.normal;
    let c = face.adjacency.minus.wave_speed;
    let one = |trial, test, matrix| Coupling { trial, test, matrix };
    Ok(match face.kind {
        FaceKind::InteriorSpaceLike => {
            // Upwind: only the past (minus) trace enters.
            let m = Matrix2::new(n.t / (c * c), n.x, n.x, n.t);
            vec![one(Minus, Minus, m), one(Minus, Plus, -m)]
        }
        FaceKind::InteriorTimeLike => {
            let (a, b) = (params.alpha(face.id)?, params.beta(face.id)?);
            let h = 0.5 * n.x;
            let nx2 = n.x * n.x;
            vec![
                one(Minus, Minus, Matrix2::new(a * nx2, h, h, b * nx2)),
                one(Plus, Minus, Matrix2::new(-a * nx2, h, h, -b * nx2)),
                one(Plus, Plus, Matrix2::new(a * nx2, -h, -h, b * nx2)),
                one(Minus, Plus, Matrix2::new(-a * nx2, -h, -h, -b * nx2)),
            ]
        }
        FaceKind::Initial => Vec::new(),
        FaceKind::Final => vec![one(Minus, Minus, Matrix2::new(1.0 / (c * c), 0.0, 0.0, 1.0))],
        FaceKind::Dirichlet => {
            let a = params.alpha(face.id)?;
            vec![one(Minus, Minus, Matrix2::new(a, n.x, 0.0, 0.0))]
        }
        FaceKind::Neumann => {
            let b = params.beta(face.id)?;
            vec![one(Minus, Minus, Matrix2::new(0.0, 0.0, n.x, b * n.x * n.x))]
        }
        FaceKind::Robin => {
            let (d, th) = (params.delta(face.id)?, params.theta(face.id)?);
            vec![one(
                Minus,
                Minus,
                Matrix2::new((1.0 - d) * th / c, d * n.x, (1.0 - d) * n.x, d * c / th),
            )]
        }
    })
}

/// Number of Gauss points per face used throughout assembly and analysis.
///
/// Exact for traces of degree 2p + 3, so products of basis traces are
/// integrated exactly and smooth data gets a little headroom.
pub fn face_points(p: usize) -> usize {
    p + 2
}

/// Dense blocks of one face keyed by (trial element, test element), and
/// load contributions per test element.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBlocks {
    pub face: FaceId,
    pub blocks: Vec<((ElementId, ElementId), DMatrix<f64>)>,
    pub rhs: Vec<(ElementId, DVector<f64>)>,
}

fn check_basis(face: &Face, expected: ElementId, basis: &TrefftzBasis) -> Result<(), AssemblyError> {
    if basis.element != expected {
        return Err(AssemblyError::BasisMismatch {
            face: face.id,
            expected,
            got: basis.element,
        });
    }
    Ok(())
}

/// Bilinear-form blocks of one face.
///
/// `minus` and `plus` are the bases of the adjacent elements (`plus` only on
/// interior faces); trial and test spaces coincide.
pub fn face_bilinear_blocks(
    face: &Face,
    minus: &TrefftzBasis,
    plus: Option<&TrefftzBasis>,
    params: &FluxParams,
) -> Result<FaceBlocks, AssemblyError> {
    check_basis(face, face.adjacency.minus.element, minus)?;
    if face.kind.is_interior() != face.adjacency.plus.is_some() {
        return Err(AssemblyError::UnclassifiedFace(face.id));
    }
    let plus = match (face.adjacency.plus, plus) {
        (Some(side), Some(b)) => {
            check_basis(face, side.element, b)?;
            Some(b)
        }
        (Some(_), None) => return Err(AssemblyError::MissingNeighbourBasis(face.id)),
        (None, _) => None,
    };
    let couplings = face_couplings(face, params)?;
    let degree = minus.degree.max(plus.map_or(0, |b| b.degree));
    let rule = face_rule_with_points(face, face_points(degree))?;
    let basis_of = |role| match role {
        FaceSideRole::Minus => minus,
        FaceSideRole::Plus => plus.expect("plus side present for interior couplings"),
    };

    let mut blocks = Vec::with_capacity(couplings.len());
    let (mut trial_vals, mut test_vals) = (Vec::new(), Vec::new());
    for coupling in &couplings {
        let (trial, test) = (basis_of(coupling.trial), basis_of(coupling.test));
        let mut block = DMatrix::zeros(test.len(), trial.len());
        let m = coupling.matrix;
        for (pt, wt) in rule.iter() {
            trial_vals.clear();
            trial.eval_into(pt, &mut trial_vals);
            test.eval_into(pt, &mut test_vals);
            for (j, &(v, s)) in trial_vals.iter().enumerate() {
                let fw = wt * (m[(0, 0)] * v + m[(0, 1)] * s);
                let ft = wt * (m[(1, 0)] * v + m[(1, 1)] * s);
                for (i, &(w, tau)) in test_vals.iter().enumerate() {
                    block[(i, j)] += w * fw + tau * ft;
                }
            }
        }
        blocks.push(((trial.element, test.element), block));
    }
    Ok(FaceBlocks {
        face: face.id,
        blocks,
        rhs: Vec::new(),
    })
}

/// Load contribution of an initial or lateral boundary face for the test
/// basis of its only element.
pub fn face_rhs(
    face: &Face,
    basis: &TrefftzBasis,
    data: &ProblemData,
    params: &FluxParams,
) -> Result<DVector<f64>, AssemblyError> {
    check_basis(face, face.adjacency.minus.element, basis)?;
    let c = face.adjacency.minus.wave_speed;
    let nx = face.normal.x;
    // Integrand as weights (a_w, a_τ) of the test components at a point.
    let weights: Box<dyn Fn(f64, f64) -> (f64, f64) + '_> = match face.kind {
        FaceKind::Initial => Box::new(|x, _| ((data.v0)(x) / (c * c), (data.sigma0)(x))),
        FaceKind::Dirichlet => {
            let a = params.alpha(face.id)?;
            Box::new(move |x, t| {
                let g = (data.g_dirichlet)(&boundary_point(x, t, nx, c, 1.0));
                (a * g, -g * nx)
            })
        }
        FaceKind::Neumann => {
            let b = params.beta(face.id)?;
            Box::new(move |x, t| {
                let g = (data.g_neumann)(&boundary_point(x, t, nx, c, 1.0));
                (-g, b * g * nx)
            })
        }
        FaceKind::Robin => {
            let (d, th) = (params.delta(face.id)?, params.theta(face.id)?);
            Box::new(move |x, t| {
                let g = (data.g_robin)(&boundary_point(x, t, nx, c, th));
                ((1.0 - d) * g, -d * c / th * g * nx)
            })
        }
        kind => return Err(AssemblyError::WrongFaceKind { face: face.id, kind }),
    };
    let rule = face_rule_with_points(face, face_points(basis.degree))?;
    let mut out = DVector::zeros(basis.len());
    let mut vals = Vec::with_capacity(basis.len());
    for (pt, wt) in rule.iter() {
        let (aw, at) = weights(pt.x, pt.t);
        basis.eval_into(pt, &mut vals);
        for (i, &(w, tau)) in vals.iter().enumerate() {
            out[i] += wt * (aw * w + at * tau);
        }
    }
    Ok(out)
}

fn boundary_point(x: f64, t: f64, normal_x: f64, wave_speed: f64, theta: f64) -> BoundaryPoint {
    BoundaryPoint {
        x,
        t,
        normal_x,
        wave_speed,
        theta,
    }
}

/// All blocks and loads of one face.
pub fn face_contributions(
    face: &Face,
    bases: &[TrefftzBasis],
    params: &FluxParams,
    data: &ProblemData,
) -> Result<FaceBlocks, AssemblyError> {
    let minus = &bases[face.adjacency.minus.element];
    let plus = face.adjacency.plus.map(|s| &bases[s.element]);
    let mut fb = face_bilinear_blocks(face, minus, plus, params)?;
    if matches!(
        face.kind,
        FaceKind::Initial | FaceKind::Dirichlet | FaceKind::Neumann | FaceKind::Robin
    ) {
        fb.rhs.push((minus.element, face_rhs(face, minus, data, params)?));
    }
    Ok(fb)
}

/// Assembles the global system on `mesh` with polynomial degree `p`.
pub fn assemble_global(
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    data: &ProblemData,
) -> Result<LinearSystem, AssemblyError> {
    assemble_with_bases(mesh, build_bases(mesh, p), params, data)
}

/// Assembles with given bases. Faces are processed in parallel and
/// accumulated in face-id order, so the result does not depend on scheduling.
pub fn assemble_with_bases(
    mesh: &Mesh,
    bases: Vec<TrefftzBasis>,
    params: &FluxParams,
    data: &ProblemData,
) -> Result<LinearSystem, AssemblyError> {
    params.check(mesh)?;
    let contributions: Vec<FaceBlocks> = mesh
        .faces
        .par_iter()
        .map(|face| face_contributions(face, &bases, params, data))
        .collect::<Result<_, _>>()?;
    let mut system = LinearSystem::zeros(bases);
    for fb in contributions {
        system.add_face(fb);
    }
    Ok(system)
}
