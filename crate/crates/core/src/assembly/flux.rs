//! Flux-matrix decomposition, DG jump operators and their identities.

use nalgebra::{Matrix2, Matrix4x2, SymmetricEigen};
use rand::Rng;

use super::{face_couplings, face_points, AssemblyError, FaceSideRole, FluxParams};
use crate::basis::TrefftzBasis;
use crate::mesh::{Face, FaceKind, Mesh, Normal, TIME_LIKE_TOL};
use crate::quadrature::face_rule_with_points;

/// Eigenvalue tolerance for the semidefiniteness flags.
pub const EIGEN_TOL: f64 = 1e-12;

/// Splitting M = M⁺ + M⁻ of the boundary matrix
/// `M = [[n_t/c², n_x], [n_x, n_t]]` of an element, seen from that element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxDecomposition {
    pub m: Matrix2<f64>,
    pub m_plus: Matrix2<f64>,
    pub m_minus: Matrix2<f64>,
    /// Largest entry of |M⁺ + M⁻ − M|.
    pub sum_residual: f64,
    /// ker(M⁺ − M⁻) = ker(M).
    pub kernel_matches: bool,
    /// Eigenvalues of the symmetric part of M⁺, ascending.
    pub plus_eigenvalues: [f64; 2],
    pub minus_eigenvalues: [f64; 2],
    pub plus_psd: bool,
    pub minus_nsd: bool,
}

fn boundary_matrix(n: Normal, c: f64) -> Matrix2<f64> {
    Matrix2::new(n.t / (c * c), n.x, n.x, n.t)
}

fn sym_eigenvalues(m: &Matrix2<f64>) -> [f64; 2] {
    let s = 0.5 * (m + m.transpose());
    let e = SymmetricEigen::new(s).eigenvalues;
    [e[0].min(e[1]), e[0].max(e[1])]
}

fn rank(m: &Matrix2<f64>) -> usize {
    let sv = m.svd(false, false).singular_values;
    let scale = sv.max().max(1.0);
    sv.iter().filter(|&&s| s > 1e-13 * scale).count()
}

fn stacked_rank(a: &Matrix2<f64>, b: &Matrix2<f64>) -> usize {
    let mut s = Matrix4x2::zeros();
    s.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    s.fixed_view_mut::<2, 2>(2, 0).copy_from(b);
    let sv = s.svd(false, false).singular_values;
    let scale = sv.max().max(1.0);
    sv.iter().filter(|&&x| x > 1e-13 * scale).count()
}

fn finish(m: Matrix2<f64>, m_plus: Matrix2<f64>, m_minus: Matrix2<f64>) -> FluxDecomposition {
    let sum_residual = (m_plus + m_minus - m).abs().max();
    let diff = m_plus - m_minus;
    let r = rank(&m);
    let kernel_matches = rank(&diff) == r && stacked_rank(&diff, &m) == r;
    let plus_eigenvalues = sym_eigenvalues(&m_plus);
    let minus_eigenvalues = sym_eigenvalues(&m_minus);
    FluxDecomposition {
        m,
        m_plus,
        m_minus,
        sum_residual,
        kernel_matches,
        plus_eigenvalues,
        minus_eigenvalues,
        plus_psd: plus_eigenvalues[0] >= -EIGEN_TOL,
        minus_nsd: minus_eigenvalues[1] <= EIGEN_TOL,
    }
}

/// Decomposition on an interior face for an element with outward normal `normal`.
///
/// Faces with |n_t| ≤ 1e-12 are treated as time-like, where
/// M± = [[±α, n_x/2], [n_x/2, ±β n_x²]]; otherwise the face is space-like and
/// M⁺ = M, M⁻ = 0 on outflow (n_t > 0), mirrored on inflow.
pub fn flux_matrix_decomposition(normal: Normal, c: f64, alpha: f64, beta: f64) -> FluxDecomposition {
    let m = boundary_matrix(normal, c);
    let (m_plus, m_minus) = if normal.t.abs() <= TIME_LIKE_TOL {
        let (h, nx2) = (0.5 * normal.x, normal.x * normal.x);
        (
            Matrix2::new(alpha, h, h, beta * nx2),
            Matrix2::new(-alpha, h, h, -beta * nx2),
        )
    } else if normal.t > 0.0 {
        (m, Matrix2::zeros())
    } else {
        (Matrix2::zeros(), m)
    };
    finish(m, m_plus, m_minus)
}

/// Decomposition on a boundary face: M⁺ is the face's self-coupling in the
/// bilinear form and M⁻ = M − M⁺ the part moved to the load.
pub fn boundary_flux_decomposition(face: &Face, params: &FluxParams) -> Result<FluxDecomposition, AssemblyError> {
    if face.kind.is_interior() {
        return Err(AssemblyError::WrongFaceKind {
            face: face.id,
            kind: face.kind,
        });
    }
    let m = boundary_matrix(face.normal, face.adjacency.minus.wave_speed);
    let m_plus = face_couplings(face, params)?
        .into_iter()
        .find(|c| c.trial == FaceSideRole::Minus && c.test == FaceSideRole::Minus)
        .map_or(Matrix2::zeros(), |c| c.matrix);
    Ok(finish(m, m_plus, m - m_plus))
}

/// Largest entry of M⁺|K₁ + M⁻|K₂ on an interior face shared by K₁ and K₂.
pub fn check_neighbour_cancellation(face: &Face, params: &FluxParams) -> Result<f64, AssemblyError> {
    let plus = face.adjacency.plus.ok_or(AssemblyError::WrongFaceKind {
        face: face.id,
        kind: face.kind,
    })?;
    let (a, b) = if face.kind == FaceKind::InteriorTimeLike {
        (params.alpha(face.id)?, params.beta(face.id)?)
    } else {
        (1.0, 1.0)
    };
    let k1 = flux_matrix_decomposition(face.normal, face.adjacency.minus.wave_speed, a, b);
    let k2 = flux_matrix_decomposition(face.normal.flipped(), plus.wave_speed, a, b);
    Ok((k1.m_plus + k2.m_minus).abs().max().max((k2.m_plus + k1.m_minus).abs().max()))
}

/// Average {u} of two traces.
pub fn mean(minus: f64, plus: f64) -> f64 {
    0.5 * (minus + plus)
}

/// Normal jump [u]_N = (u⁻ − u⁺) n_x, with `n_x` the minus element's normal.
pub fn jump_n(minus: f64, plus: f64, n_x: f64) -> f64 {
    (minus - plus) * n_x
}

/// Time jump [u]_t = (u⁻ − u⁺) n_t.
pub fn jump_t(minus: f64, plus: f64, n_t: f64) -> f64 {
    (minus - plus) * n_t
}

/// Largest residual of each of the four jump identities over random samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpIdentityReport {
    pub samples: usize,
    pub max_residual: [f64; 4],
}

/// Samples random traces and random space-like unit normals and evaluates
///
/// ```text
/// w⁻[w]_t − ½[w²]_t = [w]_t² / (2 n_t)
/// τ⁻[τ]_t − ½[τ²]_t = [τ]_t² / (2 n_t)
/// w⁻[τ]_N + τ⁻[w]_N − [wτ]_N = [w]_t [τ]_N / n_t
/// {w}[τ]_N + {τ}[w]_N = [wτ]_N
/// ```
///
/// Residuals are relative to the size of the terms involved.
pub fn check_jump_identities<R: Rng>(rng: &mut R, samples: usize) -> JumpIdentityReport {
    let mut max_residual = [0.0f64; 4];
    for _ in 0..samples {
        let angle: f64 = rng.random_range(-1.2..1.2);
        let (nx, nt) = (angle.sin(), angle.cos());
        let (wm, wp, tm, tp): (f64, f64, f64, f64) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        let scale = 1.0 + wm.abs().max(wp.abs()).max(tm.abs()).max(tp.abs()).powi(2) / nt;
        let jw = jump_t(wm, wp, nt);
        let jt = jump_t(tm, tp, nt);
        let r = [
            wm * jw - 0.5 * jump_t(wm * wm, wp * wp, nt) - jw * jw / (2.0 * nt),
            tm * jt - 0.5 * jump_t(tm * tm, tp * tp, nt) - jt * jt / (2.0 * nt),
            wm * jump_n(tm, tp, nx) + tm * jump_n(wm, wp, nx)
                - jump_n(wm * tm, wp * tp, nx)
                - jw * jump_n(tm, tp, nx) / nt,
            mean(wm, wp) * jump_n(tm, tp, nx) + mean(tm, tp) * jump_n(wm, wp, nx)
                - jump_n(wm * tm, wp * tp, nx),
        ];
        for (m, v) in max_residual.iter_mut().zip(r) {
            *m = m.max(v.abs() / scale);
        }
    }
    JumpIdentityReport {
        samples,
        max_residual,
    }
}

/// Largest |∫_∂K (w τ n_x + ½(w²/c² + τ²) n_t)| over all basis fields of all
/// elements. Vanishes for fields solving the wave system.
pub fn check_elemental_identity(mesh: &Mesh, bases: &[TrefftzBasis]) -> Result<f64, AssemblyError> {
    let mut worst: f64 = 0.0;
    let mut vals = Vec::new();
    for (el, basis) in mesh.elements.iter().zip(bases) {
        let c2 = el.wave_speed * el.wave_speed;
        let mut sums = vec![0.0; basis.len()];
        for &f in &el.faces {
            let face = &mesh.faces[f];
            let n = face.outward_normal(el.id);
            let rule = face_rule_with_points(face, face_points(basis.degree))?;
            for (p, wt) in rule.iter() {
                basis.eval_into(p, &mut vals);
                for (s, &(w, tau)) in sums.iter_mut().zip(&vals) {
                    *s += wt * (w * tau * n.x + 0.5 * (w * w / c2 + tau * tau) * n.t);
                }
            }
        }
        worst = sums.iter().fold(worst, |m, s| m.max(s.abs()));
    }
    Ok(worst)
}
