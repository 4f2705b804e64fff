//! Gauss-Legendre rules on segments and fan-triangulated rules on star-shaped polygons.
//!
//! Assembly only ever integrates over faces; polygon rules exist for reporting
//! space-time L² errors.

use std::sync::OnceLock;

use thiserror::Error;

use crate::mesh::{Element, Face, SpaceTimePoint};

/// Largest supported number of Gauss points.
pub const MAX_POINTS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("unsupported Gauss-Legendre order {0} (supported: 1..={MAX_POINTS})")]
    UnsupportedOrder(usize),
    #[error("degenerate face {0}: zero length")]
    DegenerateFace(usize),
    #[error("element {0} is not star-shaped with respect to its centroid")]
    NotStarShaped(usize),
}

/// Nodes and positive weights, exact up to `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<P> {
    pub nodes: Vec<P>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl<P: Copy> QuadRule<P> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (P, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut(P) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }
}

static RULES: [OnceLock<QuadRule<f64>>; MAX_POINTS] = [const { OnceLock::new() }; MAX_POINTS];

/// `m`-point Gauss-Legendre rule on [-1, 1], exact for degree `2m - 1`.
///
/// Rules are computed once by Newton iteration on the Legendre recurrence
/// and cached.
pub fn gauss_legendre(m: usize) -> Result<&'static QuadRule<f64>, QuadratureError> {
    if m == 0 || m > MAX_POINTS {
        return Err(QuadratureError::UnsupportedOrder(m));
    }
    Ok(RULES[m - 1].get_or_init(|| compute_gauss_legendre(m)))
}

/// Evaluates (P_m(x), P_m'(x)) by the three-term recurrence.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_gauss_legendre(m: usize) -> QuadRule<f64> {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let theta = std::f64::consts::PI * (4.0 * i as f64 + 3.0) / (4.0 * mf + 2.0);
        let mut x = (1.0 - (mf - 1.0) / (8.0 * mf * mf * mf)) * theta.cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    QuadRule {
        nodes,
        weights,
        degree: 2 * m - 1,
    }
}

/// Number of Gauss points needed to integrate polynomials of `degree` exactly.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

/// Gauss rule mapped onto a straight segment; weights include the half-length.
pub fn segment_rule(
    a: SpaceTimePoint,
    b: SpaceTimePoint,
    points: usize,
) -> Result<QuadRule<SpaceTimePoint>, QuadratureError> {
    let base = gauss_legendre(points)?;
    let half = 0.5 * a.distance(&b);
    let mid = a.midpoint(&b);
    let (hx, ht) = (0.5 * (b.x - a.x), 0.5 * (b.t - a.t));
    Ok(QuadRule {
        nodes: base
            .nodes
            .iter()
            .map(|&xi| SpaceTimePoint::new(mid.x + xi * hx, mid.t + xi * ht))
            .collect(),
        weights: base.weights.iter().map(|w| w * half).collect(),
        degree: base.degree,
    })
}

/// Face rule exact for traces of polynomial degree `degree`.
pub fn face_rule(face: &Face, degree: usize) -> Result<QuadRule<SpaceTimePoint>, QuadratureError> {
    face_rule_with_points(face, points_for_degree(degree))
}

pub fn face_rule_with_points(
    face: &Face,
    points: usize,
) -> Result<QuadRule<SpaceTimePoint>, QuadratureError> {
    let [a, b] = face.endpoints;
    if a.distance(&b) <= 0.0 {
        return Err(QuadratureError::DegenerateFace(face.id));
    }
    segment_rule(a, b, points)
}

/// Collapsed-square rule on the triangle (a, b, c); needs positive orientation.
fn triangle_rule(
    a: SpaceTimePoint,
    b: SpaceTimePoint,
    c: SpaceTimePoint,
    degree: usize,
    out: &mut QuadRule<SpaceTimePoint>,
) -> Result<(), QuadratureError> {
    // The Duffy map adds one power of u through its Jacobian.
    let m = points_for_degree(degree + 1);
    let base = gauss_legendre(m)?;
    let twice_area = (b.x - a.x) * (c.t - a.t) - (c.x - a.x) * (b.t - a.t);
    for (&xu, &wu) in base.nodes.iter().zip(&base.weights) {
        let u = 0.5 * (xu + 1.0);
        for (&xv, &wv) in base.nodes.iter().zip(&base.weights) {
            let v = 0.5 * (xv + 1.0);
            let x = a.x + u * (b.x - a.x) + u * v * (c.x - b.x);
            let t = a.t + u * (b.t - a.t) + u * v * (c.t - b.t);
            out.nodes.push(SpaceTimePoint::new(x, t));
            out.weights.push(0.25 * wu * wv * u * twice_area);
        }
    }
    Ok(())
}

/// Volume rule on a star-shaped polygon via fan triangulation from the centroid.
pub fn element_rule(
    element: &Element,
    vertices: &[SpaceTimePoint],
    degree: usize,
) -> Result<QuadRule<SpaceTimePoint>, QuadratureError> {
    let centroid = element.centroid;
    let mut rule = QuadRule {
        nodes: Vec::new(),
        weights: Vec::new(),
        degree,
    };
    let n = element.vertices.len();
    for i in 0..n {
        let p = vertices[element.vertices[i]];
        let q = vertices[element.vertices[(i + 1) % n]];
        let twice_area = (p.x - centroid.x) * (q.t - centroid.t) - (q.x - centroid.x) * (p.t - centroid.t);
        if twice_area <= 0.0 {
            return Err(QuadratureError::NotStarShaped(element.id));
        }
        triangle_rule(centroid, p, q, degree, &mut rule)?;
    }
    Ok(rule)
}
