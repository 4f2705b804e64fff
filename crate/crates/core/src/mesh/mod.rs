//! 1+1 dimensional space-time meshes.
//!
//! Elements are counterclockwise polygons in the (x, t) plane with a constant
//! wave speed. Faces are derived from the polygons: shared edges become
//! interior faces classified as space-like or time-like, unshared edges are
//! tagged as initial, final, or lateral boundary faces.
//!
//! Every face stores a single unit normal which is the outward normal of its
//! `minus` element. On space-like faces `minus` is the past element and the
//! normal points to the future; on time-like faces `minus` is the left
//! element; on boundary faces `minus` is the only adjacent element.

mod causal;
mod generate;
mod io;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use causal::{
    causal_order, count_interface_layers, interface_fronts, interface_layers, CausalOrder,
    InterfaceFront, InterfaceLayers,
};
pub use generate::{build_slab_mesh, build_tent_mesh, MeshSpec, TentParams};
pub use io::{MeshFile, MeshFileBoundary, MeshFileDomain, MeshFileElement, MESH_FILE_VERSION};
pub use validate::{validate_mesh, MeshViolation, ValidationReport};

pub type ElementId = usize;
pub type FaceId = usize;

/// Normal component below which a face counts as time-like.
pub const TIME_LIKE_TOL: f64 = 1e-12;
/// Relative margin required by the strict space-like inequality.
pub const SPACE_LIKE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("degenerate face between {0:?} and {1:?}")]
    DegenerateFace(SpaceTimePoint, SpaceTimePoint),
    #[error("face between {a:?} and {b:?} is neither space-like nor time-like (n_t = {n_t:.3e}, c|n_x| = {cn_x:.3e})")]
    UnclassifiableFace {
        a: SpaceTimePoint,
        b: SpaceTimePoint,
        n_t: f64,
        cn_x: f64,
    },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("tent pitching made no progress after {0} iterations")]
    NonTerminating(usize),
    #[error("mesh has {0} interior time-like faces")]
    HasTimeLikeFaces(usize),
    #[error("causal dependency cycle through {0} elements")]
    CyclicDependency(usize),
    #[error("element {0}: {1}")]
    InvalidElement(ElementId, String),
    #[error("edge ({0}, {1}) is shared by more than two elements")]
    NonManifoldEdge(usize, usize),
    #[error("boundary edge ({0:?}, {1:?}) lies on no domain side")]
    DanglingEdge(SpaceTimePoint, SpaceTimePoint),
    #[error("no boundary condition tagged for {side:?} side at t = {t}")]
    MissingBoundaryTag { side: Side, t: f64 },
    #[error("invalid mesh data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub const fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.x - other.x).hypot(self.t - other.t)
    }

    pub fn midpoint(&self, other: &Self) -> Self {
        Self::new(0.5 * (self.x + other.x), 0.5 * (self.t + other.t))
    }
}

/// Unit vector in the (x, t) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normal {
    pub x: f64,
    pub t: f64,
}

impl Normal {
    pub const fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }

    pub fn flipped(self) -> Self {
        Self::new(-self.x, -self.t)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "left")]
    Left,
    #[serde(rename = "right")]
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryKind {
    #[serde(rename = "D", alias = "dirichlet")]
    Dirichlet,
    #[serde(rename = "N", alias = "neumann")]
    Neumann,
    #[serde(rename = "R", alias = "robin")]
    Robin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceKind {
    InteriorSpaceLike,
    InteriorTimeLike,
    Initial,
    Final,
    Dirichlet,
    Neumann,
    Robin,
}

impl FaceKind {
    pub fn is_interior(self) -> bool {
        matches!(self, Self::InteriorSpaceLike | Self::InteriorTimeLike)
    }

    pub fn is_lateral(self) -> bool {
        matches!(self, Self::Dirichlet | Self::Neumann | Self::Robin)
    }

    /// Faces that may be part of a space-like interface.
    pub fn is_space_like(self) -> bool {
        matches!(self, Self::InteriorSpaceLike | Self::Initial | Self::Final)
    }
}

impl From<BoundaryKind> for FaceKind {
    fn from(kind: BoundaryKind) -> Self {
        match kind {
            BoundaryKind::Dirichlet => Self::Dirichlet,
            BoundaryKind::Neumann => Self::Neumann,
            BoundaryKind::Robin => Self::Robin,
        }
    }
}

/// Segment of a lateral domain side carrying one boundary condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub side: Side,
    pub from_t: f64,
    pub to_t: f64,
    pub kind: BoundaryKind,
}

impl BoundarySegment {
    pub fn whole(side: Side, kind: BoundaryKind, t_final: f64) -> Self {
        Self {
            side,
            from_t: 0.0,
            to_t: t_final,
            kind,
        }
    }

    /// Same condition on both sides for the full time interval.
    pub fn both(kind: BoundaryKind, t_final: f64) -> Vec<Self> {
        vec![
            Self::whole(Side::Left, kind, t_final),
            Self::whole(Side::Right, kind, t_final),
        ]
    }
}

/// Space-time domain (a, b) x (0, T).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub a: f64,
    pub b: f64,
    pub t_final: f64,
}

impl Domain {
    pub fn area(&self) -> f64 {
        (self.b - self.a) * self.t_final
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceSide {
    pub element: ElementId,
    pub wave_speed: f64,
}

/// Elements on either side of a face; `plus` is `None` on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adjacency {
    pub minus: FaceSide,
    pub plus: Option<FaceSide>,
}

impl Adjacency {
    pub fn elements(&self) -> impl Iterator<Item = ElementId> {
        std::iter::once(self.minus.element).chain(self.plus.map(|s| s.element))
    }

    pub fn max_wave_speed(&self) -> f64 {
        self.plus
            .map_or(self.minus.wave_speed, |p| p.wave_speed.max(self.minus.wave_speed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub id: FaceId,
    pub vertices: [usize; 2],
    pub endpoints: [SpaceTimePoint; 2],
    pub normal: Normal,
    pub kind: FaceKind,
    pub gamma: f64,
    pub adjacency: Adjacency,
}

impl Face {
    pub fn length(&self) -> f64 {
        self.endpoints[0].distance(&self.endpoints[1])
    }

    pub fn midpoint(&self) -> SpaceTimePoint {
        self.endpoints[0].midpoint(&self.endpoints[1])
    }

    /// Outward normal of `element` on this face.
    pub fn outward_normal(&self, element: ElementId) -> Normal {
        if element == self.adjacency.minus.element {
            self.normal
        } else {
            self.normal.flipped()
        }
    }

    /// Future-pointing normal, for faces that can lie on a space-like interface.
    pub fn future_normal(&self) -> Normal {
        if self.normal.t < 0.0 {
            self.normal.flipped()
        } else {
            self.normal
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: ElementId,
    /// Counterclockwise vertex loop.
    pub vertices: Vec<usize>,
    pub wave_speed: f64,
    /// Faces in loop order: face `i` joins vertices `i` and `i + 1`.
    pub faces: Vec<FaceId>,
    pub diameter: f64,
    pub centroid: SpaceTimePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub domain: Domain,
    pub vertices: Vec<SpaceTimePoint>,
    pub elements: Vec<Element>,
    pub faces: Vec<Face>,
    pub boundary: Vec<BoundarySegment>,
}

/// Result of classifying a single segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub kind: FaceKind,
    pub normal: Normal,
    pub gamma: f64,
}

/// Where a face sits: between two elements or on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FacePlacement {
    Interior,
    Boundary(FaceKind),
}

/// Classifies a segment as space-like or time-like and computes its normal and γ.
///
/// Interior space-like faces get the future-pointing normal, interior
/// time-like faces the normal pointing towards +x. Boundary faces get the
/// outward domain normal (initial: (0, -1), final: (0, 1), lateral: (∓1, 0)).
/// `wave_speeds` are the speeds of the adjacent elements; the largest is used.
pub fn classify_face(
    a: SpaceTimePoint,
    b: SpaceTimePoint,
    wave_speeds: &[f64],
    placement: FacePlacement,
) -> Result<Classification, MeshError> {
    let (dx, dt) = (b.x - a.x, b.t - a.t);
    let len = dx.hypot(dt);
    if len <= 0.0 || !len.is_finite() {
        return Err(MeshError::DegenerateFace(a, b));
    }
    if wave_speeds.is_empty() || wave_speeds.iter().any(|c| !(*c > 0.0)) {
        return Err(MeshError::InvalidData(format!(
            "wave speeds must be positive, got {wave_speeds:?}"
        )));
    }
    let c = wave_speeds.iter().copied().fold(0.0, f64::max);
    let mut n = Normal::new(-dt / len, dx / len);
    match placement {
        FacePlacement::Boundary(kind) => {
            let normal = match kind {
                FaceKind::Initial => Normal::new(0.0, -1.0),
                FaceKind::Final => Normal::new(0.0, 1.0),
                _ => {
                    if n.t.abs() > TIME_LIKE_TOL {
                        return Err(MeshError::InvalidData(format!(
                            "lateral boundary face ({a:?}, {b:?}) is not vertical"
                        )));
                    }
                    // Sign is fixed by the caller through the side; default to +x.
                    Normal::new(n.x.signum(), 0.0)
                }
            };
            Ok(Classification {
                kind,
                normal,
                gamma: 0.0,
            })
        }
        FacePlacement::Interior => {
            if n.t.abs() <= TIME_LIKE_TOL {
                return Ok(Classification {
                    kind: FaceKind::InteriorTimeLike,
                    normal: Normal::new(1.0, 0.0),
                    gamma: 0.0,
                });
            }
            if n.t < 0.0 {
                n = n.flipped();
            }
            if n.x == 0.0 {
                n = Normal::new(0.0, 1.0);
            }
            let cn_x = c * n.x.abs();
            if n.t - cn_x > SPACE_LIKE_TOL * n.t {
                Ok(Classification {
                    kind: FaceKind::InteriorSpaceLike,
                    normal: n,
                    gamma: cn_x / n.t,
                })
            } else {
                Err(MeshError::UnclassifiableFace { a, b, n_t: n.t, cn_x })
            }
        }
    }
}

fn signed_area(points: &[SpaceTimePoint]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (p, q) = (points[i], points[(i + 1) % n]);
            p.x * q.t - q.x * p.t
        })
        .sum::<f64>()
        * 0.5
}

fn polygon_centroid(points: &[SpaceTimePoint]) -> SpaceTimePoint {
    let n = points.len();
    let area = signed_area(points);
    let (mut cx, mut ct) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (points[i], points[(i + 1) % n]);
        let cross = p.x * q.t - q.x * p.t;
        cx += (p.x + q.x) * cross;
        ct += (p.t + q.t) * cross;
    }
    SpaceTimePoint::new(cx / (6.0 * area), ct / (6.0 * area))
}

fn polygon_diameter(points: &[SpaceTimePoint]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max(p.distance(q));
        }
    }
    d
}

impl Mesh {
    /// Builds a mesh from polygon vertex loops, deriving and classifying all faces.
    ///
    /// Loops must be counterclockwise and conforming (neighbours share whole
    /// edges). Lateral boundary edges must be covered by `boundary`.
    pub fn from_polygons(
        domain: Domain,
        vertices: Vec<SpaceTimePoint>,
        polygons: Vec<(Vec<usize>, f64)>,
        boundary: Vec<BoundarySegment>,
    ) -> Result<Self, MeshError> {
        if !(domain.b > domain.a) || !(domain.t_final > 0.0) {
            return Err(MeshError::InvalidData(format!("bad domain {domain:?}")));
        }
        if let Some(p) = vertices.iter().find(|p| !p.x.is_finite() || !p.t.is_finite()) {
            return Err(MeshError::InvalidData(format!("non-finite vertex {p:?}")));
        }
        let mut elements = Vec::with_capacity(polygons.len());
        for (id, (loop_ids, c)) in polygons.into_iter().enumerate() {
            if loop_ids.len() < 3 {
                return Err(MeshError::InvalidElement(id, "fewer than 3 vertices".into()));
            }
            if let Some(&v) = loop_ids.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::InvalidElement(id, format!("unknown vertex {v}")));
            }
            if !(c > 0.0) || !c.is_finite() {
                return Err(MeshError::InvalidElement(id, format!("wave speed {c} not positive")));
            }
            let pts: Vec<_> = loop_ids.iter().map(|&v| vertices[v]).collect();
            if signed_area(&pts) <= 0.0 {
                return Err(MeshError::InvalidElement(id, "vertex loop is not counterclockwise".into()));
            }
            elements.push(Element {
                id,
                centroid: polygon_centroid(&pts),
                diameter: polygon_diameter(&pts),
                vertices: loop_ids,
                wave_speed: c,
                faces: Vec::new(),
            });
        }

        // Edge (min, max) -> list of (element, local edge index).
        let mut edges: HashMap<(usize, usize), Vec<(ElementId, usize)>> = HashMap::new();
        let mut edge_order = Vec::new();
        for el in &elements {
            let n = el.vertices.len();
            for i in 0..n {
                let (u, v) = (el.vertices[i], el.vertices[(i + 1) % n]);
                let key = (u.min(v), u.max(v));
                let entry = edges.entry(key).or_default();
                if entry.is_empty() {
                    edge_order.push(key);
                }
                entry.push((el.id, i));
            }
        }

        let tol = 1e-12 * (domain.t_final.abs() + (domain.b - domain.a).abs());
        let mut faces = Vec::with_capacity(edge_order.len());
        let mut face_of_edge = HashMap::with_capacity(edge_order.len());
        for key in edge_order {
            let owners = &edges[&key];
            if owners.len() > 2 {
                return Err(MeshError::NonManifoldEdge(key.0, key.1));
            }
            let id = faces.len();
            let face = match owners.as_slice() {
                [(e1, i1), (e2, _)] => {
                    let (el1, el2) = (&elements[*e1], &elements[*e2]);
                    let n1 = el1.vertices.len();
                    let (u, v) = (el1.vertices[*i1], el1.vertices[(*i1 + 1) % n1]);
                    let (a, b) = (vertices[u], vertices[v]);
                    let cls = classify_face(a, b, &[el1.wave_speed, el2.wave_speed], FacePlacement::Interior)?;
                    // Outward normal of el1 for its CCW edge a -> b is (dt, -dx).
                    let len = a.distance(&b);
                    let out1 = Normal::new((b.t - a.t) / len, -(b.x - a.x) / len);
                    let el1_is_minus = out1.x * cls.normal.x + out1.t * cls.normal.t > 0.0;
                    let (minus, plus) = if el1_is_minus { (el1, el2) } else { (el2, el1) };
                    Face {
                        id,
                        vertices: [u, v],
                        endpoints: [a, b],
                        normal: cls.normal,
                        kind: cls.kind,
                        gamma: cls.gamma,
                        adjacency: Adjacency {
                            minus: FaceSide {
                                element: minus.id,
                                wave_speed: minus.wave_speed,
                            },
                            plus: Some(FaceSide {
                                element: plus.id,
                                wave_speed: plus.wave_speed,
                            }),
                        },
                    }
                }
                [(e1, i1)] => {
                    let el = &elements[*e1];
                    let n1 = el.vertices.len();
                    let (u, v) = (el.vertices[*i1], el.vertices[(*i1 + 1) % n1]);
                    let (a, b) = (vertices[u], vertices[v]);
                    let on = |x: f64, y: f64| (x - y).abs() <= tol;
                    let (kind, normal) = if on(a.t, 0.0) && on(b.t, 0.0) {
                        (FaceKind::Initial, Normal::new(0.0, -1.0))
                    } else if on(a.t, domain.t_final) && on(b.t, domain.t_final) {
                        (FaceKind::Final, Normal::new(0.0, 1.0))
                    } else {
                        let side = if on(a.x, domain.a) && on(b.x, domain.a) {
                            Side::Left
                        } else if on(a.x, domain.b) && on(b.x, domain.b) {
                            Side::Right
                        } else {
                            return Err(MeshError::DanglingEdge(a, b));
                        };
                        let t_mid = 0.5 * (a.t + b.t);
                        let seg = boundary
                            .iter()
                            .find(|s| s.side == side && s.from_t - tol <= t_mid && t_mid <= s.to_t + tol)
                            .ok_or(MeshError::MissingBoundaryTag { side, t: t_mid })?;
                        let nx = if side == Side::Left { -1.0 } else { 1.0 };
                        (seg.kind.into(), Normal::new(nx, 0.0))
                    };
                    classify_face(a, b, &[el.wave_speed], FacePlacement::Boundary(kind))?;
                    Face {
                        id,
                        vertices: [u, v],
                        endpoints: [a, b],
                        normal,
                        kind,
                        gamma: 0.0,
                        adjacency: Adjacency {
                            minus: FaceSide {
                                element: el.id,
                                wave_speed: el.wave_speed,
                            },
                            plus: None,
                        },
                    }
                }
                _ => unreachable!("edge map entries are non-empty"),
            };
            face_of_edge.insert(key, id);
            faces.push(face);
        }

        for el in &mut elements {
            let n = el.vertices.len();
            el.faces = (0..n)
                .map(|i| {
                    let (u, v) = (el.vertices[i], el.vertices[(i + 1) % n]);
                    let key = (u.min(v), u.max(v));
                    face_of_edge[&key]
                })
                .collect();
        }

        Ok(Self {
            domain,
            vertices,
            elements,
            faces,
            boundary,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn count_faces(&self, kind: FaceKind) -> usize {
        self.faces.iter().filter(|f| f.kind == kind).count()
    }

    pub fn element_points(&self, id: ElementId) -> Vec<SpaceTimePoint> {
        self.elements[id].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn element_area(&self, id: ElementId) -> f64 {
        signed_area(&self.element_points(id))
    }

    pub fn max_diameter(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter).fold(0.0, f64::max)
    }

    /// True if some element has a nonzero-length face on a lateral boundary of this kind.
    pub fn has_face_kind(&self, kind: FaceKind) -> bool {
        self.faces.iter().any(|f| f.kind == kind)
    }

    /// Element containing the point (closed polygons; first match wins).
    pub fn locate(&self, p: SpaceTimePoint) -> Option<ElementId> {
        let eps = 1e-12 * (1.0 + self.domain.t_final + (self.domain.b - self.domain.a));
        self.elements.iter().position(|el| {
            let pts = self.element_points(el.id);
            let n = pts.len();
            (0..n).all(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % n]);
                (b.x - a.x) * (p.t - a.t) - (b.t - a.t) * (p.x - a.x) >= -eps * a.distance(&b)
            })
        })
    }
}

pub(crate) fn loop_signed_area(points: &[SpaceTimePoint]) -> f64 {
    signed_area(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t)
    }

    #[test]
    fn flat_face_is_space_like() {
        let c = classify_face(p(0.0, 0.5), p(1.0, 0.5), &[1.0], FacePlacement::Interior).unwrap();
        assert_eq!(c.kind, FaceKind::InteriorSpaceLike);
        assert_eq!(c.normal, Normal::new(0.0, 1.0));
        assert_eq!(c.gamma, 0.0);
    }

    #[test]
    fn vertical_face_is_time_like() {
        let c = classify_face(p(0.5, 0.0), p(0.5, 1.0), &[1.0], FacePlacement::Interior).unwrap();
        assert_eq!(c.kind, FaceKind::InteriorTimeLike);
        assert_eq!(c.normal.t, 0.0);
        assert_eq!(c.normal.x.abs(), 1.0);
    }

    #[test]
    fn half_slope_face_has_gamma_one_half() {
        let c = classify_face(p(0.0, 0.0), p(1.0, 0.5), &[1.0], FacePlacement::Interior).unwrap();
        assert_eq!(c.kind, FaceKind::InteriorSpaceLike);
        assert_abs_diff_eq!(c.gamma, 0.5, epsilon = 1e-15);
        assert!(c.normal.t > 0.0);
        assert_abs_diff_eq!(c.normal.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn characteristic_face_is_rejected() {
        let err = classify_face(p(0.0, 0.0), p(1.0, 1.0), &[1.0], FacePlacement::Interior).unwrap_err();
        assert!(matches!(err, MeshError::UnclassifiableFace { .. }));
        // Space-like for c = 1 but not for the faster neighbour.
        let err = classify_face(p(0.0, 0.0), p(1.0, 0.75), &[1.0, 2.0], FacePlacement::Interior).unwrap_err();
        assert!(matches!(err, MeshError::UnclassifiableFace { .. }));
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let err = classify_face(p(0.3, 0.3), p(0.3, 0.3), &[1.0], FacePlacement::Interior).unwrap_err();
        assert!(matches!(err, MeshError::DegenerateFace(..)));
    }

    #[test]
    fn clockwise_polygon_is_rejected() {
        let domain = Domain {
            a: 0.0,
            b: 1.0,
            t_final: 1.0,
        };
        let verts = vec![p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(0.0, 1.0)];
        let err = Mesh::from_polygons(
            domain,
            verts,
            vec![(vec![0, 3, 2, 1], 1.0)],
            BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::InvalidElement(0, _)));
    }

    #[test]
    fn locate_finds_containing_element() {
        let mesh = build_slab_mesh(
            &[0.0, 0.5, 1.0],
            &[0.0, 1.0],
            &[1.0, 1.0],
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap();
        assert_eq!(mesh.locate(p(0.25, 0.5)), Some(0));
        assert_eq!(mesh.locate(p(0.75, 0.5)), Some(1));
        assert_eq!(mesh.locate(p(1.5, 0.5)), None);
    }
}
