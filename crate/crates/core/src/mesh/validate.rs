use serde::Serialize;

use super::{
    classify_face, loop_signed_area, FaceKind, FacePlacement, Mesh, SPACE_LIKE_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MeshViolation {
    NormalNotUnit { face: usize, norm: f64 },
    Classification { face: usize, detail: String },
    GammaMismatch { face: usize, stored: f64, expected: f64 },
    Orientation { element: usize, signed_area: f64 },
    NotStarShaped { element: usize },
    NonPositiveSpeed { element: usize },
    SpeedJumpAcrossSpaceLike { face: usize },
    Adjacency { face: usize, detail: String },
    AreaDefect { covered: f64, expected: f64 },
    OutsideTimeInterval { vertex: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<MeshViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the structural invariants of a mesh and lists every violation.
pub fn validate_mesh(mesh: &Mesh) -> ValidationReport {
    let mut v = Vec::new();
    let scale = 1.0 + mesh.domain.t_final.abs() + (mesh.domain.b - mesh.domain.a).abs();

    for (i, p) in mesh.vertices.iter().enumerate() {
        if p.t < -1e-12 * scale || p.t > mesh.domain.t_final + 1e-12 * scale {
            v.push(MeshViolation::OutsideTimeInterval { vertex: i });
        }
    }

    let mut covered = 0.0;
    for el in &mesh.elements {
        let pts = mesh.element_points(el.id);
        let area = loop_signed_area(&pts);
        if area <= 0.0 {
            v.push(MeshViolation::Orientation {
                element: el.id,
                signed_area: area,
            });
        } else {
            let c = el.centroid;
            let n = pts.len();
            let star = (0..n).all(|i| {
                let (p, q) = (pts[i], pts[(i + 1) % n]);
                (p.x - c.x) * (q.t - c.t) - (q.x - c.x) * (p.t - c.t) > 0.0
            });
            if !star {
                v.push(MeshViolation::NotStarShaped { element: el.id });
            }
        }
        covered += area.abs();
        if !(el.wave_speed > 0.0) {
            v.push(MeshViolation::NonPositiveSpeed { element: el.id });
        }
        for &f in &el.faces {
            if f >= mesh.faces.len() || !mesh.faces[f].adjacency.elements().any(|e| e == el.id) {
                v.push(MeshViolation::Adjacency {
                    face: f,
                    detail: format!("element {} lists face {f} which does not reference it back", el.id),
                });
            }
        }
    }
    let expected = mesh.domain.area();
    if (covered - expected).abs() > 1e-12 * expected.max(1.0) {
        v.push(MeshViolation::AreaDefect { covered, expected });
    }

    for face in &mesh.faces {
        let norm = face.normal.norm();
        if (norm - 1.0).abs() > 1e-14 {
            v.push(MeshViolation::NormalNotUnit { face: face.id, norm });
        }
        for e in face.adjacency.elements() {
            if e >= mesh.elements.len() || !mesh.elements[e].faces.contains(&face.id) {
                v.push(MeshViolation::Adjacency {
                    face: face.id,
                    detail: format!("adjacent element {e} does not list the face"),
                });
            }
        }
        let [a, b] = face.endpoints;
        let interior = face.kind.is_interior();
        if interior != face.adjacency.plus.is_some() {
            v.push(MeshViolation::Adjacency {
                face: face.id,
                detail: "interior kind and two-sidedness disagree".into(),
            });
        }
        let mut speeds = vec![face.adjacency.minus.wave_speed];
        speeds.extend(face.adjacency.plus.map(|s| s.wave_speed));
        let placement = if interior {
            FacePlacement::Interior
        } else {
            FacePlacement::Boundary(face.kind)
        };
        match classify_face(a, b, &speeds, placement) {
            Err(err) => v.push(MeshViolation::Classification {
                face: face.id,
                detail: err.to_string(),
            }),
            Ok(cls) if cls.kind != face.kind => v.push(MeshViolation::Classification {
                face: face.id,
                detail: format!("stored {:?}, recomputed {:?}", face.kind, cls.kind),
            }),
            Ok(cls) => {
                if (cls.gamma - face.gamma).abs() > 1e-12 {
                    v.push(MeshViolation::GammaMismatch {
                        face: face.id,
                        stored: face.gamma,
                        expected: cls.gamma,
                    });
                }
                if face.kind == FaceKind::InteriorSpaceLike {
                    let c = face.adjacency.max_wave_speed();
                    if !(face.normal.t > 0.0 && face.normal.t - c * face.normal.x.abs() > SPACE_LIKE_TOL * face.normal.t) {
                        v.push(MeshViolation::Classification {
                            face: face.id,
                            detail: "stored normal violates the space-like inequality".into(),
                        });
                    }
                    let plus = face.adjacency.plus.map_or(c, |s| s.wave_speed);
                    if plus != face.adjacency.minus.wave_speed {
                        v.push(MeshViolation::SpeedJumpAcrossSpaceLike { face: face.id });
                    }
                }
                if face.kind == FaceKind::InteriorTimeLike && face.normal.t != 0.0 {
                    v.push(MeshViolation::Classification {
                        face: face.id,
                        detail: "time-like face with nonzero n_t".into(),
                    });
                }
            }
        }
    }

    ValidationReport { violations: v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_slab_mesh, BoundaryKind, BoundarySegment};

    fn mesh() -> Mesh {
        build_slab_mesh(
            &[0.0, 0.5, 1.0],
            &[0.0, 0.5, 1.0],
            &[1.0, 1.0],
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn valid_slab_mesh_has_no_violations() {
        assert!(validate_mesh(&mesh()).is_valid());
    }

    #[test]
    fn corrupted_normal_is_reported() {
        let mut m = mesh();
        m.faces[3].normal.x += 0.1;
        let report = validate_mesh(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, MeshViolation::NormalNotUnit { face: 3, .. })));
    }

    #[test]
    fn clockwise_loop_is_reported() {
        let mut m = mesh();
        m.elements[1].vertices.reverse();
        let report = validate_mesh(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, MeshViolation::Orientation { element: 1, signed_area } if *signed_area < 0.0)));
    }

    #[test]
    fn corrupted_kind_is_reported() {
        let mut m = mesh();
        let f = m.faces.iter().position(|f| f.kind == FaceKind::InteriorTimeLike).unwrap();
        m.faces[f].kind = FaceKind::InteriorSpaceLike;
        assert!(!validate_mesh(&m).is_valid());
    }
}
