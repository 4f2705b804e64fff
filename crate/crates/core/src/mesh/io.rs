//! Versioned JSON mesh files. Faces are never stored; they are re-derived on load.

use serde::{Deserialize, Serialize};

use super::{BoundaryKind, BoundarySegment, Domain, Mesh, MeshError, Side, SpaceTimePoint};

pub const MESH_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFileDomain {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFileElement {
    pub verts: Vec<usize>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshFileBoundary {
    pub side: Side,
    pub from_t: f64,
    pub to_t: f64,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    #[serde(default = "default_version")]
    pub version: u32,
    pub domain: MeshFileDomain,
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<MeshFileElement>,
    pub boundary: Vec<MeshFileBoundary>,
}

fn default_version() -> u32 {
    MESH_FILE_VERSION
}

impl From<&Mesh> for MeshFile {
    fn from(mesh: &Mesh) -> Self {
        Self {
            version: MESH_FILE_VERSION,
            domain: MeshFileDomain {
                a: mesh.domain.a,
                b: mesh.domain.b,
                t_final: mesh.domain.t_final,
            },
            vertices: mesh.vertices.iter().map(|p| [p.x, p.t]).collect(),
            elements: mesh
                .elements
                .iter()
                .map(|e| MeshFileElement {
                    verts: e.vertices.clone(),
                    c: e.wave_speed,
                })
                .collect(),
            boundary: mesh
                .boundary
                .iter()
                .map(|s| MeshFileBoundary {
                    side: s.side,
                    from_t: s.from_t,
                    to_t: s.to_t,
                    kind: s.kind,
                })
                .collect(),
        }
    }
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<Mesh, MeshError> {
        if self.version != MESH_FILE_VERSION {
            return Err(MeshError::InvalidData(format!(
                "unsupported mesh file version {} (expected {MESH_FILE_VERSION})",
                self.version
            )));
        }
        Mesh::from_polygons(
            Domain {
                a: self.domain.a,
                b: self.domain.b,
                t_final: self.domain.t_final,
            },
            self.vertices.iter().map(|&[x, t]| SpaceTimePoint::new(x, t)).collect(),
            self.elements.into_iter().map(|e| (e.verts, e.c)).collect(),
            self.boundary
                .into_iter()
                .map(|b| BoundarySegment {
                    side: b.side,
                    from_t: b.from_t,
                    to_t: b.to_t,
                    kind: b.kind,
                })
                .collect(),
        )
    }
}

impl Mesh {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MeshFile::from(self)).expect("mesh file serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, MeshError> {
        let file: MeshFile =
            serde_json::from_str(text).map_err(|e| MeshError::InvalidData(e.to_string()))?;
        file.into_mesh()
    }
}

#[cfg(test)]
mod tests {
    use crate::mesh::{build_tent_mesh, BoundaryKind, BoundarySegment, Mesh, TentParams};

    #[test]
    fn json_round_trip_rebuilds_identical_mesh() {
        let mesh = build_tent_mesh(
            &[0.0, 0.3, 0.7, 1.0],
            TentParams::new(1.0, 0.5, 0.8),
            &BoundarySegment::both(BoundaryKind::Dirichlet, 0.8),
        )
        .unwrap();
        let back = Mesh::from_json(&mesh.to_json()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn rejects_unknown_version() {
        let text = r#"{"version": 7, "domain": {"a": 0, "b": 1, "T": 1}, "vertices": [], "elements": [], "boundary": []}"#;
        assert!(Mesh::from_json(text).is_err());
    }

    #[test]
    fn parses_hand_written_file() {
        let text = r#"{
            "domain": {"a": 0.0, "b": 1.0, "T": 1.0},
            "vertices": [[0,0],[1,0],[1,1],[0,1]],
            "elements": [{"verts": [0,1,2,3], "c": 2.0}],
            "boundary": [{"side": "left", "from_t": 0, "to_t": 1, "kind": "D"},
                         {"side": "right", "from_t": 0, "to_t": 1, "kind": "N"}]
        }"#;
        let mesh = Mesh::from_json(text).unwrap();
        assert_eq!(mesh.num_elements(), 1);
        assert_eq!(mesh.faces.len(), 4);
        assert_eq!(mesh.elements[0].wave_speed, 2.0);
    }
}
