use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BoundaryKind, BoundarySegment, Domain, Mesh, MeshError, SpaceTimePoint};

fn check_partition(name: &str, part: &[f64]) -> Result<(), MeshError> {
    if part.len() < 2 {
        return Err(MeshError::InvalidPartition(format!("{name} needs at least two points")));
    }
    if part.iter().any(|v| !v.is_finite()) {
        return Err(MeshError::InvalidPartition(format!("{name} has non-finite entries")));
    }
    if part.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(MeshError::InvalidPartition(format!("{name} is not strictly increasing")));
    }
    Ok(())
}

/// Tensor-product mesh of rectangles.
///
/// `wave_speeds[i]` is the speed of the i-th x-column, so the speed only jumps
/// across vertical (time-like) faces. Element `j * nx + i` sits in column `i`
/// and time slab `j`.
pub fn build_slab_mesh(
    x_partition: &[f64],
    t_partition: &[f64],
    wave_speeds: &[f64],
    boundary: &[BoundarySegment],
) -> Result<Mesh, MeshError> {
    check_partition("x-partition", x_partition)?;
    check_partition("t-partition", t_partition)?;
    if t_partition[0] != 0.0 {
        return Err(MeshError::InvalidPartition("t-partition must start at 0".into()));
    }
    let nx = x_partition.len() - 1;
    let nt = t_partition.len() - 1;
    if wave_speeds.len() != nx {
        return Err(MeshError::InvalidPartition(format!(
            "{} wave speeds for {nx} columns",
            wave_speeds.len()
        )));
    }
    let domain = Domain {
        a: x_partition[0],
        b: x_partition[nx],
        t_final: t_partition[nt],
    };
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let vertices = t_partition
        .iter()
        .flat_map(|&t| x_partition.iter().map(move |&x| SpaceTimePoint::new(x, t)))
        .collect();
    let mut polygons = Vec::with_capacity(nx * nt);
    for j in 0..nt {
        for (i, &c) in wave_speeds.iter().enumerate() {
            polygons.push((vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)], c));
        }
    }
    Mesh::from_polygons(domain, vertices, polygons, boundary.to_vec())
}

/// Parameters of the advancing-front tent generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TentParams {
    pub wave_speed: f64,
    /// Slope safety factor in (0, 1): every tent face satisfies c|n_x| <= zeta n_t.
    pub zeta: f64,
    pub t_final: f64,
    pub max_iterations: usize,
}

impl TentParams {
    pub fn new(wave_speed: f64, zeta: f64, t_final: f64) -> Self {
        Self {
            wave_speed,
            zeta,
            t_final,
            max_iterations: 1_000_000,
        }
    }
}

/// Tent-pitched mesh: every interior face is space-like with γ <= ζ.
///
/// The front keeps one time per spatial node. The lowest node (ties by index)
/// is raised to the smallest neighbour time plus ζ|Δx|/c, capped at T, and the
/// region between the old and new front becomes one element. A single spatial
/// cell has no interior node, so the front is raised flat by ζ h/c instead.
pub fn build_tent_mesh(
    x_partition: &[f64],
    params: TentParams,
    boundary: &[BoundarySegment],
) -> Result<Mesh, MeshError> {
    check_partition("x-partition", x_partition)?;
    let TentParams {
        wave_speed: c,
        zeta,
        t_final,
        max_iterations,
    } = params;
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(MeshError::InvalidPartition(format!("zeta = {zeta} outside (0, 1)")));
    }
    if !(c > 0.0) || !(t_final > 0.0) {
        return Err(MeshError::InvalidPartition("wave speed and T must be positive".into()));
    }
    let n_nodes = x_partition.len();
    let domain = Domain {
        a: x_partition[0],
        b: x_partition[n_nodes - 1],
        t_final,
    };

    let mut vertices = Vec::new();
    let mut vertex_ids: HashMap<(usize, u64), usize> = HashMap::new();
    let mut vertex = |i: usize, t: f64, vertices: &mut Vec<SpaceTimePoint>| {
        *vertex_ids.entry((i, t.to_bits())).or_insert_with(|| {
            vertices.push(SpaceTimePoint::new(x_partition[i], t));
            vertices.len() - 1
        })
    };

    let mut front = vec![0.0_f64; n_nodes];
    let mut polygons = Vec::new();

    if n_nodes == 2 {
        let step = zeta * (x_partition[1] - x_partition[0]) / c;
        let mut t = 0.0;
        let mut iterations = 0;
        while t < t_final {
            iterations += 1;
            if iterations > max_iterations {
                return Err(MeshError::NonTerminating(max_iterations));
            }
            let next = if t_final - (t + step) <= 1e-12 * t_final {
                t_final
            } else {
                t + step
            };
            let ids = vec![
                vertex(0, t, &mut vertices),
                vertex(1, t, &mut vertices),
                vertex(1, next, &mut vertices),
                vertex(0, next, &mut vertices),
            ];
            polygons.push((ids, c));
            t = next;
        }
        return Mesh::from_polygons(domain, vertices, polygons, boundary.to_vec());
    }

    let mut iterations = 0;
    loop {
        let (i, &t_old) = front
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .expect("at least two nodes");
        if t_old >= t_final {
            break;
        }
        iterations += 1;
        if iterations > max_iterations {
            return Err(MeshError::NonTerminating(max_iterations));
        }
        let neighbours = [i.checked_sub(1), (i + 1 < n_nodes).then_some(i + 1)];
        let mut t_new = neighbours
            .iter()
            .flatten()
            .map(|&j| front[j] + zeta * (x_partition[j] - x_partition[i]).abs() / c)
            .fold(t_final, f64::min);
        // Snap to T when the remaining sliver would be negligible.
        if t_final - t_new <= 1e-12 * t_final {
            t_new = t_final;
        }
        if t_new <= t_old {
            return Err(MeshError::NonTerminating(iterations));
        }
        let mut ids = Vec::with_capacity(4);
        if let Some(l) = neighbours[0] {
            ids.push(vertex(l, front[l], &mut vertices));
        }
        ids.push(vertex(i, t_old, &mut vertices));
        if let Some(r) = neighbours[1] {
            ids.push(vertex(r, front[r], &mut vertices));
        }
        ids.push(vertex(i, t_new, &mut vertices));
        polygons.push((ids, c));
        front[i] = t_new;
    }
    Mesh::from_polygons(domain, vertices, polygons, boundary.to_vec())
}

/// Declarative description of a uniform mesh and its refinements.
///
/// Level `l` has `nx · 2^l` spatial cells (and `nt · 2^l` slabs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Slab {
        #[serde(default)]
        a: f64,
        #[serde(default = "unit")]
        b: f64,
        #[serde(rename = "T", default = "unit")]
        t_final: f64,
        nx: usize,
        nt: usize,
        #[serde(default = "unit")]
        wave_speed: f64,
        #[serde(default = "robin")]
        boundary: BoundaryKind,
    },
    Tent {
        #[serde(default)]
        a: f64,
        #[serde(default = "unit")]
        b: f64,
        #[serde(rename = "T", default = "unit")]
        t_final: f64,
        nx: usize,
        zeta: f64,
        #[serde(default = "unit")]
        wave_speed: f64,
        #[serde(default = "robin")]
        boundary: BoundaryKind,
    },
}

fn unit() -> f64 {
    1.0
}

fn robin() -> BoundaryKind {
    BoundaryKind::Robin
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh, MeshError> {
        self.refined(0)
    }

    pub fn refined(&self, level: u32) -> Result<Mesh, MeshError> {
        let scale = 1usize << level;
        match *self {
            Self::Slab {
                a,
                b,
                t_final,
                nx,
                nt,
                wave_speed,
                boundary,
            } => {
                if nx == 0 || nt == 0 {
                    return Err(MeshError::InvalidPartition("nx and nt must be positive".into()));
                }
                build_slab_mesh(
                    &uniform(a, b, nx * scale),
                    &uniform(0.0, t_final, nt * scale),
                    &vec![wave_speed; nx * scale],
                    &BoundarySegment::both(boundary, t_final),
                )
            }
            Self::Tent {
                a,
                b,
                t_final,
                nx,
                zeta,
                wave_speed,
                boundary,
            } => {
                if nx == 0 {
                    return Err(MeshError::InvalidPartition("nx must be positive".into()));
                }
                build_tent_mesh(
                    &uniform(a, b, nx * scale),
                    TentParams::new(wave_speed, zeta, t_final),
                    &BoundarySegment::both(boundary, t_final),
                )
            }
        }
    }

    pub fn wave_speed(&self) -> f64 {
        match *self {
            Self::Slab { wave_speed, .. } | Self::Tent { wave_speed, .. } => wave_speed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{validate_mesh, BoundaryKind, FaceKind, Side};

    fn uniform(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
    }

    #[test]
    fn four_by_four_slab_counts() {
        let mesh = build_slab_mesh(
            &uniform(4, 0.0, 1.0),
            &uniform(4, 0.0, 1.0),
            &[1.0; 4],
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap();
        assert_eq!(mesh.num_elements(), 16);
        assert_eq!(mesh.count_faces(FaceKind::InteriorSpaceLike), 12);
        assert_eq!(mesh.count_faces(FaceKind::InteriorTimeLike), 12);
        assert!(mesh
            .faces
            .iter()
            .filter(|f| f.kind == FaceKind::InteriorSpaceLike)
            .all(|f| f.gamma == 0.0));
        assert!(validate_mesh(&mesh).is_valid());
    }

    #[test]
    fn single_cell_slab() {
        let bc = [
            BoundarySegment::whole(Side::Left, BoundaryKind::Dirichlet, 1.0),
            BoundarySegment::whole(Side::Right, BoundaryKind::Neumann, 1.0),
        ];
        let mesh = build_slab_mesh(&[0.0, 1.0], &[0.0, 1.0], &[1.0], &bc).unwrap();
        assert_eq!(mesh.faces.iter().filter(|f| f.kind.is_interior()).count(), 0);
        assert_eq!(mesh.count_faces(FaceKind::Initial), 1);
        assert_eq!(mesh.count_faces(FaceKind::Final), 1);
        assert_eq!(mesh.count_faces(FaceKind::Dirichlet), 1);
        assert_eq!(mesh.count_faces(FaceKind::Neumann), 1);
    }

    #[test]
    fn slab_time_like_faces_carry_both_speeds() {
        let mesh = build_slab_mesh(
            &[0.0, 0.5, 1.0],
            &[0.0, 0.5, 1.0],
            &[1.0, 2.0],
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap();
        let vertical: Vec<_> = mesh
            .faces
            .iter()
            .filter(|f| f.kind == FaceKind::InteriorTimeLike)
            .collect();
        assert_eq!(vertical.len(), 2);
        for f in vertical {
            assert_eq!(f.adjacency.minus.wave_speed, 1.0);
            assert_eq!(f.adjacency.plus.unwrap().wave_speed, 2.0);
            assert_eq!(f.normal.x, 1.0);
        }
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        let bc = BoundarySegment::both(BoundaryKind::Robin, 1.0);
        assert!(matches!(
            build_slab_mesh(&[0.0, 0.0], &[0.0, 1.0], &[1.0], &bc),
            Err(MeshError::InvalidPartition(_))
        ));
        assert!(matches!(
            build_slab_mesh(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 1.0], &bc),
            Err(MeshError::InvalidPartition(_))
        ));
        assert!(matches!(
            build_tent_mesh(&[0.0, 1.0], TentParams::new(1.0, 1.5, 1.0), &bc),
            Err(MeshError::InvalidPartition(_))
        ));
    }

    #[test]
    fn tent_faces_respect_zeta() {
        let bc = BoundarySegment::both(BoundaryKind::Robin, 2.0);
        let mesh = build_tent_mesh(&[0.0, 0.5, 1.0], TentParams::new(1.0, 0.5, 2.0), &bc).unwrap();
        assert_eq!(mesh.count_faces(FaceKind::InteriorTimeLike), 0);
        for f in mesh.faces.iter().filter(|f| f.kind == FaceKind::InteriorSpaceLike) {
            assert!(f.gamma <= 0.5 + 1e-12, "gamma {}", f.gamma);
        }
        let report = validate_mesh(&mesh);
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn single_cell_tent_mesh_is_flat_stack() {
        let bc = BoundarySegment::both(BoundaryKind::Robin, 1.0);
        let mesh = build_tent_mesh(&[0.0, 1.0], TentParams::new(1.0, 0.3, 1.0), &bc).unwrap();
        assert_eq!(mesh.num_elements(), 4);
        assert!(mesh.faces.iter().all(|f| f.gamma == 0.0));
        assert!(validate_mesh(&mesh).is_valid());
    }

    #[test]
    fn nonterminating_guard() {
        let bc = BoundarySegment::both(BoundaryKind::Robin, 1.0);
        let mut params = TentParams::new(1.0, 0.5, 1.0);
        params.max_iterations = 3;
        assert!(matches!(
            build_tent_mesh(&uniform(4, 0.0, 1.0), params, &bc),
            Err(MeshError::NonTerminating(3))
        ));
    }
}
