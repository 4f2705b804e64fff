//! Causal structure of meshes: element ordering and space-like interface layers.

use std::collections::BTreeSet;

use super::{ElementId, FaceId, FaceKind, Mesh, MeshError};

/// Topological order of elements along space-like faces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalOrder {
    /// Elements sorted by (layer, id).
    pub order: Vec<ElementId>,
    /// Longest-path depth of each element, indexed by element id.
    pub layer: Vec<usize>,
    /// Elements of each layer in id order.
    pub layers: Vec<Vec<ElementId>>,
}

impl CausalOrder {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Position of every element in `order`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (i, &e) in self.order.iter().enumerate() {
            pos[e] = i;
        }
        pos
    }
}

/// Orders elements so that every space-like face is visited past side first.
///
/// Fails on meshes with interior time-like faces, whose two-way coupling has
/// no causal order.
pub fn causal_order(mesh: &Mesh) -> Result<CausalOrder, MeshError> {
    let time_like = mesh.count_faces(FaceKind::InteriorTimeLike);
    if time_like > 0 {
        return Err(MeshError::HasTimeLikeFaces(time_like));
    }
    let n = mesh.num_elements();
    let mut successors = vec![Vec::new(); n];
    let mut in_degree = vec![0usize; n];
    for f in mesh.faces.iter().filter(|f| f.kind == FaceKind::InteriorSpaceLike) {
        let plus = f.adjacency.plus.expect("interior face has two sides").element;
        successors[f.adjacency.minus.element].push(plus);
        in_degree[plus] += 1;
    }

    let mut layer = vec![0usize; n];
    let mut ready: BTreeSet<ElementId> = (0..n).filter(|&e| in_degree[e] == 0).collect();
    let mut visited = 0;
    while let Some(e) = ready.pop_first() {
        visited += 1;
        for &s in &successors[e] {
            layer[s] = layer[s].max(layer[e] + 1);
            in_degree[s] -= 1;
            if in_degree[s] == 0 {
                ready.insert(s);
            }
        }
    }
    if visited < n {
        return Err(MeshError::CyclicDependency(n - visited));
    }

    let num_layers = layer.iter().max().map_or(0, |m| m + 1);
    let mut layers = vec![Vec::new(); num_layers];
    for (e, &l) in layer.iter().enumerate() {
        layers[l].push(e);
    }
    let order = layers.iter().flatten().copied().collect();
    Ok(CausalOrder {
        order,
        layer,
        layers,
    })
}

/// One space-like interface produced by the front sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceFront {
    /// Faces forming the interface, sorted by id.
    pub faces: Vec<FaceId>,
    /// Elements lying between the previous front and this one.
    pub swept: Vec<ElementId>,
}

fn inflow_faces(mesh: &Mesh, e: ElementId) -> impl Iterator<Item = FaceId> + '_ {
    mesh.elements[e].faces.iter().copied().filter(move |&f| {
        let face = &mesh.faces[f];
        match face.kind {
            FaceKind::Initial => true,
            FaceKind::InteriorSpaceLike => face.adjacency.minus.element != e,
            _ => false,
        }
    })
}

fn outflow_faces(mesh: &Mesh, e: ElementId) -> impl Iterator<Item = FaceId> + '_ {
    mesh.elements[e].faces.iter().copied().filter(move |&f| {
        let face = &mesh.faces[f];
        match face.kind {
            FaceKind::Final => true,
            FaceKind::InteriorSpaceLike => face.adjacency.minus.element == e,
            _ => false,
        }
    })
}

/// Greedy front sweep from t = 0 to t = T.
///
/// Starting from the initial faces, every element whose inflow faces all lie
/// on the current front is swept at once; its outflow faces replace its
/// inflow faces. The first entry is the initial front, the last one is the
/// final face set at t = T.
pub fn interface_fronts(mesh: &Mesh) -> Result<Vec<InterfaceFront>, MeshError> {
    let mut front: BTreeSet<FaceId> = mesh
        .faces
        .iter()
        .filter(|f| f.kind == FaceKind::Initial)
        .map(|f| f.id)
        .collect();
    let mut fronts = vec![InterfaceFront {
        faces: front.iter().copied().collect(),
        swept: Vec::new(),
    }];
    let mut done = vec![false; mesh.num_elements()];
    let mut remaining = mesh.num_elements();
    while remaining > 0 {
        let ready: Vec<ElementId> = (0..mesh.num_elements())
            .filter(|&e| !done[e] && inflow_faces(mesh, e).all(|f| front.contains(&f)))
            .collect();
        if ready.is_empty() {
            return Err(MeshError::CyclicDependency(remaining));
        }
        for &e in &ready {
            for f in inflow_faces(mesh, e) {
                front.remove(&f);
            }
            front.extend(outflow_faces(mesh, e));
            done[e] = true;
        }
        remaining -= ready.len();
        fronts.push(InterfaceFront {
            faces: front.iter().copied().collect(),
            swept: ready,
        });
    }
    Ok(fronts)
}

/// Both layer counts: greedy front sweep and longest inflow-to-outflow face path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceLayers {
    pub greedy: usize,
    pub longest_path: usize,
}

/// Number N of ordered space-like interfaces covering all interior space-like
/// faces, counting the final interface at t = T.
pub fn count_interface_layers(mesh: &Mesh) -> Result<usize, MeshError> {
    Ok(interface_fronts(mesh)?.len() - 1)
}

/// Greedy count alongside the longest chain of faces in the face DAG
/// (arcs from each inflow face of an element to each of its outflow faces).
pub fn interface_layers(mesh: &Mesh) -> Result<InterfaceLayers, MeshError> {
    let greedy = count_interface_layers(mesh)?;

    // Element below each face (the element for which it is an outflow face).
    let mut below: Vec<Option<ElementId>> = vec![None; mesh.faces.len()];
    for e in 0..mesh.num_elements() {
        for f in outflow_faces(mesh, e) {
            below[f] = Some(e);
        }
    }
    let mut depth: Vec<Option<usize>> = vec![None; mesh.faces.len()];
    let mut on_stack = vec![false; mesh.faces.len()];

    fn face_depth(
        mesh: &Mesh,
        f: FaceId,
        below: &[Option<ElementId>],
        depth: &mut [Option<usize>],
        on_stack: &mut [bool],
    ) -> Result<usize, MeshError> {
        if let Some(d) = depth[f] {
            return Ok(d);
        }
        if on_stack[f] {
            return Err(MeshError::CyclicDependency(1));
        }
        on_stack[f] = true;
        let d = match below[f] {
            None => 0,
            Some(e) => {
                let mut best = 0;
                for g in inflow_faces(mesh, e) {
                    best = best.max(face_depth(mesh, g, below, depth, on_stack)?);
                }
                best + 1
            }
        };
        on_stack[f] = false;
        depth[f] = Some(d);
        Ok(d)
    }

    let mut longest_path = 0;
    for f in mesh.faces.iter().filter(|f| f.kind == FaceKind::Final) {
        longest_path = longest_path.max(face_depth(mesh, f.id, &below, &mut depth, &mut on_stack)?);
    }
    Ok(InterfaceLayers {
        greedy,
        longest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_slab_mesh, build_tent_mesh, BoundaryKind, BoundarySegment, TentParams};

    fn slabs(nx: usize, nt: usize) -> Mesh {
        let xs: Vec<f64> = (0..=nx).map(|i| i as f64 / nx as f64).collect();
        let ts: Vec<f64> = (0..=nt).map(|i| i as f64 / nt as f64).collect();
        build_slab_mesh(&xs, &ts, &vec![1.0; nx], &BoundarySegment::both(BoundaryKind::Robin, 1.0)).unwrap()
    }

    #[test]
    fn single_column_orders_bottom_to_top() {
        let mesh = slabs(1, 5);
        let order = causal_order(&mesh).unwrap();
        assert_eq!(order.order, vec![0, 1, 2, 3, 4]);
        assert_eq!(order.layer, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn time_like_faces_are_rejected() {
        let mesh = slabs(2, 2);
        assert_eq!(causal_order(&mesh), Err(MeshError::HasTimeLikeFaces(2)));
    }

    #[test]
    fn slab_layers_equal_slab_count() {
        for nt in [1, 2, 4, 8] {
            for nx in [1, 3] {
                let layers = interface_layers(&slabs(nx, nt)).unwrap();
                assert_eq!(layers.greedy, nt);
                assert_eq!(layers.longest_path, nt);
            }
        }
    }

    #[test]
    fn tent_order_respects_space_like_faces() {
        let xs: Vec<f64> = (0..=6).map(|i| i as f64 / 6.0).collect();
        let mesh = build_tent_mesh(
            &xs,
            TentParams::new(1.0, 0.5, 1.0),
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap();
        let order = causal_order(&mesh).unwrap();
        let pos = order.positions();
        for f in mesh.faces.iter().filter(|f| f.kind == FaceKind::InteriorSpaceLike) {
            assert!(pos[f.adjacency.minus.element] < pos[f.adjacency.plus.unwrap().element]);
            assert!(order.layer[f.adjacency.minus.element] < order.layer[f.adjacency.plus.unwrap().element]);
        }
        let layers = interface_layers(&mesh).unwrap();
        assert_eq!(layers.greedy, layers.longest_path);
        assert_eq!(layers.greedy, order.num_layers());
    }

    #[test]
    fn fronts_end_at_final_time() {
        let xs: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let mesh = build_tent_mesh(
            &xs,
            TentParams::new(1.0, 0.6, 0.7),
            &BoundarySegment::both(BoundaryKind::Robin, 0.7),
        )
        .unwrap();
        let fronts = interface_fronts(&mesh).unwrap();
        let last = fronts.last().unwrap();
        assert!(last.faces.iter().all(|&f| mesh.faces[f].kind == FaceKind::Final));
        let swept: usize = fronts.iter().map(|f| f.swept.len()).sum();
        assert_eq!(swept, mesh.num_elements());
    }
}
