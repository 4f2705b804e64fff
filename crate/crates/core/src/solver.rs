//! Global and element-by-element solvers, and solution comparison.

use std::io::{self, Write};

use log::warn;
use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assembly::{assemble_with_bases, face_contributions, face_points, AssemblyError, FaceBlocks, FluxParams, LinearSystem};
use crate::basis::{build_bases, TrefftzBasis};
use crate::mesh::{causal_order, ElementId, Mesh, MeshError, SpaceTimePoint};
use crate::problem::{ExactSolution, ProblemData};
use crate::quadrature::{element_rule, face_rule_with_points, QuadratureError};

/// Relative residual accepted from a direct solve.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Local condition number above which the sweep warns.
pub const CONDITION_WARN: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("global system is singular (relative residual {relative_residual:.3e})")]
    SingularSystem { relative_residual: f64 },
    #[error("local system of element {0} is singular")]
    SingularLocalSystem(ElementId),
    #[error("causal sweep needs a mesh without time-like faces ({0} found)")]
    HasTimeLikeFaces(usize),
    #[error("solutions live on different meshes or spaces: {0}")]
    MeshMismatch(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// A field given element by element, so that it can have two traces on a face.
pub trait PiecewiseField: Sync {
    /// (v, σ) of the restriction to `element`, evaluated at `p`.
    fn eval(&self, element: ElementId, p: SpaceTimePoint) -> (f64, f64);
}

/// A smooth field seen as a piecewise field.
pub struct Smooth<'a>(pub &'a dyn ExactSolution);

impl PiecewiseField for Smooth<'_> {
    fn eval(&self, _: ElementId, p: SpaceTimePoint) -> (f64, f64) {
        self.0.eval(p.x, p.t)
    }
}

/// Pointwise difference `a − b` of two piecewise fields.
pub struct Difference<'a>(pub &'a dyn PiecewiseField, pub &'a dyn PiecewiseField);

impl PiecewiseField for Difference<'_> {
    fn eval(&self, element: ElementId, p: SpaceTimePoint) -> (f64, f64) {
        let (a, b) = (self.0.eval(element, p), self.1.eval(element, p));
        (a.0 - b.0, a.1 - b.1)
    }
}

/// Coefficients of a discrete Trefftz field in the local bases.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub degree: usize,
    pub bases: Vec<TrefftzBasis>,
    pub coefficients: Vec<DVector<f64>>,
}

impl PiecewiseField for DiscreteSolution {
    fn eval(&self, element: ElementId, p: SpaceTimePoint) -> (f64, f64) {
        self.bases[element].eval_combination(self.coefficients[element].as_slice(), p)
    }
}

impl DiscreteSolution {
    pub fn zeros(bases: Vec<TrefftzBasis>) -> Self {
        let coefficients = bases.iter().map(|b| DVector::zeros(b.len())).collect();
        Self {
            degree: bases.first().map_or(0, |b| b.degree),
            bases,
            coefficients,
        }
    }

    /// Splits a global coefficient vector laid out like `system`.
    pub fn from_vector(system: &LinearSystem, u: &DVector<f64>) -> Self {
        let coefficients = (0..system.num_elements())
            .map(|e| {
                let r = system.range(e);
                u.rows(r.start, r.len()).into_owned()
            })
            .collect();
        Self {
            degree: system.bases.first().map_or(0, |b| b.degree),
            bases: system.bases.clone(),
            coefficients,
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.coefficients.iter().map(|c| c.len()).sum();
        let mut out = DVector::zeros(n);
        let mut at = 0;
        for c in &self.coefficients {
            out.rows_mut(at, c.len()).copy_from(c);
            at += c.len();
        }
        out
    }

    pub fn num_dofs(&self) -> usize {
        self.coefficients.iter().map(|c| c.len()).sum()
    }

    /// Value at an arbitrary point of the mesh (first containing element).
    pub fn eval_at(&self, mesh: &Mesh, p: SpaceTimePoint) -> Option<(f64, f64)> {
        mesh.locate(p).map(|e| self.eval(e, p))
    }

    /// Element-wise L² projection of `field` onto the Trefftz spaces, in the
    /// inner product ∫ (v w / c² + σ τ).
    pub fn project(mesh: &Mesh, p: usize, field: &dyn PiecewiseField) -> Result<Self, SolverError> {
        let bases = build_bases(mesh, p);
        let coefficients = mesh
            .elements
            .par_iter()
            .map(|el| {
                let basis = &bases[el.id];
                let gram = basis.gram_matrix(el, &mesh.vertices)?;
                let rule = element_rule(el, &mesh.vertices, 2 * p + 8)?;
                let c2 = el.wave_speed * el.wave_speed;
                let mut rhs = DVector::zeros(basis.len());
                let mut vals = Vec::new();
                for (pt, wt) in rule.iter() {
                    let (v, s) = field.eval(el.id, pt);
                    basis.eval_into(pt, &mut vals);
                    for (i, &(w, tau)) in vals.iter().enumerate() {
                        rhs[i] += wt * (v * w / c2 + s * tau);
                    }
                }
                gram.cholesky()
                    .map(|ch| ch.solve(&rhs))
                    .ok_or(SolverError::SingularLocalSystem(el.id))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            degree: p,
            bases,
            coefficients,
        })
    }

    /// One line per element: element id followed by its coefficients.
    pub fn write_coefficients<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# element coefficients (degree {})", self.degree)?;
        for (e, c) in self.coefficients.iter().enumerate() {
            write!(out, "{e}")?;
            for v in c.iter() {
                write!(out, " {v:.17e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Samples (x, t, v, σ) on a uniform `nx` × `nt` grid of points covering
    /// the domain, as CSV.
    pub fn write_csv_grid<W: Write>(&self, mesh: &Mesh, nx: usize, nt: usize, mut out: W) -> io::Result<()> {
        let d = mesh.domain;
        writeln!(out, "x,t,v,sigma")?;
        for j in 0..=nt {
            let t = d.t_final * j as f64 / nt.max(1) as f64;
            for i in 0..=nx {
                let x = d.a + (d.b - d.a) * i as f64 / nx.max(1) as f64;
                if let Some((v, s)) = self.eval_at(mesh, SpaceTimePoint::new(x, t)) {
                    writeln!(out, "{x:.12e},{t:.12e},{v:.12e},{s:.12e}")?;
                }
            }
        }
        Ok(())
    }
}

/// How the global system is factorised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlobalStrategy {
    /// One dense LU factorisation of the whole matrix.
    Dense,
    /// Dense LU on each strongly connected block of the element coupling
    /// graph, with forward substitution in topological order.
    #[default]
    BlockTriangular,
}

/// Solves `A u = ℓ` directly and checks the relative residual.
pub fn solve_global(system: &LinearSystem) -> Result<DiscreteSolution, SolverError> {
    solve_global_with(system, GlobalStrategy::default())
}

pub fn solve_global_with(system: &LinearSystem, strategy: GlobalStrategy) -> Result<DiscreteSolution, SolverError> {
    let singular = |relative_residual| SolverError::SingularSystem { relative_residual };
    let u = match strategy {
        GlobalStrategy::Dense => system
            .to_dense()
            .lu()
            .solve(&system.rhs)
            .ok_or(singular(f64::INFINITY))?,
        GlobalStrategy::BlockTriangular => block_triangular_solve(system).ok_or(singular(f64::INFINITY))?,
    };
    let residual = relative_residual(system, &u);
    if !(residual <= RESIDUAL_TOL) {
        return Err(singular(residual));
    }
    Ok(DiscreteSolution::from_vector(system, &u))
}

/// ‖A u − ℓ‖ / ‖ℓ‖, or the absolute residual when ℓ = 0.
pub fn relative_residual(system: &LinearSystem, u: &DVector<f64>) -> f64 {
    let r = (system.matvec(u) - &system.rhs).norm();
    let scale = system.rhs.norm();
    if scale > 0.0 {
        r / scale
    } else {
        r
    }
}

fn block_triangular_solve(system: &LinearSystem) -> Option<DVector<f64>> {
    let n = system.num_elements();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, system.blocks.len());
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    let mut by_test: Vec<Vec<(ElementId, &DMatrix<f64>)>> = vec![Vec::new(); n];
    for (&(trial, test), blk) in &system.blocks {
        by_test[test].push((trial, blk));
        if trial != test {
            graph.add_edge(nodes[trial], nodes[test], ());
        }
    }
    // Tarjan yields components in reverse topological order.
    let mut components = tarjan_scc(&graph);
    components.reverse();

    let mut u = DVector::zeros(system.dim());
    let mut local_index = vec![usize::MAX; n];
    for comp in components {
        let mut elems: Vec<ElementId> = comp.iter().map(|ix| ix.index()).collect();
        elems.sort_unstable();
        let mut offsets = Vec::with_capacity(elems.len());
        let mut size = 0;
        for (k, &e) in elems.iter().enumerate() {
            local_index[e] = k;
            offsets.push(size);
            size += system.range(e).len();
        }
        let mut a = DMatrix::zeros(size, size);
        let mut b = DVector::zeros(size);
        for (k, &e) in elems.iter().enumerate() {
            let r = system.range(e);
            b.rows_mut(offsets[k], r.len()).copy_from(&system.rhs.rows(r.start, r.len()));
        }
        for (k, &test) in elems.iter().enumerate() {
            let row = offsets[k];
            for &(trial, blk) in &by_test[test] {
                if elems.binary_search(&trial).is_ok() {
                    let col = offsets[local_index[trial]];
                    let mut view = a.view_mut((row, col), (blk.nrows(), blk.ncols()));
                    view += blk;
                } else {
                    let r = system.range(trial);
                    let known = u.rows(r.start, r.len());
                    let mut seg = b.rows_mut(row, blk.nrows());
                    seg.gemv(-1.0, blk, &known, 1.0);
                }
            }
        }
        let x = a.lu().solve(&b)?;
        for (k, &e) in elems.iter().enumerate() {
            let r = system.range(e);
            u.rows_mut(r.start, r.len()).copy_from(&x.rows(offsets[k], r.len()));
        }
    }
    Some(u)
}

/// Statistics of a causal sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepStats {
    pub num_layers: usize,
    pub max_local_condition: f64,
}

/// Solves element by element in causal order: each element only needs the
/// already computed traces of its past neighbours.
pub fn solve_causal(
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    data: &ProblemData,
) -> Result<DiscreteSolution, SolverError> {
    solve_causal_detailed(mesh, p, params, data).map(|(s, _)| s)
}

pub fn solve_causal_detailed(
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    data: &ProblemData,
) -> Result<(DiscreteSolution, SweepStats), SolverError> {
    let order = causal_order(mesh).map_err(|e| match e {
        MeshError::HasTimeLikeFaces(n) => SolverError::HasTimeLikeFaces(n),
        other => SolverError::Mesh(other),
    })?;
    params.check(mesh)?;
    let bases = build_bases(mesh, p);
    let faces: Vec<FaceBlocks> = mesh
        .faces
        .par_iter()
        .map(|f| face_contributions(f, &bases, params, data))
        .collect::<Result<_, _>>()?;

    let mut solution = DiscreteSolution::zeros(bases);
    let mut max_condition: f64 = 0.0;
    for layer in &order.layers {
        let solved: Vec<(ElementId, DVector<f64>, f64)> = layer
            .par_iter()
            .map(|&e| {
                let n = solution.bases[e].len();
                let mut a = DMatrix::zeros(n, n);
                let mut b = DVector::zeros(n);
                for &f in &mesh.elements[e].faces {
                    let fb = &faces[f];
                    for ((trial, test), blk) in &fb.blocks {
                        if *test != e {
                            continue;
                        }
                        if *trial == e {
                            a += blk;
                        } else {
                            b.gemv(-1.0, blk, &solution.coefficients[*trial], 1.0);
                        }
                    }
                    for (test, r) in &fb.rhs {
                        if *test == e {
                            b += r;
                        }
                    }
                }
                let sv = a.clone().svd(false, false).singular_values;
                let cond = sv.max() / sv.min();
                if cond > CONDITION_WARN {
                    warn!("element {e}: local condition number {cond:.2e}");
                }
                let x = a.lu().solve(&b).ok_or(SolverError::SingularLocalSystem(e))?;
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(SolverError::SingularLocalSystem(e));
                }
                Ok((e, x, cond))
            })
            .collect::<Result<_, _>>()?;
        for (e, x, cond) in solved {
            solution.coefficients[e] = x;
            max_condition = max_condition.max(cond);
        }
    }
    Ok((
        solution,
        SweepStats {
            num_layers: order.num_layers(),
            max_local_condition: max_condition,
        },
    ))
}

/// Assembles and solves globally in one call.
pub fn assemble_and_solve(
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    data: &ProblemData,
) -> Result<DiscreteSolution, SolverError> {
    let system = assemble_with_bases(mesh, build_bases(mesh, p), params, data)?;
    solve_global(&system)
}

/// Distances between two discrete solutions on the same mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equivalence {
    /// max over elements of the Euclidean norm of the coefficient difference.
    pub coefficients: f64,
    /// max over face quadrature points and adjacent elements of |Δv| and |Δσ|.
    pub traces: f64,
}

pub fn solution_equivalence(
    mesh: &Mesh,
    a: &DiscreteSolution,
    b: &DiscreteSolution,
) -> Result<Equivalence, SolverError> {
    if a.degree != b.degree {
        return Err(SolverError::MeshMismatch(format!("degrees {} and {}", a.degree, b.degree)));
    }
    if a.bases.len() != mesh.num_elements() || b.bases.len() != mesh.num_elements() {
        return Err(SolverError::MeshMismatch(format!(
            "{} and {} elements for a mesh with {}",
            a.bases.len(),
            b.bases.len(),
            mesh.num_elements()
        )));
    }
    if a.bases != b.bases {
        return Err(SolverError::MeshMismatch("different local bases".into()));
    }
    let coefficients = a
        .coefficients
        .iter()
        .zip(&b.coefficients)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max);
    let mut traces: f64 = 0.0;
    for face in &mesh.faces {
        let rule = face_rule_with_points(face, face_points(a.degree))?;
        for (pt, _) in rule.iter() {
            for e in face.adjacency.elements() {
                let (va, sa) = a.eval(e, pt);
                let (vb, sb) = b.eval(e, pt);
                traces = traces.max((va - vb).abs()).max((sa - sb).abs());
            }
        }
    }
    Ok(Equivalence { coefficients, traces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_global;
    use crate::mesh::{build_slab_mesh, build_tent_mesh, BoundaryKind, BoundarySegment, TentParams};
    use crate::problem::NamedSolution;

    fn tent() -> Mesh {
        let xs: Vec<f64> = (0..=6).map(|i| i as f64 / 6.0).collect();
        build_tent_mesh(&xs, TentParams::new(1.0, 0.5, 0.5), &BoundarySegment::both(BoundaryKind::Robin, 0.5)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = tent();
        let sys = assemble_global(&mesh, 2, &FluxParams::default(), &ProblemData::zero()).unwrap();
        let s = solve_global(&sys).unwrap();
        assert!(s.to_vector().iter().all(|v| *v == 0.0));
        let c = solve_causal(&mesh, 2, &FluxParams::default(), &ProblemData::zero()).unwrap();
        assert!(c.to_vector().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn strategies_agree() {
        let mesh = build_slab_mesh(
            &[0.0, 0.3, 0.6, 1.0],
            &[0.0, 0.25, 0.5],
            &[1.0, 1.0, 1.0],
            &BoundarySegment::both(BoundaryKind::Dirichlet, 0.5),
        )
        .unwrap();
        let data = ProblemData::from_exact(NamedSolution::Standing { k: 3.0 }.build(1.0));
        let sys = assemble_global(&mesh, 2, &FluxParams::default(), &data).unwrap();
        let dense = solve_global_with(&sys, GlobalStrategy::Dense).unwrap();
        let blocks = solve_global_with(&sys, GlobalStrategy::BlockTriangular).unwrap();
        let eq = solution_equivalence(&mesh, &dense, &blocks).unwrap();
        assert!(eq.coefficients < 1e-10 && eq.traces < 1e-10, "{eq:?}");
    }

    #[test]
    fn causal_sweep_matches_global_solve() {
        let mesh = tent();
        let data = ProblemData::from_exact(NamedSolution::TravelingSine { k: 5.0 }.build(1.0));
        let params = FluxParams::default();
        let sys = assemble_global(&mesh, 3, &params, &data).unwrap();
        let global = solve_global_with(&sys, GlobalStrategy::Dense).unwrap();
        let causal = solve_causal(&mesh, 3, &params, &data).unwrap();
        let eq = solution_equivalence(&mesh, &global, &causal).unwrap();
        assert!(eq.traces < 1e-10, "{eq:?}");
    }

    #[test]
    fn causal_rejects_time_like_faces() {
        let mesh = build_slab_mesh(&[0.0, 0.5, 1.0], &[0.0, 1.0], &[1.0, 1.0], &BoundarySegment::both(BoundaryKind::Robin, 1.0))
            .unwrap();
        let err = solve_causal(&mesh, 1, &FluxParams::default(), &ProblemData::zero()).unwrap_err();
        assert_eq!(err, SolverError::HasTimeLikeFaces(1));
    }

    #[test]
    fn equivalence_calibration() {
        let mesh = tent();
        let data = ProblemData::from_exact(NamedSolution::Standing { k: 2.0 }.build(1.0));
        let a = assemble_and_solve(&mesh, 1, &FluxParams::default(), &data).unwrap();
        assert_eq!(solution_equivalence(&mesh, &a, &a).unwrap(), Equivalence { coefficients: 0.0, traces: 0.0 });
        let mut b = a.clone();
        b.coefficients[3][0] += 1e-6;
        let eq = solution_equivalence(&mesh, &a, &b).unwrap();
        assert!((eq.coefficients - 1e-6).abs() < 1e-15);
        // The constant basis field has |w| = c = 1, |τ| = 1.
        assert!((eq.traces - 1e-6).abs() < 1e-15);
        let other = DiscreteSolution::zeros(build_bases(&mesh, 2));
        assert!(matches!(solution_equivalence(&mesh, &a, &other), Err(SolverError::MeshMismatch(_))));
    }
}
