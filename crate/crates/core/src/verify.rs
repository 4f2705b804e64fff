//! Randomised property checks of the whole discretisation.
//!
//! Every check returns a [`CheckResult`] with the measured quantity and the
//! tolerance it was held to, so that callers can report and decide.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    continuity_constant, dg_norm, dissipation_report, energy_with_bounds, l2q_error, norm_report,
    stability_constant, stability_data_bound, NormOptions, TraceSide,
};
use crate::assembly::{
    assemble_global, boundary_flux_decomposition, check_elemental_identity, check_jump_identities,
    check_neighbour_cancellation, face_couplings, face_points, flux_matrix_decomposition, FaceSideRole,
    FluxParams, LinearSystem,
};
use crate::basis::{basis_dim, build_bases, rank_and_condition};
use crate::mesh::{
    build_slab_mesh, build_tent_mesh, interface_fronts, BoundaryKind, BoundarySegment, FaceKind, Mesh,
    MeshError, Side, TentParams,
};
use crate::problem::{ExactSolution, NamedSolution, ProblemData};
use crate::quadrature::face_rule_with_points;
use crate::solver::{solution_equivalence, solve_causal, solve_global, solve_global_with, DiscreteSolution, Difference, GlobalStrategy, Smooth};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured quantity (a residual, ratio or margin, see `detail`).
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
            detail: detail.into(),
        }
    }
}

/// Settings of the property suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Highest polynomial degree exercised.
    pub max_degree: usize,
    /// Random vectors or pairs per sampled property.
    pub samples: usize,
    pub params: FluxParams,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            max_degree: 3,
            samples: 100,
            params: FluxParams::default(),
        }
    }
}

/// Tent mesh over a random partition of (0, 1) with `cells` cells.
pub fn random_tent_mesh<R: Rng>(rng: &mut R, cells: usize, t_final: f64, kind: BoundaryKind) -> Result<Mesh, MeshError> {
    let mut xs = vec![0.0];
    for _ in 0..cells {
        xs.push(xs.last().unwrap() + rng.random_range(0.5..1.5));
    }
    let total = *xs.last().unwrap();
    for x in &mut xs {
        *x /= total;
    }
    let zeta = rng.random_range(0.3..0.8);
    let c = rng.random_range(0.5..2.0);
    build_tent_mesh(&xs, TentParams::new(c, zeta, t_final), &BoundarySegment::both(kind, t_final))
}

/// Slab mesh with a speed jump, Dirichlet data on the left and Neumann data on the right.
pub fn mixed_slab_mesh(nx: usize, nt: usize) -> Result<Mesh, MeshError> {
    let xs: Vec<f64> = (0..=nx).map(|i| i as f64 / nx as f64).collect();
    let ts: Vec<f64> = (0..=nt).map(|i| 0.5 * i as f64 / nt as f64).collect();
    let speeds: Vec<f64> = (0..nx).map(|i| if 2 * i < nx { 1.0 } else { 1.5 }).collect();
    build_slab_mesh(
        &xs,
        &ts,
        &speeds,
        &[
            BoundarySegment::whole(Side::Left, BoundaryKind::Dirichlet, 0.5),
            BoundarySegment::whole(Side::Right, BoundaryKind::Neumann, 0.5),
        ],
    )
}

fn random_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn norms_of(system: &LinearSystem, u: &DVector<f64>, mesh: &Mesh, params: &FluxParams) -> Result<(f64, f64), Error> {
    let field = DiscreteSolution::from_vector(system, u);
    let r = norm_report(&field, mesh, params, NormOptions::new(face_points(field.degree)))?;
    Ok((r.dg_norm, r.dg_plus_norm))
}

/// Smallest (uᵀAu − |||u|||²) / |||u|||² over random coefficient vectors.
pub fn coercivity_margin<R: Rng>(
    rng: &mut R,
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    samples: usize,
) -> Result<f64, Error> {
    let system = assemble_global(mesh, p, params, &ProblemData::zero())?;
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = random_vector(rng, system.dim());
        let (dg, _) = norms_of(&system, &u, mesh, params)?;
        worst = worst.min((system.form(&u, &u) - dg * dg) / (dg * dg));
    }
    Ok(worst)
}

/// Largest |A(u; w)| / (C_c |||u|||_DG⁺ |||w|||_DG) over random pairs.
pub fn continuity_ratio<R: Rng>(
    rng: &mut R,
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    samples: usize,
) -> Result<f64, Error> {
    let system = assemble_global(mesh, p, params, &ProblemData::zero())?;
    let cc = continuity_constant(params, mesh)?;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = random_vector(rng, system.dim());
        let w = random_vector(rng, system.dim());
        let (_, u_plus) = norms_of(&system, &u, mesh, params)?;
        let (w_dg, _) = norms_of(&system, &w, mesh, params)?;
        worst = worst.max(system.form(&u, &w).abs() / (cc * u_plus * w_dg));
    }
    Ok(worst)
}

/// max |ℓ(w) − A(exact; w)| / max(1, max |ℓ(w)|) over all basis test fields,
/// with the trial field replaced by the exact solution in every face integral.
pub fn consistency_residual(
    mesh: &Mesh,
    p: usize,
    params: &FluxParams,
    exact: Arc<dyn ExactSolution>,
) -> Result<f64, Error> {
    let data = ProblemData::from_exact(exact.clone());
    let system = assemble_global(mesh, p, params, &data)?;
    let mut applied = DVector::zeros(system.dim());
    let mut vals = Vec::new();
    for face in &mesh.faces {
        let rule = face_rule_with_points(face, face_points(p))?;
        for coupling in face_couplings(face, params)? {
            let test = match coupling.test {
                FaceSideRole::Minus => face.adjacency.minus.element,
                FaceSideRole::Plus => face.adjacency.plus.expect("interior coupling").element,
            };
            let basis = &system.bases[test];
            let range = system.range(test);
            let m = coupling.matrix;
            for (pt, wt) in rule.iter() {
                let (v, s) = exact.eval(pt.x, pt.t);
                let fw = m[(0, 0)] * v + m[(0, 1)] * s;
                let ft = m[(1, 0)] * v + m[(1, 1)] * s;
                basis.eval_into(pt, &mut vals);
                for (i, &(w, tau)) in vals.iter().enumerate() {
                    applied[range.start + i] += wt * (w * fw + tau * ft);
                }
            }
        }
    }
    let scale = system.rhs.amax().max(1.0);
    Ok((&system.rhs - applied).amax() / scale)
}

/// Runs the full property suite.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<CheckResult>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = &config.params;
    let mut out = Vec::new();
    let tent = random_tent_mesh(&mut rng, 6, 0.6, BoundaryKind::Robin)?;
    let mixed = mixed_slab_mesh(4, 3)?;

    // Local spaces.
    for p in 0..=config.max_degree.max(6) {
        let rank = tent
            .elements
            .iter()
            .map(|el| {
                let basis = crate::basis::build_basis(el, p);
                basis.gram_matrix(el, &tent.vertices).map(|g| rank_and_condition(&g, 1e-13).0)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let bad = rank.iter().filter(|&&r| r != basis_dim(1, p)).count();
        out.push(CheckResult::at_most(
            &format!("dimension_p{p}"),
            bad as f64,
            0.0,
            format!("elements whose Gram rank differs from {}", basis_dim(1, p)),
        ));
    }

    for (label, mesh) in [("tent", &tent), ("mixed_slab", &mixed)] {
        let bases = build_bases(mesh, config.max_degree);
        out.push(CheckResult::at_most(
            &format!("elemental_identity_{label}"),
            check_elemental_identity(mesh, &bases)?,
            1e-12,
            "max |∫∂K energy flux| over basis fields",
        ));
    }

    for p in 1..=config.max_degree {
        let margin = coercivity_margin(&mut rng, &tent, p, params, config.samples)?;
        out.push(CheckResult::at_most(
            &format!("coercivity_p{p}"),
            -margin,
            1e-10,
            "−min (uᵀAu − |||u|||²)/|||u|||²",
        ));
    }
    let mixed_params = params.clone();
    for (label, mesh) in [("tent", &tent), ("mixed_slab", &mixed)] {
        let margin = coercivity_margin(&mut rng, mesh, config.max_degree, &mixed_params, config.samples / 4 + 1)?;
        out.push(CheckResult::at_most(
            &format!("coercivity_{label}"),
            -margin,
            1e-10,
            "−min (uᵀAu − |||u|||²)/|||u|||²",
        ));
        let ratio = continuity_ratio(&mut rng, mesh, config.max_degree.min(2), params, config.samples)?;
        out.push(CheckResult::at_most(
            &format!("continuity_{label}"),
            ratio,
            1.0 + 1e-10,
            "max |A(u;w)| / (C_c |||u|||_DG+ |||w|||_DG)",
        ));
    }

    for p in 1..=config.max_degree {
        for (label, mesh) in [("tent", &tent), ("mixed_slab", &mixed)] {
            let c = mesh.elements[0].wave_speed;
            let exact = NamedSolution::PolyWave { m: p as u32 + 1, d: -1.0 }.build(if label == "tent" { c } else { 1.0 });
            if label == "mixed_slab" {
                // Polynomial waves need a single speed; use a uniform copy of the mesh.
                let uniform = build_slab_mesh(
                    &[0.0, 0.25, 0.5, 0.75, 1.0],
                    &[0.0, 0.25, 0.5],
                    &[1.0; 4],
                    &mixed.boundary,
                )?;
                let r = consistency_residual(&uniform, p, params, exact.clone())?;
                out.push(CheckResult::at_most(&format!("consistency_{label}_p{p}"), r, 1e-11, "max |ℓ − A(exact)| / max |ℓ|"));
            } else {
                let r = consistency_residual(mesh, p, params, exact.clone())?;
                out.push(CheckResult::at_most(&format!("consistency_{label}_p{p}"), r, 1e-11, "max |ℓ − A(exact)| / max |ℓ|"));
            }
        }
    }

    let jumps = check_jump_identities(&mut rng, config.samples * 10);
    for (i, r) in jumps.max_residual.iter().enumerate() {
        out.push(CheckResult::at_most(&format!("jump_identity_{}", i + 1), *r, 1e-13, "relative residual"));
    }

    let mut sum_residual: f64 = 0.0;
    let mut kernel_failures = 0;
    let mut cancel: f64 = 0.0;
    for mesh in [&tent, &mixed] {
        for face in &mesh.faces {
            let d = if face.kind.is_interior() {
                cancel = cancel.max(check_neighbour_cancellation(face, params)?);
                let (a, b) = match face.kind {
                    FaceKind::InteriorTimeLike => (params.alpha(face.id)?, params.beta(face.id)?),
                    _ => (1.0, 1.0),
                };
                flux_matrix_decomposition(face.normal, face.adjacency.minus.wave_speed, a, b)
            } else {
                boundary_flux_decomposition(face, params)?
            };
            sum_residual = sum_residual.max(d.sum_residual);
            kernel_failures += usize::from(!d.kernel_matches);
        }
    }
    out.push(CheckResult::at_most("flux_decomposition_sum", sum_residual, 1e-14, "max |M⁺ + M⁻ − M|"));
    out.push(CheckResult::at_most("flux_decomposition_kernel", kernel_failures as f64, 0.0, "faces with ker(M⁺ − M⁻) ≠ ker(M)"));
    out.push(CheckResult::at_most("flux_decomposition_neighbours", cancel, 1e-15, "max |M⁺|K1 + M⁻|K2|"));
    for ab in [0.3, 0.5, 0.8, 1.0] {
        let d = flux_matrix_decomposition(crate::mesh::Normal::new(1.0, 0.0), 1.0, ab, ab);
        let expected = ab * ab >= 0.25;
        out.push(CheckResult {
            name: format!("flux_psd_alpha_beta_{ab}"),
            passed: d.plus_psd == expected && d.minus_nsd == expected,
            value: d.plus_eigenvalues[0],
            tolerance: -crate::assembly::EIGEN_TOL,
            detail: format!("smallest eigenvalue of M⁺; αβ ≥ 1/4 is {expected}"),
        });
    }

    let data = ProblemData::from_exact(NamedSolution::TravelingSine { k: 4.0 }.build(tent.elements[0].wave_speed));
    for p in 1..=config.max_degree {
        let system = assemble_global(&tent, p, params, &data)?;
        let global = solve_global_with(&system, GlobalStrategy::Dense)?;
        let causal = solve_causal(&tent, p, params, &data)?;
        let eq = solution_equivalence(&tent, &global, &causal)?;
        out.push(CheckResult::at_most(&format!("solver_equivalence_p{p}"), eq.traces, 1e-10, "max trace difference"));
        let again = assemble_global(&tent, p, params, &data)?;
        let same = again == system && solve_global(&again)? == solve_global(&system)?;
        out.push(CheckResult::at_most(
            &format!("deterministic_p{p}"),
            f64::from(u8::from(!same)),
            0.0,
            "repeated assembly and solve differ bitwise",
        ));
    }

    // Energy on Robin slabs with homogeneous boundary data.
    let slabs = build_slab_mesh(
        &[0.0, 0.2, 0.5, 0.7, 1.0],
        &[0.0, 0.2, 0.4, 0.6],
        &[1.0; 4],
        &BoundarySegment::both(BoundaryKind::Robin, 0.6),
    )?;
    let homogeneous = ProblemData::homogeneous(|x| (std::f64::consts::PI * x).sin(), |x| x * (1.0 - x));
    for p in 1..=config.max_degree {
        let sol = solve_global(&assemble_global(&slabs, p, params, &homogeneous)?)?;
        let report = dissipation_report(&sol, &slabs, &homogeneous)?;
        out.push(CheckResult::at_most(
            &format!("dissipation_p{p}"),
            (report.final_energy - report.initial) / report.initial,
            1e-12,
            "(E(T) − E(0)) / E(0)",
        ));
        let bound = stability_data_bound(&slabs, &homogeneous, params, face_points(p))?;
        let dg = dg_norm(&sol, &slabs, params, face_points(p))?;
        out.push(CheckResult::at_most(&format!("stability_bound_p{p}"), dg / bound, 1.0 + 1e-10, "|||u|||_DG / data bound"));
    }

    // Energy bounds on the tent fronts for the exact travelling wave.
    let exact = NamedSolution::TravelingSine { k: 4.0 }.build(tent.elements[0].wave_speed);
    let smooth = Smooth(exact.as_ref());
    let mut bound_violation: f64 = 0.0;
    let mut balance: f64 = 0.0;
    let fronts = interface_fronts(&tent)?;
    let mut previous: Option<f64> = None;
    for front in &fronts {
        let b = energy_with_bounds(&smooth, &tent, &front.faces, TraceSide::Past, 12)?;
        bound_violation = bound_violation.max(b.lower - b.energy).max(b.energy - b.upper);
        if let Some(prev) = previous {
            // Robin boundary with exact data is not energy neutral; only check
            // the bounds here and the balance on the flat slab interfaces below.
            let _ = prev;
        }
        previous = Some(b.energy);
    }
    out.push(CheckResult::at_most("energy_bounds", bound_violation, 1e-12, "max violation of (1 ∓ γ) bounds"));
    let periodic = NamedSolution::Standing { k: std::f64::consts::PI }.build(1.0);
    let smooth_standing = Smooth(periodic.as_ref());
    let neumann_slabs = build_slab_mesh(
        &[0.0, 0.5, 1.0],
        &[0.0, 0.3, 0.6],
        &[1.0, 1.0],
        &BoundarySegment::both(BoundaryKind::Dirichlet, 0.6),
    )?;
    let fronts = interface_fronts(&neumann_slabs)?;
    let first = energy_with_bounds(&smooth_standing, &neumann_slabs, &fronts[0].faces, TraceSide::Future, 12)?.energy;
    for front in &fronts[1..] {
        let e = energy_with_bounds(&smooth_standing, &neumann_slabs, &front.faces, TraceSide::Past, 12)?.energy;
        balance = balance.max((e - first).abs());
    }
    out.push(CheckResult::at_most(
        "energy_conservation",
        balance,
        1e-10,
        "standing wave with v = 0 on the boundary: |E(Σ) − E(0)|",
    ));

    // Galerkin exactness and the L²(Q) stability estimate on a Robin tent mesh.
    for p in 1..=config.max_degree {
        let c = tent.elements[0].wave_speed;
        let exact = NamedSolution::PolyWave { m: p as u32, d: 1.0 }.build(c);
        let data = ProblemData::from_exact(exact.clone());
        let sol = solve_causal(&tent, p, params, &data)?;
        let smooth = Smooth(exact.as_ref());
        let err = dg_norm(&Difference(&smooth, &sol), &tent, params, face_points(p) + 2)?;
        let scale = dg_norm(&smooth, &tent, params, face_points(p) + 2)?;
        out.push(CheckResult::at_most(&format!("galerkin_exact_p{p}"), err / scale, 1e-8, "relative DG error"));

        let sine = NamedSolution::TravelingSine { k: 3.0 }.build(c);
        let data = ProblemData::from_exact(sine.clone());
        let sol = solve_causal(&tent, p, params, &data)?;
        let smooth = Smooth(sine.as_ref());
        let dg = dg_norm(&Difference(&smooth, &sol), &tent, params, face_points(p) + 4)?;
        let l2 = l2q_error(&sol, sine.as_ref(), &tent)?;
        let cs = stability_constant(&tent, params)?;
        out.push(CheckResult::at_most(&format!("l2q_stability_p{p}"), l2 / (cs.c_stab * dg), 1.0, "L²(Q) error / (C_stab DG error)"));
    }

    // Norm sanity.
    let system = assemble_global(&mixed, 2, params, &ProblemData::zero())?;
    let u = random_vector(&mut rng, system.dim());
    let report = norm_report(&DiscreteSolution::from_vector(&system, &u), &mixed, params, NormOptions::new(4))?;
    let negative = report.terms.iter().filter(|t| t.value < 0.0).count();
    out.push(CheckResult::at_most("norm_terms_nonnegative", negative as f64, 0.0, "negative norm terms"));
    out.push(CheckResult::at_most(
        "dg_plus_dominates",
        report.dg_norm - report.dg_plus_norm,
        0.0,
        "|||u|||_DG − |||u|||_DG+",
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_with_small_sample() {
        let config = SuiteConfig {
            samples: 12,
            max_degree: 2,
            ..SuiteConfig::default()
        };
        let results = run_suite(&config).unwrap();
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
        for r in &results {
            println!("{:<36} {:>12.3e} <= {:.1e}", r.name, r.value, r.tolerance);
        }
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
