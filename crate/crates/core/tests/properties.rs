use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use trefftz_dg::analysis::{dissipation_report, dg_norm, stability_data_bound};
use trefftz_dg::assembly::{
    assemble_global, check_neighbour_cancellation, face_couplings, face_points, flux_matrix_decomposition,
    FaceSideRole, FluxParams,
};
use trefftz_dg::basis::{build_basis, build_bases, trefftz_residual, PolyWave};
use trefftz_dg::mesh::{
    build_slab_mesh, build_tent_mesh, causal_order, validate_mesh, BoundaryKind, BoundarySegment, FaceKind,
    Mesh, Normal, TentParams,
};
use trefftz_dg::problem::{NamedSolution, ProblemData};
use trefftz_dg::quadrature::gauss_legendre;
use trefftz_dg::solver::{solution_equivalence, solve_causal, solve_global};
use trefftz_dg::verify::{coercivity_margin, consistency_residual};

fn kinds() -> impl Strategy<Value = BoundaryKind> {
    prop_oneof![
        Just(BoundaryKind::Dirichlet),
        Just(BoundaryKind::Neumann),
        Just(BoundaryKind::Robin)
    ]
}

prop_compose! {
    fn tent_mesh()(
        widths in prop::collection::vec(0.3f64..1.0, 2..7),
        zeta in 0.2f64..0.9,
        c in 0.4f64..2.5,
        t_final in 0.3f64..1.5,
        kind in kinds(),
    ) -> Mesh {
        let total: f64 = widths.iter().sum();
        let mut xs = vec![0.0];
        for w in &widths {
            xs.push(xs.last().unwrap() + w / total);
        }
        *xs.last_mut().unwrap() = 1.0;
        build_tent_mesh(&xs, TentParams::new(c, zeta, t_final), &BoundarySegment::both(kind, t_final)).unwrap()
    }
}

prop_compose! {
    fn slab_mesh()(
        nx in 1usize..4,
        nt in 1usize..4,
        speeds in prop::collection::vec(0.5f64..2.0, 3),
        kind in kinds(),
    ) -> Mesh {
        let xs: Vec<f64> = (0..=nx).map(|i| i as f64 / nx as f64).collect();
        let ts: Vec<f64> = (0..=nt).map(|i| 0.7 * i as f64 / nt as f64).collect();
        build_slab_mesh(&xs, &ts, &speeds[..nx], &BoundarySegment::both(kind, 0.7)).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tent_meshes_are_valid_and_causal(mesh in tent_mesh()) {
        prop_assert!(validate_mesh(&mesh).is_valid());
        prop_assert_eq!(mesh.count_faces(FaceKind::InteriorTimeLike), 0);
        let area: f64 = (0..mesh.num_elements()).map(|e| mesh.element_area(e)).sum();
        prop_assert!((area - mesh.domain.t_final).abs() < 1e-12);
        let order = causal_order(&mesh).unwrap();
        let pos = order.positions();
        for f in mesh.faces.iter().filter(|f| f.kind == FaceKind::InteriorSpaceLike) {
            prop_assert!(f.gamma < 1.0 && f.normal.t > 0.0);
            prop_assert!(pos[f.adjacency.minus.element] < pos[f.adjacency.plus.unwrap().element]);
        }
    }

    #[test]
    fn basis_fields_solve_the_wave_system(mesh in tent_mesh(), p in 0usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let el = &mesh.elements[seed as usize % mesh.num_elements()];
        let basis = build_basis(el, p);
        prop_assert_eq!(basis.len(), 2 * p + 2);
        for wave in &basis.waves {
            let r = trefftz_residual(|x| wave.eval(x), el, &mesh.vertices, 8, &mut rng);
            prop_assert!(r < 1e-6, "residual {}", r);
        }
    }

    #[test]
    fn gauss_rules_integrate_monomials(m in 1usize..20, k in 0usize..40) {
        prop_assume!(k < 2 * m);
        let rule = gauss_legendre(m).unwrap();
        let got: f64 = rule.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
        let want = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
        prop_assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn flux_split_sums_to_energy_flux(
        angle in -1.4f64..1.4,
        c in 0.2f64..3.0,
        alpha in 0.05f64..3.0,
        beta in 0.05f64..3.0,
        time_like in any::<bool>(),
    ) {
        let normal = if time_like { Normal::new(1.0, 0.0) } else { Normal::new(angle.sin(), angle.cos()) };
        let d = flux_matrix_decomposition(normal, c, alpha, beta);
        prop_assert!(d.sum_residual <= 1e-14);
        prop_assert!(d.kernel_matches);
        if time_like {
            prop_assert_eq!(d.plus_psd, alpha * beta >= 0.25 - 1e-12);
        }
    }

    #[test]
    fn neighbour_contributions_cancel(mesh in slab_mesh()) {
        let params = FluxParams::with_alpha_beta(0.8, 0.6);
        for f in mesh.faces.iter().filter(|f| f.kind.is_interior()) {
            prop_assert!(check_neighbour_cancellation(f, &params).unwrap() <= 1e-15);
        }
    }

    #[test]
    fn coercivity_holds_on_random_meshes(mesh in tent_mesh(), seed in any::<u64>(), p in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = coercivity_margin(&mut rng, &mesh, p, &FluxParams::default(), 8).unwrap();
        prop_assert!(margin >= -1e-10, "margin {}", margin);
    }

    #[test]
    fn coercivity_is_an_identity_on_slabs(mesh in slab_mesh(), seed in any::<u64>()) {
        // γ = 0 on flat interfaces, so uᵀAu = |||u|||² exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let margin = coercivity_margin(&mut rng, &mesh, 2, &FluxParams::with_alpha_beta(0.9, 0.3), 6).unwrap();
        prop_assert!(margin.abs() < 1e-10, "margin {}", margin);
    }

    #[test]
    fn exact_solutions_are_consistent(mesh in tent_mesh(), p in 1usize..4, m in 0u32..5, d in prop::bool::ANY) {
        let c = mesh.elements[0].wave_speed;
        let exact = NamedSolution::PolyWave { m, d: if d { 1.0 } else { -1.0 } }.build(c);
        let r = consistency_residual(&mesh, p, &FluxParams::default(), exact).unwrap();
        prop_assert!(r < 1e-11, "residual {}", r);
    }

    #[test]
    fn causal_sweep_matches_global_solve(mesh in tent_mesh(), p in 0usize..4) {
        let c = mesh.elements[0].wave_speed;
        let data = ProblemData::from_exact(NamedSolution::TravelingSine { k: 3.0 }.build(c));
        let params = FluxParams::default();
        let global = solve_global(&assemble_global(&mesh, p, &params, &data).unwrap()).unwrap();
        let causal = solve_causal(&mesh, p, &params, &data).unwrap();
        let eq = solution_equivalence(&mesh, &global, &causal).unwrap();
        prop_assert!(eq.traces <= 1e-10, "trace difference {}", eq.traces);
    }

    #[test]
    fn robin_slabs_dissipate(nt in 1usize..5, theta in 0.2f64..3.0, delta in 0.1f64..0.9, p in 1usize..4) {
        let mesh = build_slab_mesh(
            &[0.0, 0.4, 1.0],
            &(0..=nt).map(|i| i as f64 / nt as f64).collect::<Vec<_>>(),
            &[1.0, 1.0],
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        ).unwrap();
        let params = FluxParams { theta: Some(theta), delta: Some(delta), ..FluxParams::default() };
        let data = ProblemData::homogeneous(|x| (2.0 * x).sin(), |x| 1.0 - x);
        let sol = solve_global(&assemble_global(&mesh, p, &params, &data).unwrap()).unwrap();
        let report = dissipation_report(&sol, &mesh, &data).unwrap();
        prop_assert!(report.dissipative);
        prop_assert!(report.final_energy <= report.initial * (1.0 + 1e-12));
        let bound = stability_data_bound(&mesh, &data, &params, face_points(p)).unwrap();
        prop_assert!(dg_norm(&sol, &mesh, &params, face_points(p)).unwrap() <= bound * (1.0 + 1e-10));
    }
}

/// Coefficients of (a + b s)^k in powers of s.
fn linear_power(a: f64, b: f64, k: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; out.len() + 1];
        for (i, c) in out.iter().enumerate() {
            next[i] += a * c;
            next[i + 1] += b * c;
        }
        out = next;
    }
    out
}

/// ∫₀¹ of the product of two polynomials in s, exactly.
fn integrate_product(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            total += a * b / (i + j + 1) as f64;
        }
    }
    total
}

/// Phase polynomial of a wave along the segment from `a` to `b`.
fn phase_poly(wave: &PolyWave, face: &trefftz_dg::mesh::Face) -> Vec<f64> {
    let [a, b] = face.endpoints;
    let d = wave.direction.sign();
    let c = wave.wave_speed;
    let at = |x: f64, t: f64| (d * (x - wave.anchor.x) - c * (t - wave.anchor.t)) / wave.scale;
    let p0 = at(a.x, a.t);
    let p1 = at(b.x, b.t) - p0;
    linear_power(p0, p1, wave.degree)
}

#[test]
fn face_blocks_match_exact_polynomial_integrals() {
    let mesh = build_slab_mesh(
        &[0.0, 0.4, 1.0],
        &[0.0, 0.5, 1.0],
        &[1.0, 1.7],
        &[
            BoundarySegment::whole(trefftz_dg::mesh::Side::Left, BoundaryKind::Robin, 1.0),
            BoundarySegment::whole(trefftz_dg::mesh::Side::Right, BoundaryKind::Dirichlet, 1.0),
        ],
    )
    .unwrap();
    let tent = build_tent_mesh(
        &[0.0, 0.3, 0.55, 1.0],
        TentParams::new(1.3, 0.6, 0.8),
        &BoundarySegment::both(BoundaryKind::Neumann, 0.8),
    )
    .unwrap();
    let params = FluxParams {
        alpha: Some(0.7),
        beta: Some(1.3),
        delta: Some(0.35),
        theta: Some(0.9),
        ..FluxParams::default()
    };
    let mut worst: f64 = 0.0;
    for mesh in [&mesh, &tent] {
        for p in 0..=2 {
            let system = assemble_global(mesh, p, &params, &ProblemData::zero()).unwrap();
            let bases = build_bases(mesh, p);
            let mut expected = std::collections::BTreeMap::new();
            for face in &mesh.faces {
                let len = face.length();
                for cp in face_couplings(face, &params).unwrap() {
                    let elem = |r| match r {
                        FaceSideRole::Minus => face.adjacency.minus.element,
                        FaceSideRole::Plus => face.adjacency.plus.unwrap().element,
                    };
                    let (trial, test) = (elem(cp.trial), elem(cp.test));
                    let block = expected.entry((trial, test)).or_insert_with(|| {
                        nalgebra::DMatrix::<f64>::zeros(bases[test].len(), bases[trial].len())
                    });
                    let m = cp.matrix;
                    for (j, tw) in bases[trial].waves.iter().enumerate() {
                        let pj = phase_poly(tw, face);
                        let (vj, sj) = (tw.wave_speed, tw.direction.sign());
                        for (i, sw) in bases[test].waves.iter().enumerate() {
                            let pi = phase_poly(sw, face);
                            let (wi, ti) = (sw.wave_speed, sw.direction.sign());
                            let coef = wi * (m[(0, 0)] * vj + m[(0, 1)] * sj) + ti * (m[(1, 0)] * vj + m[(1, 1)] * sj);
                            block[(i, j)] += len * coef * integrate_product(&pi, &pj);
                        }
                    }
                }
            }
            for (key, want) in &expected {
                let got = system.block(key.0, key.1).unwrap();
                let scale = want.amax().max(1.0);
                worst = worst.max((got - want).amax() / scale);
            }
            assert_eq!(expected.len(), system.blocks.len());
        }
    }
    assert!(worst < 1e-13, "max relative entry difference {worst:e}");
}
