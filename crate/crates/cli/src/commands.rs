use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use trefftz_dg::analysis::{
    continuity_constant, convergence_study, dg_norm, dissipation_report, l2q_error, norm_report,
    stability_constant, NormOptions,
};
use trefftz_dg::assembly::{assemble_global, face_points};
use trefftz_dg::mesh::{interface_layers, validate_mesh, FaceKind, Mesh, MeshFile};
use trefftz_dg::solver::{relative_residual, solve_causal_detailed, solve_global, Difference, DiscreteSolution, Smooth};
use trefftz_dg::verify::{run_suite, SuiteConfig};

use crate::config::{uniform_speed, RunConfig, SolverChoice};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn mesh_summary(mesh: &Mesh) -> serde_json::Value {
    let kinds = [
        FaceKind::InteriorSpaceLike,
        FaceKind::InteriorTimeLike,
        FaceKind::Initial,
        FaceKind::Final,
        FaceKind::Dirichlet,
        FaceKind::Neumann,
        FaceKind::Robin,
    ];
    let faces: serde_json::Map<_, _> = kinds
        .iter()
        .map(|&k| (format!("{k:?}"), json!(mesh.count_faces(k))))
        .collect();
    json!({
        "elements": mesh.num_elements(),
        "faces": faces,
        "max_diameter": mesh.max_diameter(),
    })
}

pub fn mesh(config: &RunConfig) -> Result<()> {
    let mesh = config.build_mesh()?;
    let report = validate_mesh(&mesh);
    if !report.is_valid() {
        anyhow::bail!("generated mesh is invalid: {:?}", report.violations);
    }
    let dir = config.out_dir();
    write_json(&dir, "mesh.json", &MeshFile::from(&mesh))?;
    println!(
        "mesh: {} elements, {} faces -> {}",
        mesh.num_elements(),
        mesh.faces.len(),
        dir.join("mesh.json").display()
    );
    Ok(())
}

pub fn solve(config: &RunConfig) -> Result<()> {
    let mesh = config.build_mesh()?;
    let data = config.problem.data(&mesh)?;
    let p = config.p;
    let causal = match config.solver {
        SolverChoice::Auto => !mesh.has_face_kind(FaceKind::InteriorTimeLike),
        SolverChoice::Causal => true,
        SolverChoice::Global => false,
    };
    let (solution, solver) = if causal {
        let (s, stats) = solve_causal_detailed(&mesh, p, &config.flux, &data).context("causal sweep")?;
        (s, json!({"method": "causal", "stats": stats}))
    } else {
        let system = assemble_global(&mesh, p, &config.flux, &data).context("assembly")?;
        let s = solve_global(&system).context("global solve")?;
        let residual = relative_residual(&system, &s.to_vector());
        (s, json!({"method": "global", "relative_residual": residual}))
    };

    let norms = norm_report(&solution, &mesh, &config.flux, NormOptions::new(face_points(p)))?;
    let energy = dissipation_report(&solution, &mesh, &data).ok();
    let errors = match config.problem.exact(uniform_speed(&mesh).unwrap_or(f64::NAN)) {
        Some(exact) => {
            let smooth = Smooth(exact.as_ref());
            Some(json!({
                "solution": exact.name(),
                "l2q_error": l2q_error(&solution, exact.as_ref(), &mesh)?,
                "dg_error": dg_norm(&Difference(&smooth, &solution), &mesh, &config.flux, face_points(p) + 4)?,
            }))
        }
        None => None,
    };

    let dir = config.out_dir();
    write_json(&dir, "mesh.json", &MeshFile::from(&mesh))?;
    let mut csv = create(&dir, "solution.csv")?;
    solution.write_csv_grid(&mesh, config.grid.nx, config.grid.nt, &mut csv)?;
    csv.flush()?;
    let mut coeffs = create(&dir, "coefficients.txt")?;
    solution.write_coefficients(&mut coeffs)?;
    coeffs.flush()?;
    write_json(
        &dir,
        "report.json",
        &json!({
            "config": config,
            "mesh": mesh_summary(&mesh),
            "dofs": solution.num_dofs(),
            "solver": solver,
            "norms": norms,
            "energy": energy,
            "errors": errors,
        }),
    )?;
    print_solve_summary(&solution, &norms.dg_norm, energy.as_ref().map(|e| e.final_energy), errors.as_ref());
    println!("wrote {}", dir.display());
    Ok(())
}

fn print_solve_summary(
    solution: &DiscreteSolution,
    dg: &f64,
    final_energy: Option<f64>,
    errors: Option<&serde_json::Value>,
) {
    println!("dofs {}  |||u_h|||_DG = {dg:.6e}", solution.num_dofs());
    if let Some(e) = final_energy {
        println!("E(T) = {e:.6e}");
    }
    if let Some(err) = errors {
        println!("L2(Q) error {}  DG error {}", err["l2q_error"], err["dg_error"]);
    }
}

/// Runs the property suite; returns whether every check passed.
pub fn verify(config: &RunConfig) -> Result<bool> {
    let suite = SuiteConfig {
        seed: config.seed,
        max_degree: config.p.clamp(1, 4),
        samples: config.samples,
        params: config.flux.clone(),
    };
    let results = run_suite(&suite)?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!r.passed);
        println!("{status} {:<34} {:>11.3e} (tol {:.1e})  {}", r.name, r.value, r.tolerance, r.detail);
    }
    println!("{} checks, {failed} failed", results.len());
    write_json(
        &config.out_dir(),
        "report.json",
        &json!({ "seed": config.seed, "checks": results, "failed": failed }),
    )?;
    Ok(failed == 0)
}

pub fn converge(config: &RunConfig) -> Result<()> {
    if config.mesh_file.is_some() {
        anyhow::bail!("converge refines the `mesh` spec; mesh_file is not supported");
    }
    let exact = config
        .problem
        .exact(config.mesh.wave_speed())
        .context("converge needs an exact solution (problem.type = \"exact\")")?;
    let tables = convergence_study(exact, &config.mesh, &[config.p], config.levels, &config.flux)?;
    let table = &tables[0];
    let dir = config.out_dir();
    let mut out = create(&dir, "convergence.csv")?;
    table.write_csv(&mut out)?;
    out.flush()?;
    write_json(&dir, "report.json", &json!({ "config": config, "convergence": table }))?;
    for r in &table.rows {
        let order = r.order_l2.map_or("-".to_string(), |o| format!("{o:.3}"));
        println!("h {:.4e}  dofs {:>7}  L2 {:.4e}  DG {:.4e}  order {order}", r.h, r.dofs, r.l2q_error, r.dg_error);
    }
    if table.at_floor {
        println!("note: errors reached the rounding floor, orders there are not reported");
    }
    Ok(())
}

pub fn constants(config: &RunConfig) -> Result<()> {
    let mesh = config.build_mesh()?;
    let cc = continuity_constant(&config.flux, &mesh)?;
    println!("C_c = {cc}");
    match stability_constant(&mesh, &config.flux) {
        Ok(s) => {
            let layers = interface_layers(&mesh)?;
            println!("N = {}", s.interfaces);
            if layers.longest_path != layers.greedy {
                println!("N (longest face path) = {}", layers.longest_path);
            }
            println!("C_stab^2 = {}", s.c_stab_squared);
            println!("C_stab = {}", s.c_stab);
        }
        Err(e) => println!("C_stab unavailable: {e}"),
    }
    Ok(())
}
