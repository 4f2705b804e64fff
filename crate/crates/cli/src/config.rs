//! Run configuration read from JSON and patched by command-line flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use trefftz_dg::assembly::FluxParams;
use trefftz_dg::mesh::{BoundaryKind, Mesh, MeshFile, MeshSpec};
use trefftz_dg::problem::{BoundaryPoint, ExactSolution, NamedSolution, ProblemData};

pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_degree")]
    pub p: usize,
    #[serde(default)]
    pub problem: Problem,
    #[serde(default = "default_mesh")]
    pub mesh: MeshSpec,
    /// Mesh file written by `tdg mesh`; replaces `mesh` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,
    #[serde(default)]
    pub flux: FluxParams,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default)]
    pub grid: Grid,
    /// Random vectors per sampled property in `verify`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    2024
}

fn default_degree() -> usize {
    2
}

fn default_levels() -> u32 {
    4
}

fn default_samples() -> usize {
    100
}

fn default_mesh() -> MeshSpec {
    MeshSpec::Tent {
        a: 0.0,
        b: 1.0,
        t_final: 1.0,
        nx: 8,
        zeta: 0.5,
        wave_speed: 1.0,
        boundary: BoundaryKind::Robin,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

/// Sampling grid of `solution.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self { nx: 41, nt: 41 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Causal sweep when the mesh allows it, global solve otherwise.
    #[default]
    Auto,
    Causal,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    /// Data generated from a named exact solution.
    Exact { solution: NamedSolution },
    /// Sampled initial data (linear interpolation between (x, value) pairs)
    /// and constant boundary data.
    Data {
        v0: Vec<[f64; 2]>,
        sigma0: Vec<[f64; 2]>,
        #[serde(default)]
        g_dirichlet: f64,
        #[serde(default)]
        g_neumann: f64,
        #[serde(default)]
        g_robin: f64,
    },
}

impl Default for Problem {
    fn default() -> Self {
        Self::Exact {
            solution: NamedSolution::TravelingSine {
                k: 2.0 * std::f64::consts::PI,
            },
        }
    }
}

fn interpolate(samples: &[[f64; 2]], x: f64) -> f64 {
    match samples.iter().position(|s| s[0] >= x) {
        None => samples.last().map_or(0.0, |s| s[1]),
        Some(0) => samples[0][1],
        Some(i) => {
            let ([x0, y0], [x1, y1]) = (samples[i - 1], samples[i]);
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

fn check_samples(name: &str, samples: &[[f64; 2]]) -> Result<()> {
    if samples.is_empty() {
        bail!("problem.{name} needs at least one sample");
    }
    if samples.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
        bail!("problem.{name} has non-finite samples");
    }
    if samples.windows(2).any(|w| w[1][0] <= w[0][0]) {
        bail!("problem.{name} sample abscissae must increase strictly");
    }
    Ok(())
}

impl Problem {
    /// Exact solution with wave speed `c`, if the problem has one.
    pub fn exact(&self, c: f64) -> Option<Arc<dyn ExactSolution>> {
        match self {
            Self::Exact { solution } => Some(solution.build(c)),
            Self::Data { .. } => None,
        }
    }

    pub fn data(&self, mesh: &Mesh) -> Result<ProblemData> {
        match self {
            Self::Exact { .. } => {
                let c = uniform_speed(mesh)?;
                Ok(ProblemData::from_exact(self.exact(c).expect("exact problem")))
            }
            Self::Data {
                v0,
                sigma0,
                g_dirichlet,
                g_neumann,
                g_robin,
            } => {
                check_samples("v0", v0)?;
                check_samples("sigma0", sigma0)?;
                let (v0, sigma0) = (v0.clone(), sigma0.clone());
                let (gd, gn, gr) = (*g_dirichlet, *g_neumann, *g_robin);
                Ok(ProblemData {
                    v0: Arc::new(move |x| interpolate(&v0, x)),
                    sigma0: Arc::new(move |x| interpolate(&sigma0, x)),
                    g_dirichlet: Arc::new(move |_: &BoundaryPoint| gd),
                    g_neumann: Arc::new(move |_: &BoundaryPoint| gn),
                    g_robin: Arc::new(move |_: &BoundaryPoint| gr),
                })
            }
        }
    }
}

/// The single wave speed of `mesh`, required by exact solutions.
pub fn uniform_speed(mesh: &Mesh) -> Result<f64> {
    let c = mesh.elements[0].wave_speed;
    if mesh.elements.iter().any(|e| e.wave_speed != c) {
        bail!("exact solutions need a uniform wave speed, the mesh has several");
    }
    Ok(c)
}

/// Command-line values that override config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub p: Option<usize>,
    pub mesh: Option<MeshKind>,
    pub zeta: Option<f64>,
    pub levels: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MeshKind {
    Slab,
    Tent,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Parses JSON, reporting the offending field path and position on error.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            anyhow::anyhow!("field `{path}`: {inner}")
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(p) = o.p {
            self.p = p;
        }
        if let Some(levels) = o.levels {
            self.levels = levels;
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(kind) = o.mesh {
            self.mesh = switch_kind(&self.mesh, kind);
        }
        if let Some(z) = o.zeta {
            match &mut self.mesh {
                MeshSpec::Tent { zeta, .. } => *zeta = z,
                MeshSpec::Slab { .. } => bail!("--zeta only applies to tent meshes"),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.p > MAX_DEGREE {
            bail!("p = {} is outside 0..={MAX_DEGREE}", self.p);
        }
        if self.levels == 0 {
            bail!("levels must be at least 1");
        }
        if self.grid.nx < 2 || self.grid.nt < 2 {
            bail!("grid needs at least 2 points per direction");
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        match &self.mesh_file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading mesh {}", path.display()))?;
                let file: MeshFile = serde_json::from_str(&text).with_context(|| format!("parsing mesh {}", path.display()))?;
                Ok(file.into_mesh()?)
            }
            None => Ok(self.mesh.build()?),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn switch_kind(spec: &MeshSpec, kind: MeshKind) -> MeshSpec {
    match (spec.clone(), kind) {
        (s @ MeshSpec::Slab { .. }, MeshKind::Slab) | (s @ MeshSpec::Tent { .. }, MeshKind::Tent) => s,
        (
            MeshSpec::Tent {
                a,
                b,
                t_final,
                nx,
                wave_speed,
                boundary,
                ..
            },
            MeshKind::Slab,
        ) => MeshSpec::Slab {
            a,
            b,
            t_final,
            nx,
            nt: nx,
            wave_speed,
            boundary,
        },
        (
            MeshSpec::Slab {
                a,
                b,
                t_final,
                nx,
                wave_speed,
                boundary,
                ..
            },
            MeshKind::Tent,
        ) => MeshSpec::Tent {
            a,
            b,
            t_final,
            nx,
            zeta: 0.5,
            wave_speed,
            boundary,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = RunConfig::parse("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.p, 2);
        assert!(matches!(c.mesh, MeshSpec::Tent { nx: 8, .. }));
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = RunConfig::parse(r#"{"mesh": {"kind": "slab", "nx": 4, "nt": "x"}}"#).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("mesh"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
        let err = RunConfig::parse(r#"{"flux": {"alpah": 1.0}}"#).unwrap_err();
        assert!(format!("{err}").contains("alpah"));
    }

    #[test]
    fn flags_override_config() {
        let mut c = RunConfig::default();
        c.apply(&Overrides {
            p: Some(3),
            mesh: Some(MeshKind::Slab),
            seed: Some(7),
            ..Overrides::default()
        })
        .unwrap();
        assert_eq!((c.p, c.seed), (3, 7));
        assert!(matches!(c.mesh, MeshSpec::Slab { nx: 8, nt: 8, .. }));
        assert!(c
            .apply(&Overrides {
                zeta: Some(0.3),
                ..Overrides::default()
            })
            .is_err());
    }

    #[test]
    fn sampled_data_interpolates() {
        let s = [[0.0, 1.0], [1.0, 3.0]];
        assert_eq!(interpolate(&s, 0.5), 2.0);
        assert_eq!(interpolate(&s, -1.0), 1.0);
        assert_eq!(interpolate(&s, 2.0), 3.0);
    }
}
