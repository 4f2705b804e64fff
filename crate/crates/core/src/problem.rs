//! Problem data and manufactured exact solutions of the first-order wave system.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A boundary point handed to boundary-data callbacks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub x: f64,
    pub t: f64,
    /// Outward normal of the spatial domain (±1).
    pub normal_x: f64,
    pub wave_speed: f64,
    /// Impedance θ of the face (only meaningful on Robin faces).
    pub theta: f64,
}

pub type InitialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type BoundaryFn = Arc<dyn Fn(&BoundaryPoint) -> f64 + Send + Sync>;

/// Initial data v₀, σ₀ and boundary data g_D, g_N, g_R.
#[derive(Clone)]
pub struct ProblemData {
    pub v0: InitialFn,
    pub sigma0: InitialFn,
    pub g_dirichlet: BoundaryFn,
    pub g_neumann: BoundaryFn,
    pub g_robin: BoundaryFn,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData").finish_non_exhaustive()
    }
}

impl ProblemData {
    pub fn zero() -> Self {
        Self {
            v0: Arc::new(|_| 0.0),
            sigma0: Arc::new(|_| 0.0),
            g_dirichlet: Arc::new(|_| 0.0),
            g_neumann: Arc::new(|_| 0.0),
            g_robin: Arc::new(|_| 0.0),
        }
    }

    /// Nonzero initial data with homogeneous boundary data.
    pub fn homogeneous<V, S>(v0: V, sigma0: S) -> Self
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            v0: Arc::new(v0),
            sigma0: Arc::new(sigma0),
            ..Self::zero()
        }
    }

    /// Data consistent with an exact solution on any boundary split:
    /// g_D = v, g_N = σ n, g_R = (θ/c) v − σ n.
    pub fn from_exact(exact: Arc<dyn ExactSolution>) -> Self {
        let (e0, e1, e2, e3, e4) = (exact.clone(), exact.clone(), exact.clone(), exact.clone(), exact);
        Self {
            v0: Arc::new(move |x| e0.eval(x, 0.0).0),
            sigma0: Arc::new(move |x| e1.eval(x, 0.0).1),
            g_dirichlet: Arc::new(move |b| e2.eval(b.x, b.t).0),
            g_neumann: Arc::new(move |b| e3.eval(b.x, b.t).1 * b.normal_x),
            g_robin: Arc::new(move |b| {
                let (v, s) = e4.eval(b.x, b.t);
                b.theta / b.wave_speed * v - s * b.normal_x
            }),
        }
    }
}

/// Smooth solution (v, σ) of ∂_x v + ∂_t σ = 0, ∂_x σ + c⁻² ∂_t v = 0 with constant c.
pub trait ExactSolution: Send + Sync {
    fn eval(&self, x: f64, t: f64) -> (f64, f64);
    fn wave_speed(&self) -> f64;
    fn name(&self) -> String;
}

/// v = −ck cos(k(x − ct)), σ = −k cos(k(x − ct)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TravelingSine {
    pub wave_number: f64,
    pub wave_speed: f64,
}

impl ExactSolution for TravelingSine {
    fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let (k, c) = (self.wave_number, self.wave_speed);
        let cos = (k * (x - c * t)).cos();
        (-c * k * cos, -k * cos)
    }
    fn wave_speed(&self) -> f64 {
        self.wave_speed
    }
    fn name(&self) -> String {
        format!("traveling_sine(k={})", self.wave_number)
    }
}

/// v = c (dx − ct)^m, σ = d (dx − ct)^m: lies in every local space of degree ≥ m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyWaveSolution {
    pub degree: u32,
    pub direction: f64,
    pub wave_speed: f64,
}

impl ExactSolution for PolyWaveSolution {
    fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let s = (self.direction * x - self.wave_speed * t).powi(self.degree as i32);
        (self.wave_speed * s, self.direction * s)
    }
    fn wave_speed(&self) -> f64 {
        self.wave_speed
    }
    fn name(&self) -> String {
        format!("poly_wave(m={}, d={})", self.degree, self.direction)
    }
}

/// Separated solution from U = sin(kx) sin(ckt): v = ck sin(kx) cos(ckt), σ = −k cos(kx) sin(ckt).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standing {
    pub wave_number: f64,
    pub wave_speed: f64,
}

impl ExactSolution for Standing {
    fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let (k, c) = (self.wave_number, self.wave_speed);
        (
            c * k * (k * x).sin() * (c * k * t).cos(),
            -k * (k * x).cos() * (c * k * t).sin(),
        )
    }
    fn wave_speed(&self) -> f64 {
        self.wave_speed
    }
    fn name(&self) -> String {
        format!("standing(k={})", self.wave_number)
    }
}

/// Sum of two exact solutions with the same wave speed.
pub struct Superposition(pub Arc<dyn ExactSolution>, pub Arc<dyn ExactSolution>);

impl ExactSolution for Superposition {
    fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let (a, b) = (self.0.eval(x, t), self.1.eval(x, t));
        (a.0 + b.0, a.1 + b.1)
    }
    fn wave_speed(&self) -> f64 {
        self.0.wave_speed()
    }
    fn name(&self) -> String {
        format!("{} + {}", self.0.name(), self.1.name())
    }
}

/// Serializable selection of a named exact solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum NamedSolution {
    TravelingSine {
        #[serde(default = "two_pi")]
        k: f64,
    },
    PolyWave {
        m: u32,
        #[serde(default = "plus_one")]
        d: f64,
    },
    Standing {
        #[serde(default = "two_pi")]
        k: f64,
    },
}

fn two_pi() -> f64 {
    2.0 * PI
}

fn plus_one() -> f64 {
    1.0
}

impl NamedSolution {
    pub fn build(&self, wave_speed: f64) -> Arc<dyn ExactSolution> {
        match *self {
            Self::TravelingSine { k } => Arc::new(TravelingSine {
                wave_number: k,
                wave_speed,
            }),
            Self::PolyWave { m, d } => Arc::new(PolyWaveSolution {
                degree: m,
                direction: d.signum(),
                wave_speed,
            }),
            Self::Standing { k } => Arc::new(Standing {
                wave_number: k,
                wave_speed,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(sol: &dyn ExactSolution, x: f64, t: f64) -> f64 {
        let h = 1e-4;
        let c = sol.wave_speed();
        let dx = |i: usize| (sol_comp(sol, x + h, t, i) - sol_comp(sol, x - h, t, i)) / (2.0 * h);
        let dt = |i: usize| (sol_comp(sol, x, t + h, i) - sol_comp(sol, x, t - h, i)) / (2.0 * h);
        (dx(0) + dt(1)).abs() + (dx(1) + dt(0) / (c * c)).abs()
    }

    fn sol_comp(sol: &dyn ExactSolution, x: f64, t: f64, i: usize) -> f64 {
        let (v, s) = sol.eval(x, t);
        if i == 0 {
            v
        } else {
            s
        }
    }

    #[test]
    fn named_solutions_solve_the_wave_system() {
        let sols: Vec<Arc<dyn ExactSolution>> = vec![
            NamedSolution::TravelingSine { k: 3.0 }.build(1.3),
            NamedSolution::PolyWave { m: 3, d: -1.0 }.build(0.7),
            NamedSolution::Standing { k: 2.0 }.build(2.0),
        ];
        for s in &sols {
            for &(x, t) in &[(0.1, 0.2), (0.7, 0.9), (0.45, 0.05)] {
                assert!(residual(s.as_ref(), x, t) < 1e-6, "{}", s.name());
            }
        }
    }

    #[test]
    fn boundary_data_is_consistent() {
        let exact = NamedSolution::Standing { k: 1.5 }.build(2.0);
        let data = ProblemData::from_exact(exact.clone());
        let b = BoundaryPoint {
            x: 1.0,
            t: 0.3,
            normal_x: 1.0,
            wave_speed: 2.0,
            theta: 0.5,
        };
        let (v, s) = exact.eval(1.0, 0.3);
        assert_eq!((data.g_dirichlet)(&b), v);
        assert_eq!((data.g_neumann)(&b), s);
        assert!(((data.g_robin)(&b) - (0.25 * v - s)).abs() < 1e-15);
    }

    #[test]
    fn named_solution_config_parses() {
        let s: NamedSolution = serde_json::from_str(r#"{"name": "poly_wave", "m": 2}"#).unwrap();
        assert_eq!(s, NamedSolution::PolyWave { m: 2, d: 1.0 });
        let s: NamedSolution = serde_json::from_str(r#"{"name": "traveling_sine"}"#).unwrap();
        assert_eq!(s, NamedSolution::TravelingSine { k: 2.0 * PI });
    }
}
