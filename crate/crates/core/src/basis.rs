//! Polynomial Trefftz spaces built from polynomial waves.
//!
//! On an element with centroid (x_K, t_K), diameter h_K and speed c the local
//! space of degree p is spanned by the 2p + 2 fields
//!
//! ```text
//! w = c s_d^k,   τ = d s_d^k,   s_d = (d (x - x_K) - c (t - t_K)) / h_K
//! ```
//!
//! for d ∈ {+1, -1} and k = 0..=p. Each field solves
//! ∂_x w + ∂_t τ = 0 and ∂_x τ + c⁻² ∂_t w = 0 exactly.

use nalgebra::DMatrix;
use rand::Rng;

use crate::mesh::{Element, Mesh, SpaceTimePoint};
use crate::quadrature::{element_rule, QuadratureError};

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Dimension of the local polynomial Trefftz space in `n` space dimensions.
pub fn basis_dim(n: usize, p: usize) -> usize {
    assert!(n >= 1, "space dimension must be at least 1");
    let (n, p) = (n as u64, p as u64);
    let num = binomial(p + n, n) * (2 * p + n + 2) as u128;
    debug_assert_eq!(num % (p + 1) as u128, 0);
    (num / (p + 1) as u128 - 1) as usize
}

/// Dimension of the full space of (1 + n)-vector polynomials of degree p in n + 1 variables.
pub fn full_poly_dim(n: usize, p: usize) -> usize {
    let (n, p) = (n as u64, p as u64);
    (binomial(p + n, n) * (p + n + 1) as u128) as usize
}

/// Propagation direction of a 1D polynomial wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Self::Right => 1.0,
            Self::Left => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyWave {
    pub direction: Direction,
    pub degree: usize,
    pub anchor: SpaceTimePoint,
    pub scale: f64,
    pub wave_speed: f64,
}

impl PolyWave {
    fn phase(&self, p: SpaceTimePoint) -> f64 {
        (self.direction.sign() * (p.x - self.anchor.x) - self.wave_speed * (p.t - self.anchor.t)) / self.scale
    }

    /// (w, τ) at `p`.
    pub fn eval(&self, p: SpaceTimePoint) -> (f64, f64) {
        let s = self.phase(p).powi(self.degree as i32);
        (self.wave_speed * s, self.direction.sign() * s)
    }

    /// Exact partial derivatives ((∂_x w, ∂_t w), (∂_x τ, ∂_t τ)).
    pub fn gradient(&self, p: SpaceTimePoint) -> ((f64, f64), (f64, f64)) {
        if self.degree == 0 {
            return ((0.0, 0.0), (0.0, 0.0));
        }
        let k = self.degree as f64;
        let ds = k * self.phase(p).powi(self.degree as i32 - 1);
        let (d, c, h) = (self.direction.sign(), self.wave_speed, self.scale);
        let (sx, st) = (d / h, -c / h);
        ((c * ds * sx, c * ds * st), (d * ds * sx, d * ds * st))
    }
}

/// Local Trefftz basis of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct TrefftzBasis {
    pub element: usize,
    pub degree: usize,
    pub waves: Vec<PolyWave>,
}

impl TrefftzBasis {
    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    pub fn wave_speed(&self) -> f64 {
        self.waves[0].wave_speed
    }

    /// Values of every basis field at `p`, written into `out` as (w, τ) pairs.
    pub fn eval_into(&self, p: SpaceTimePoint, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let first = &self.waves[0];
        let c = first.wave_speed;
        for direction in [Direction::Right, Direction::Left] {
            let d = direction.sign();
            let s = (d * (p.x - first.anchor.x) - c * (p.t - first.anchor.t)) / first.scale;
            let mut pow = 1.0;
            for _ in 0..=self.degree {
                out.push((c * pow, d * pow));
                pow *= s;
            }
        }
    }

    /// Combination Σ coeffs[i] · field_i at `p`.
    pub fn eval_combination(&self, coeffs: &[f64], p: SpaceTimePoint) -> (f64, f64) {
        let mut buf = Vec::with_capacity(self.len());
        self.eval_into(p, &mut buf);
        buf.iter()
            .zip(coeffs)
            .fold((0.0, 0.0), |(w, tau), ((bw, bt), a)| (w + a * bw, tau + a * bt))
    }

    /// L² Gram matrix ∫_K (w_i w_j / c² + τ_i τ_j) by volume quadrature.
    pub fn gram_matrix(&self, element: &Element, vertices: &[SpaceTimePoint]) -> Result<DMatrix<f64>, QuadratureError> {
        let rule = element_rule(element, vertices, 2 * self.degree)?;
        let n = self.len();
        let c2 = self.wave_speed().powi(2);
        let mut gram = DMatrix::zeros(n, n);
        let mut buf = Vec::with_capacity(n);
        for (p, wt) in rule.iter() {
            self.eval_into(p, &mut buf);
            for i in 0..n {
                for j in 0..n {
                    gram[(i, j)] += wt * (buf[i].0 * buf[j].0 / c2 + buf[i].1 * buf[j].1);
                }
            }
        }
        Ok(gram)
    }
}

/// Builds the degree-`p` polynomial-wave basis of `element`.
///
/// Ordering: direction +1 with k = 0..=p, then direction -1 with k = 0..=p.
pub fn build_basis(element: &Element, p: usize) -> TrefftzBasis {
    let waves = [Direction::Right, Direction::Left]
        .into_iter()
        .flat_map(|direction| {
            (0..=p).map(move |degree| PolyWave {
                direction,
                degree,
                anchor: element.centroid,
                scale: element.diameter,
                wave_speed: element.wave_speed,
            })
        })
        .collect();
    TrefftzBasis {
        element: element.id,
        degree: p,
        waves,
    }
}

pub fn build_bases(mesh: &Mesh, p: usize) -> Vec<TrefftzBasis> {
    mesh.elements.iter().map(|e| build_basis(e, p)).collect()
}

/// Values of all basis fields at `p`.
pub fn eval_basis(basis: &TrefftzBasis, p: SpaceTimePoint) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(basis.len());
    basis.eval_into(p, &mut out);
    out
}

/// Numerical rank and 2-norm condition number of a symmetric positive semidefinite matrix.
pub fn rank_and_condition(matrix: &DMatrix<f64>, rel_tol: f64) -> (usize, f64) {
    let sv = matrix.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let rank = sv.iter().filter(|&&s| s > rel_tol * max).count();
    (rank, max / min)
}

/// Largest finite-difference residual of the first-order wave system over
/// `samples` random points inside `element`.
///
/// Derivatives use a fourth-order central stencil with step 1e-3 h_K.
pub fn trefftz_residual<F, R>(field: F, element: &Element, vertices: &[SpaceTimePoint], samples: usize, rng: &mut R) -> f64
where
    F: Fn(SpaceTimePoint) -> (f64, f64),
    R: Rng + ?Sized,
{
    let pts: Vec<_> = element.vertices.iter().map(|&v| vertices[v]).collect();
    let c = element.wave_speed;
    let step = 1e-3 * element.diameter;
    let deriv = |p: SpaceTimePoint, dx: f64, dt: f64| {
        let at = |k: f64| field(SpaceTimePoint::new(p.x + k * dx, p.t + k * dt));
        let (a1, a2, m1, m2) = (at(1.0), at(2.0), at(-1.0), at(-2.0));
        let d = |f: fn(&(f64, f64)) -> f64| (8.0 * (f(&a1) - f(&m1)) - (f(&a2) - f(&m2))) / (12.0 * step);
        (d(|v| v.0), d(|v| v.1))
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        // Random point in a random fan triangle around the centroid.
        let i = rng.random_range(0..pts.len());
        let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let o = element.centroid;
        let p = SpaceTimePoint::new(
            o.x + u * (a.x - o.x) + v * (b.x - o.x),
            o.t + u * (a.t - o.t) + v * (b.t - o.t),
        );
        let (wx, taux) = deriv(p, step, 0.0);
        let (wt, taut) = deriv(p, 0.0, step);
        worst = worst.max((wx + taut).abs() + (taux + wt / (c * c)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_slab_mesh, BoundaryKind, BoundarySegment};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_element(c: f64) -> (Mesh, Element) {
        let mesh = build_slab_mesh(
            &[-0.5, 0.5],
            &[0.0, 1.0],
            &[c],
            &BoundarySegment::both(BoundaryKind::Robin, 1.0),
        )
        .unwrap();
        let el = mesh.elements[0].clone();
        (mesh, el)
    }

    #[test]
    fn dimension_formulas() {
        assert_eq!(basis_dim(1, 2), 6);
        assert_eq!(basis_dim(1, 0), 2);
        assert_eq!(basis_dim(2, 1), 8);
        assert_eq!(full_poly_dim(1, 2), 12);
        assert_eq!(full_poly_dim(1, 0), 2);
        assert_eq!(full_poly_dim(2, 1), 12);
        for p in 0..=10 {
            assert_eq!(basis_dim(1, p), 2 * p + 2);
        }
    }

    #[test]
    fn trefftz_space_is_asymptotically_smaller() {
        for n in 1..=3 {
            let ratios: Vec<f64> = (1..=30).map(|p| basis_dim(n, p) as f64 / full_poly_dim(n, p) as f64).collect();
            assert!(ratios.windows(2).all(|w| w[1] <= w[0] + 1e-15), "n={n}: {ratios:?}");
            assert!(ratios[29] < 0.1);
        }
    }

    #[test]
    fn constant_fields_span_constants() {
        let (_, el) = unit_element(2.0);
        let basis = build_basis(&el, 0);
        let vals = eval_basis(&basis, SpaceTimePoint::new(0.1, 0.3));
        assert_eq!(vals, vec![(2.0, 1.0), (2.0, -1.0)]);
        // (1, 0) = (b0 + b1) / (2c), (0, 1) = (b0 - b1) / 2
        let e1 = ((vals[0].0 + vals[1].0) / 4.0, (vals[0].1 + vals[1].1) / 4.0);
        let e2 = ((vals[0].0 - vals[1].0) / 2.0, (vals[0].1 - vals[1].1) / 2.0);
        assert_eq!(e1, (1.0, 0.0));
        assert_eq!(e2, (0.0, 1.0));
    }

    #[test]
    fn degree_one_wave_by_hand() {
        let wave = PolyWave {
            direction: Direction::Right,
            degree: 1,
            anchor: SpaceTimePoint::new(0.0, 0.0),
            scale: 1.0,
            wave_speed: 1.0,
        };
        assert_eq!(wave.eval(SpaceTimePoint::new(2.0, 1.0)), (1.0, 1.0));
        let (v, s) = wave.eval(SpaceTimePoint::new(0.7, 0.2));
        assert!((v - 0.5).abs() < 1e-15 && (s - 0.5).abs() < 1e-15);
    }

    #[test]
    fn basis_length_matches_dimension() {
        let (_, el) = unit_element(1.0);
        for p in 0..=10 {
            assert_eq!(build_basis(&el, p).len(), basis_dim(1, p));
        }
    }

    #[test]
    fn analytic_gradients_satisfy_trefftz_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 0..=6 {
            for &c in &[0.5, 1.0, 3.0] {
                let (_, el) = unit_element(c);
                for wave in build_basis(&el, p).waves {
                    let pt = SpaceTimePoint::new(rng.random_range(-0.5..0.5), rng.random_range(0.0..1.0));
                    let ((wx, wt), (tx, tt)) = wave.gradient(pt);
                    assert!((wx + tt).abs() < 1e-13);
                    assert!((tx + wt / (c * c)).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn finite_difference_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mesh, el) = unit_element(1.5);
        for wave in build_basis(&el, 5).waves {
            let r = trefftz_residual(|p| wave.eval(p), &el, &mesh.vertices, 20, &mut rng);
            assert!(r <= 1e-8, "residual {r}");
        }
        // (x², 0) violates ∂_x w + ∂_t τ = 0 by 2x.
        let r = trefftz_residual(|p| (p.x * p.x, 0.0), &el, &mesh.vertices, 50, &mut rng);
        assert!(r > 0.1);
        let x = 0.4;
        let single = trefftz_residual(
            |p| (p.x * p.x, 0.0),
            &Element {
                centroid: SpaceTimePoint::new(x, 0.5),
                diameter: 1e-6,
                ..el.clone()
            },
            &[SpaceTimePoint::new(x, 0.5); 4],
            1,
            &mut rng,
        );
        assert_abs_diff_eq!(single, 2.0 * x, epsilon = 1e-6);
        // Smooth wave from an arbitrary profile f(x - ct).
        let c = el.wave_speed;
        let r = trefftz_residual(
            |p| {
                let f = (3.0 * (p.x - c * p.t)).sin() + (p.x - c * p.t).exp();
                (c * f, f)
            },
            &el,
            &mesh.vertices,
            50,
            &mut rng,
        );
        assert!(r <= 1e-6, "smooth wave residual {r}");
    }

    #[test]
    fn gram_matrix_has_full_rank() {
        let (mesh, el) = unit_element(1.0);
        for p in 0..=10 {
            let basis = build_basis(&el, p);
            let gram = basis.gram_matrix(&el, &mesh.vertices).unwrap();
            let (rank, cond) = rank_and_condition(&gram, 1e-13);
            assert_eq!(rank, 2 * p + 2, "p={p} cond={cond:e}");
            assert!(cond.is_finite());
        }
    }
}
