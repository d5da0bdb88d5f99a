//! Concrete Carnot groups: the abelian group ℝⁿ and the Heisenberg group ℍⁿ.
//!
//! Points are stored in graded exponential coordinates, stratum by stratum.
//! For ℍⁿ the layout is `(x_1..x_n, y_1..y_n, t)` and the group law is
//!
//! ```text
//! (x, y, t)·(x', y', t') = (x + x', y + y', t + t' + 2 Σ_i (x'_i y_i − x_i y'_i))
//! ```
//!
//! whose left-invariant horizontal fields are `X_i = ∂x_i + 2y_i ∂t` and
//! `Y_i = ∂y_i − 2x_i ∂t`, so that `[X_i, Y_i] = −4T` with `T = ∂t`.
//! The homogeneous norm on ℍⁿ is the Korányi gauge
//! `ρ = ((|x|² + |y|²)² + t²)^{1/4}`; on ℝⁿ it is the Euclidean norm.

use std::fmt;
use std::ops::Deref;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{Estimate, Running};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    Abelian(usize),
    Heisenberg(usize),
}

/// A concrete Carnot group together with its grading data.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    kind: GroupKind,
    strata_dims: Vec<usize>,
    total_dim: usize,
    hom_dim: usize,
    triangle_constant: f64,
}

/// A point of the group in graded coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

/// Coordinate coefficients of the horizontal frame `X_1..X_{n₁}` at a point:
/// an `N × n₁` array, column `i` holding the components of `X_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    rows: usize,
    cols: usize,
    coeffs: Vec<f64>,
}

impl TangentFrame {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coefficient(&self, row: usize, col: usize) -> f64 {
        self.coeffs[row * self.cols + col]
    }

    /// Horizontal derivatives `X_i u` from the Euclidean gradient of `u`.
    pub fn apply(&self, euclidean_grad: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|i| (0..self.rows).map(|k| self.coefficient(k, i) * euclidean_grad[k]).sum())
            .collect()
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::Abelian(n) => write!(f, "R{n}"),
            GroupKind::Heisenberg(n) => write!(f, "H{n}"),
        }
    }
}

impl Group {
    pub fn new(kind: GroupKind) -> Result<Self> {
        match kind {
            GroupKind::Abelian(n) if n >= 1 => Ok(Group {
                kind,
                strata_dims: vec![n],
                total_dim: n,
                hom_dim: n,
                triangle_constant: 1.0,
            }),
            // The Korányi gauge satisfies the triangle inequality with c = 1
            // for this group law; `measure_triangle_constant` checks it.
            GroupKind::Heisenberg(n) if n >= 1 => Ok(Group {
                kind,
                strata_dims: vec![2 * n, 1],
                total_dim: 2 * n + 1,
                hom_dim: 2 * n + 2,
                triangle_constant: 1.0,
            }),
            _ => Err(Error::InvalidParameter(format!("group {kind} needs n >= 1"))),
        }
    }

    pub fn abelian(n: usize) -> Self {
        Self::new(GroupKind::Abelian(n)).expect("n >= 1")
    }

    pub fn heisenberg(n: usize) -> Self {
        Self::new(GroupKind::Heisenberg(n)).expect("n >= 1")
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn strata_dims(&self) -> &[usize] {
        &self.strata_dims
    }

    /// Topological dimension N.
    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Homogeneous dimension ν = Σ i·n_i.
    pub fn hom_dim(&self) -> usize {
        self.hom_dim
    }

    /// Dimension n₁ of the horizontal stratum.
    pub fn horizontal_dim(&self) -> usize {
        self.strata_dims[0]
    }

    pub fn triangle_constant(&self) -> f64 {
        self.triangle_constant
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self.kind, GroupKind::Abelian(_))
    }

    /// Stratum index (1-based) of coordinate `k`.
    pub fn degree_of(&self, k: usize) -> u32 {
        if k < self.strata_dims[0] {
            1
        } else {
            2
        }
    }

    pub fn identity(&self) -> Point {
        Point::zeros(self.total_dim)
    }

    pub fn check(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.total_dim {
            return Err(Error::DimensionMismatch { expected: self.total_dim, got: a.len() });
        }
        Ok(())
    }

    pub fn compose(&self, a: &[f64], b: &[f64]) -> Result<Point> {
        self.check(a)?;
        self.check(b)?;
        let mut out = vec![0.0; self.total_dim];
        self.compose_into(a, b, &mut out);
        Ok(Point(out))
    }

    /// Group law on raw slices; lengths must already be valid.
    pub fn compose_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for k in 0..self.total_dim {
            out[k] = a[k] + b[k];
        }
        if let GroupKind::Heisenberg(n) = self.kind {
            let mut twist = 0.0;
            for i in 0..n {
                // 2(x'_i y_i − x_i y'_i)
                twist += b[i] * a[n + i] - a[i] * b[n + i];
            }
            out[2 * n] += 2.0 * twist;
        }
    }

    /// Inverse element. In exponential coordinates this is negation for both groups.
    pub fn inverse(&self, a: &[f64]) -> Result<Point> {
        self.check(a)?;
        Ok(Point(a.iter().map(|x| -x).collect()))
    }

    pub fn dilate(&self, t: f64, a: &[f64]) -> Result<Point> {
        self.check(a)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {t}")));
        }
        let mut out = a.to_vec();
        self.dilate_in_place(t, &mut out);
        Ok(Point(out))
    }

    pub fn dilate_in_place(&self, t: f64, a: &mut [f64]) {
        let n1 = self.horizontal_dim();
        for (k, x) in a.iter_mut().enumerate() {
            if k >= n1 {
                *x *= t * t;
            } else {
                *x *= t;
            }
        }
    }

    /// Homogeneous norm ρ (Euclidean on ℝⁿ, Korányi on ℍⁿ).
    pub fn gauge_norm(&self, a: &[f64]) -> f64 {
        match self.kind {
            GroupKind::Abelian(_) => a.iter().map(|x| x * x).sum::<f64>().sqrt(),
            GroupKind::Heisenberg(n) => {
                let h: f64 = a[..2 * n].iter().map(|x| x * x).sum();
                let t = a[2 * n];
                (h * h + t * t).sqrt().sqrt()
            }
        }
    }

    /// Gauge quasimetric d(a, b) = ρ(a⁻¹·b).
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let inv: Vec<f64> = a.iter().map(|x| -x).collect();
        let mut w = vec![0.0; self.total_dim];
        self.compose_into(&inv, b, &mut w);
        self.gauge_norm(&w)
    }

    pub fn horizontal_frame(&self, a: &[f64]) -> Result<TangentFrame> {
        self.check(a)?;
        let rows = self.total_dim;
        let cols = self.horizontal_dim();
        let mut coeffs = vec![0.0; rows * cols];
        for i in 0..cols {
            coeffs[i * cols + i] = 1.0;
        }
        if let GroupKind::Heisenberg(n) = self.kind {
            let t_row = 2 * n;
            for i in 0..n {
                coeffs[t_row * cols + i] = 2.0 * a[n + i];
                coeffs[t_row * cols + n + i] = -2.0 * a[i];
            }
        }
        Ok(TangentFrame { rows, cols, coeffs })
    }

    /// Horizontal gradient from a Euclidean gradient at `a`, written into `out`.
    pub fn horizontal_from_euclidean(&self, a: &[f64], grad: &[f64], out: &mut [f64]) {
        match self.kind {
            GroupKind::Abelian(n) => out[..n].copy_from_slice(&grad[..n]),
            GroupKind::Heisenberg(n) => {
                let dt = grad[2 * n];
                for i in 0..n {
                    out[i] = grad[i] + 2.0 * a[n + i] * dt;
                    out[n + i] = grad[n + i] - 2.0 * a[i] * dt;
                }
            }
        }
    }

    /// Axis-aligned box containing the gauge ball B(center, r).
    pub fn ball_bounding_box(&self, center: &[f64], r: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = center.to_vec();
        let mut hi = center.to_vec();
        match self.kind {
            GroupKind::Abelian(_) => {
                lo.iter_mut().for_each(|x| *x -= r);
                hi.iter_mut().for_each(|x| *x += r);
            }
            GroupKind::Heisenberg(n) => {
                for k in 0..2 * n {
                    lo[k] -= r;
                    hi[k] += r;
                }
                // |t(c·w) − c_t| ≤ |w_t| + 2 Σ |w_x c_y| + |c_x w_y|
                let lever: f64 = center[..2 * n].iter().map(|c| c.abs()).sum();
                let dt = r * r + 2.0 * r * lever;
                lo[2 * n] -= dt;
                hi[2 * n] += dt;
            }
        }
        (lo, hi)
    }

    /// Monte Carlo estimate of the Haar (Lebesgue) volume of B(0, r).
    pub fn ball_volume<R: Rng + ?Sized>(&self, r: f64, samples: usize, rng: &mut R) -> Result<Estimate> {
        if samples == 0 {
            return Err(Error::InvalidParameter("ball_volume needs samples > 0".into()));
        }
        if !(r >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {r}")));
        }
        if r == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        let origin = self.identity();
        let (lo, hi) = self.ball_bounding_box(&origin, r);
        let box_vol: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
        let mut w = vec![0.0; self.total_dim];
        let mut acc = Running::default();
        for _ in 0..samples {
            for k in 0..self.total_dim {
                w[k] = rng.random_range(lo[k]..hi[k]);
            }
            acc.push(if self.gauge_norm(&w) <= r { 1.0 } else { 0.0 });
        }
        Ok(acc.estimate().scaled(box_vol))
    }

    /// Points of the unit gauge sphere: uniform draws from the shell
    /// `1/2 ≤ ρ ≤ 1`, projected along dilation orbits onto `ρ = 1`.
    pub fn sample_unit_sphere<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Point> {
        let origin = self.identity();
        let (lo, hi) = self.ball_bounding_box(&origin, 1.0);
        let mut out = Vec::with_capacity(count);
        let mut w = vec![0.0; self.total_dim];
        while out.len() < count {
            for k in 0..self.total_dim {
                w[k] = rng.random_range(lo[k]..hi[k]);
            }
            let rho = self.gauge_norm(&w);
            if (0.5..=1.0).contains(&rho) {
                let mut s = w.clone();
                self.dilate_in_place(1.0 / rho, &mut s);
                out.push(Point(s));
            }
        }
        out
    }

    /// Largest observed ρ(a·b) / (ρ(a) + ρ(b)) over random pairs drawn
    /// uniformly from the gauge unit ball's bounding box.
    pub fn measure_triangle_constant<R: Rng + ?Sized>(&self, pairs: usize, rng: &mut R) -> f64 {
        let origin = self.identity();
        let (lo, hi) = self.ball_bounding_box(&origin, 1.0);
        let n = self.total_dim;
        let (mut a, mut b, mut ab) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            for k in 0..n {
                a[k] = rng.random_range(lo[k]..hi[k]);
                b[k] = rng.random_range(lo[k]..hi[k]);
            }
            let denom = self.gauge_norm(&a) + self.gauge_norm(&b);
            if denom > 0.0 {
                self.compose_into(&a, &b, &mut ab);
                worst = worst.max(self.gauge_norm(&ab) / denom);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn h1() -> Group {
        Group::heisenberg(1)
    }

    #[test]
    fn descriptor_dimensions() {
        let r3 = Group::abelian(3);
        assert_eq!((r3.total_dim(), r3.hom_dim()), (3, 3));
        let h2 = Group::heisenberg(2);
        assert_eq!(h2.strata_dims(), &[4, 1]);
        assert_eq!((h2.total_dim(), h2.hom_dim()), (5, 6));
        assert!(Group::new(GroupKind::Heisenberg(0)).is_err());
    }

    #[test]
    fn compose_examples() {
        let g = h1();
        assert_eq!(&*g.compose(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(&*g.compose(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), &[1.0, 1.0, -2.0]);
        let r2 = Group::abelian(2);
        assert_eq!(&*r2.compose(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), &[4.0, 6.0]);
        assert!(matches!(
            g.compose(&[1.0, 2.0], &[0.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn inverse_examples() {
        let g = h1();
        let a = [1.0, 2.0, 3.0];
        let inv = g.inverse(&a).unwrap();
        assert_eq!(&*inv, &[-1.0, -2.0, -3.0]);
        assert_eq!(&*g.compose(&a, &inv).unwrap(), &[0.0, 0.0, 0.0]);
        assert_eq!(&*g.inverse(&[0.0; 3]).unwrap(), &[0.0; 3]);
        let r3 = Group::abelian(3);
        assert_eq!(&*r3.inverse(&[1.0, 1.0, 1.0]).unwrap(), &[-1.0, -1.0, -1.0]);
    }

    #[test]
    fn dilation_examples() {
        let g = h1();
        assert_eq!(&*g.dilate(2.0, &[1.0, 1.0, 1.0]).unwrap(), &[2.0, 2.0, 4.0]);
        assert_eq!(&*g.dilate(1.0, &[0.3, -0.2, 0.7]).unwrap(), &[0.3, -0.2, 0.7]);
        assert_eq!(&*Group::abelian(2).dilate(3.0, &[1.0, 0.0]).unwrap(), &[3.0, 0.0]);
        assert!(g.dilate(0.0, &[1.0, 1.0, 1.0]).is_err());
        assert!(g.dilate(-1.0, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn gauge_examples() {
        let g = h1();
        assert_eq!(g.gauge_norm(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(g.gauge_norm(&[1.0, 0.0, 0.0]), 1.0);
        let a = [1.0, 1.0, 1.0];
        let da = g.dilate(2.0, &a).unwrap();
        assert!((g.gauge_norm(&da) - 2.0 * g.gauge_norm(&a)).abs() < 1e-14);
        // ((1+1)² + 1)^{1/4} = 5^{1/4}
        assert!((g.gauge_norm(&a) - 5f64.powf(0.25)).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let g = h1();
        let a = [0.4, -1.0, 2.0];
        let b = [1.5, 0.25, -0.5];
        assert_eq!(g.distance(&a, &a), 0.0);
        let da = g.dilate(2.0, &a).unwrap();
        let db = g.dilate(2.0, &b).unwrap();
        assert!((g.distance(&da, &db) - 2.0 * g.distance(&a, &b)).abs() < 1e-13);
        let r2 = Group::abelian(2);
        assert!((r2.distance(&[0.0, 0.0], &[3.0, 4.0]) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn frame_examples() {
        let g = h1();
        let f0 = g.horizontal_frame(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!((f0.rows(), f0.cols()), (3, 2));
        assert_eq!(
            [f0.coefficient(0, 0), f0.coefficient(0, 1), f0.coefficient(1, 0), f0.coefficient(1, 1)],
            [1.0, 0.0, 0.0, 1.0]
        );
        assert_eq!([f0.coefficient(2, 0), f0.coefficient(2, 1)], [0.0, 0.0]);
        let f = g.horizontal_frame(&[1.0, 2.0, 0.0]).unwrap();
        assert_eq!([f.coefficient(2, 0), f.coefficient(2, 1)], [4.0, -2.0]);
        let r2 = Group::abelian(2).horizontal_frame(&[5.0, -3.0]).unwrap();
        assert_eq!(r2.apply(&[0.25, 0.5]), vec![0.25, 0.5]);
    }

    #[test]
    fn frame_is_left_translate_of_identity_frame() {
        // X_i(a) = d/ds [a·(s e_i)] at s = 0, checked by central differences.
        let g = Group::heisenberg(2);
        let a = [0.3, -0.7, 1.1, 0.2, -0.4];
        let frame = g.horizontal_frame(&a).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut e = vec![0.0; 5];
            e[i] = h;
            let plus = g.compose(&a, &e).unwrap();
            e[i] = -h;
            let minus = g.compose(&a, &e).unwrap();
            for k in 0..5 {
                let fd = (plus[k] - minus[k]) / (2.0 * h);
                assert!((fd - frame.coefficient(k, i)).abs() < 1e-8, "X_{i} row {k}");
            }
        }
    }

    #[test]
    fn ball_volume_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r2 = Group::abelian(2);
        let disk = r2.ball_volume(1.0, 200_000, &mut rng).unwrap();
        assert!((disk.value - std::f64::consts::PI).abs() < 5.0 * disk.std_error);
        assert_eq!(r2.ball_volume(0.0, 10, &mut rng).unwrap().value, 0.0);
        assert!(r2.ball_volume(1.0, 0, &mut rng).is_err());
        // Korányi unit ball: ∫_{-1}^{1} π sqrt(1 − t²) dt = π²/2.
        let h = h1().ball_volume(1.0, 200_000, &mut rng).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 2.0;
        assert!((h.value - exact).abs() < 5.0 * h.std_error, "{h:?} vs {exact}");
    }

    #[test]
    fn unit_sphere_samples_have_unit_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [h1(), Group::abelian(3)] {
            for p in g.sample_unit_sphere(64, &mut rng) {
                assert!((g.gauge_norm(&p) - 1.0).abs() < 1e-12);
            }
        }
    }
}
