//! Horizontal calculus on grids and mappings: gradients, energies,
//! Jacobians, local and integral distortion, change of variables.

use nalgebra::DMatrix;
use num_rational::Ratio;
use rand::Rng;
use serde::Serialize;

use crate::discrete::SimplexEnergy;
use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, GridFunction, Region};
use crate::group::{Group, GroupKind};
use crate::mapping::{count_preimages_in, image_bounding_box, Mapping};
use crate::report::VerificationReport;
use crate::stats::Running;

/// Horizontal gradient sampled at grid nodes, `n₁` components per node.
#[derive(Debug, Clone)]
pub struct HorizontalGradient {
    n1: usize,
    values: Vec<f64>,
}

impl HorizontalGradient {
    pub fn components(&self) -> usize {
        self.n1
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.values[node * self.n1..(node + 1) * self.n1]
    }

    pub fn node_count(&self) -> usize {
        self.values.len() / self.n1
    }
}

/// ∇_H u at every node: the frame applied to central differences, with
/// second-order one-sided differences on the boundary.
pub fn horizontal_gradient(g: &Group, u: &GridFunction) -> Result<HorizontalGradient> {
    let grid = u.grid();
    let d = grid.dim();
    if d != g.total_dim() {
        return Err(Error::DimensionMismatch { expected: g.total_dim(), got: d });
    }
    if let Some(&c) = grid.cells().iter().find(|&&c| c < 3) {
        return Err(Error::InvalidParameter(format!("horizontal_gradient needs resolution >= 3, got {c}")));
    }
    let n1 = g.horizontal_dim();
    let vals = u.values();
    let strides = grid.strides();
    let h = grid.spacings();
    let mut out = vec![0.0; grid.node_count() * n1];
    let mut multi = vec![0; d];
    let mut x = vec![0.0; d];
    let mut du = vec![0.0; d];
    for i in 0..grid.node_count() {
        grid.node_multi(i, &mut multi);
        grid.node_coords(i, &mut x);
        for k in 0..d {
            let s = strides[k];
            let last = grid.cells()[k];
            du[k] = if multi[k] == 0 {
                (-3.0 * vals[i] + 4.0 * vals[i + s] - vals[i + 2 * s]) / (2.0 * h[k])
            } else if multi[k] == last {
                (3.0 * vals[i] - 4.0 * vals[i - s] + vals[i - 2 * s]) / (2.0 * h[k])
            } else {
                (vals[i + s] - vals[i - s]) / (2.0 * h[k])
            };
        }
        g.horizontal_from_euclidean(&x, &du, &mut out[i * n1..(i + 1) * n1]);
    }
    Ok(HorizontalGradient { n1, values: out })
}

/// ∫_mask |∇_H u|^p, with the gradient of the piecewise-linear interpolant
/// on Kuhn simplices and cells weighted by their mask coverage.
pub fn p_energy(g: &Group, u: &GridFunction, p: f64, mask: &Region) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("energy exponent must be >= 1, got {p}")));
    }
    if u.grid().dim() != g.total_dim() {
        return Err(Error::DimensionMismatch { expected: g.total_dim(), got: u.grid().dim() });
    }
    let weights = u.grid().cell_coverage(mask);
    let energy = SimplexEnergy::new(g, u.grid(), &weights, |_| true);
    Ok(energy.evaluate(u.values(), p, 0.0, None, None))
}

/// J(x, f) from the horizontal block.
///
/// On ℍⁿ a contact differential satisfies `Mᵀ Ω M = λ Ω` for the standard
/// symplectic Ω, and λ is the induced action on the centre, so
/// `J = det M · λ`. On ℍ¹ every 2×2 matrix qualifies with λ = det M.
pub fn jacobian_from_hdiff(g: &Group, m: &DMatrix<f64>) -> Result<f64> {
    let n1 = g.horizontal_dim();
    if m.nrows() != n1 || m.ncols() != n1 {
        return Err(Error::DimensionMismatch { expected: n1, got: m.nrows().max(m.ncols()) });
    }
    let det = m.determinant();
    match g.kind() {
        GroupKind::Abelian(_) => Ok(det),
        GroupKind::Heisenberg(n) => {
            let mut omega = DMatrix::<f64>::zeros(n1, n1);
            for i in 0..n {
                omega[(i, n + i)] = 1.0;
                omega[(n + i, i)] = -1.0;
            }
            let s = m.transpose() * &omega * m;
            let lambda = s[(0, n)];
            let defect = (&s - &omega * lambda).abs().max();
            let scale = m.abs().max().powi(2).max(f64::MIN_POSITIVE);
            if defect > 1e-9 * scale {
                return Err(Error::Unsupported(format!(
                    "horizontal differential is not a symplectic similitude (defect {defect:e})"
                )));
            }
            Ok(det * lambda)
        }
    }
}

/// |D_H f|: the spectral norm, since the gauge is Euclidean on V₁.
pub fn operator_norm_horizontal(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// K_p(x, f) = |D_H f(x)| / J(x, f)^{1/p}.
pub fn local_distortion(f: &dyn Mapping, x: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("distortion exponent must be >= 1, got {p}")));
    }
    let m = f.hdiff(x);
    let j = jacobian_from_hdiff(f.group(), &m)?;
    let norm = operator_norm_horizontal(&m);
    distortion_from_parts(norm, j, p, x)
}

fn distortion_from_parts(norm: f64, j: f64, p: f64, x: &[f64]) -> Result<f64> {
    if j.is_nan() || norm.is_nan() {
        return Err(Error::NonIntegrable(format!("undefined differential at {x:?}")));
    }
    if j < 0.0 {
        return Err(Error::NegativeJacobian { jacobian: j, point: x.to_vec() });
    }
    if j == 0.0 {
        return Ok(if norm == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(norm / j.powf(1.0 / p))
}

/// 1/κ = 1/q − 1/p as an exact fraction of the rational readings of p, q.
pub fn inverse_kappa(p: f64, q: f64) -> Result<Ratio<i64>> {
    let rp = Ratio::<i64>::approximate_float(p)
        .ok_or_else(|| Error::InvalidParameter(format!("exponent {p} has no rational reading")))?;
    let rq = Ratio::<i64>::approximate_float(q)
        .ok_or_else(|| Error::InvalidParameter(format!("exponent {q} has no rational reading")))?;
    Ok(rq.recip() - rp.recip())
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionReport {
    pub p: f64,
    pub q: f64,
    /// `f64::INFINITY` when p = q
    pub kappa: f64,
    #[serde(skip)]
    pub inv_kappa: Ratio<i64>,
    #[serde(skip)]
    pub field: GridFunction,
    pub coefficient: f64,
    /// nodes (p = q) or cells (p > q) that entered the quadrature
    pub samples: usize,
    /// measure of the quadrature support
    pub measure: f64,
}

/// K_{p,q}(f; Ω) = ‖K_p(·, f) | L_κ(Ω)‖ on the domain's grid. For p = q the
/// essential supremum is proxied by the maximum over nodes in the mask.
pub fn distortion_coefficient(f: &dyn Mapping, domain: &Domain, p: f64, q: f64) -> Result<DistortionReport> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    if q > p {
        return Err(Error::Precondition(format!("distortion coefficient needs q <= p, got p={p}, q={q}")));
    }
    let inv_kappa = inverse_kappa(p, q)?;
    let grid = domain.grid();
    let d = grid.dim();
    let mut x = vec![0.0; d];
    let mut values = vec![0.0; grid.node_count()];
    let mut nodes = 0;
    for (i, v) in values.iter_mut().enumerate() {
        grid.node_coords(i, &mut x);
        if !domain.region().contains(&x) {
            continue;
        }
        let k = local_distortion(f, &x, p)?;
        if !k.is_finite() {
            return Err(Error::InfiniteDistortion { point: x.clone() });
        }
        *v = k;
        nodes += 1;
    }
    let field = GridFunction::new(grid.clone(), values)?;

    if p == q {
        let coefficient = field.values().iter().cloned().fold(0.0, f64::max);
        return Ok(DistortionReport {
            p,
            q,
            kappa: f64::INFINITY,
            inv_kappa,
            field,
            coefficient,
            samples: nodes,
            measure: f64::NAN,
        });
    }

    let kappa = 1.0 / (1.0 / q - 1.0 / p);
    let coverage = grid.cell_coverage(domain.region());
    let vol = grid.cell_volume();
    let h = grid.spacings();
    let mut sum = 0.0;
    let mut measure = 0.0;
    let mut cells = 0;
    for (c, &w) in coverage.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        grid.node_coords(grid.cell_corner(c), &mut x);
        for k in 0..d {
            x[k] += 0.5 * h[k];
        }
        let k = local_distortion(f, &x, p)?;
        if !k.is_finite() {
            return Err(Error::InfiniteDistortion { point: x.clone() });
        }
        sum += w * vol * k.powf(kappa);
        measure += w * vol;
        cells += 1;
    }
    Ok(DistortionReport {
        p,
        q,
        kappa,
        inv_kappa,
        field,
        coefficient: sum.powf(1.0 / kappa),
        samples: cells,
        measure,
    })
}

/// Monte Carlo comparison of ∫_A (u∘f)|J| dx with ∫ u(y) N(y, f, A) dy.
pub fn change_of_variables_check<R: Rng + ?Sized>(
    f: &dyn Mapping,
    a: &Domain,
    u: &dyn Fn(&[f64]) -> f64,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<VerificationReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("change of variables needs samples > 0".into()));
    }
    let grid = a.grid();
    let lhs = box_mean(grid.lo(), grid.hi(), samples, rng, |x| {
        if !a.region().contains(x) {
            return Ok(0.0);
        }
        let j = f.jacobian(x);
        Ok(u(&f.eval(x)) * j.abs())
    })?
    .scaled(grid.box_volume());

    let (lo, hi) = image_bounding_box(f, a);
    let image_vol: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
    let rhs = box_mean(&lo, &hi, samples, rng, |y| {
        let n = count_preimages_in(f, y, a)?;
        Ok(if n == 0 { 0.0 } else { u(y) * n as f64 })
    })?
    .scaled(image_vol);

    let digest = format!("map={};samples={samples}", f.name());
    Ok(VerificationReport::agreement("change_of_variables", lhs, rhs, tol, digest))
}

fn box_mean<R: Rng + ?Sized>(
    lo: &[f64],
    hi: &[f64],
    samples: usize,
    rng: &mut R,
    mut h: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<crate::stats::Estimate> {
    let mut acc = Running::default();
    let mut x = vec![0.0; lo.len()];
    for _ in 0..samples {
        for k in 0..lo.len() {
            x[k] = rng.random_range(lo[k]..hi[k]);
        }
        let v = h(&x)?;
        if !v.is_finite() {
            return Err(Error::NonIntegrable(format!("integrand is {v} at {x:?}")));
        }
        acc.push(v);
    }
    Ok(acc.estimate())
}

/// Nodal grid function of |∇_H u| (p = 1 density), handy for output.
pub fn gradient_magnitude(g: &Group, u: &GridFunction) -> Result<GridFunction> {
    let hg = horizontal_gradient(g, u)?;
    let vals = (0..hg.node_count()).map(|i| hg.at(i).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    GridFunction::new(u.grid().clone(), vals)
}

/// Unit grid over `[lo, hi]` with `resolution` cells per axis; a shorthand
/// used by the distortion and energy helpers.
pub fn box_grid(lo: &[f64], hi: &[f64], resolution: usize) -> Result<Grid> {
    Grid::uniform(lo.to_vec(), hi.to_vec(), resolution)
}
