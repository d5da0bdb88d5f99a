//! Analytically specified mappings `f : G → G` and their self-validation.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::calculus::jacobian_from_hdiff;
use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, Region};
use crate::group::Group;

/// A mapping with explicit horizontal differential and preimage data.
///
/// `hdiff(x)` is the `n₁ × n₁` matrix of `D_H f(x)` with entry `(j, i)`
/// equal to `X_i f_j(x)`, so column `i` is the image of `X_i`.
pub trait Mapping: Send + Sync {
    fn name(&self) -> String;

    fn group(&self) -> &Group;

    fn eval(&self, x: &[f64]) -> Vec<f64>;

    fn hdiff(&self, x: &[f64]) -> DMatrix<f64>;

    /// Formal Jacobian J(x, f).
    fn jacobian(&self, x: &[f64]) -> f64 {
        jacobian_from_hdiff(self.group(), &self.hdiff(x)).unwrap_or(f64::NAN)
    }

    /// Every preimage of `y` in the domain of definition, or `None` when
    /// the mapping cannot enumerate them.
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>>;

    /// Local index i(x, f).
    fn index(&self, _x: &[f64]) -> usize {
        1
    }

    fn in_branch_set(&self, x: &[f64]) -> bool {
        self.index(x) >= 2
    }

    /// Global multiplicity sup_y #f⁻¹(y).
    fn max_multiplicity(&self) -> usize {
        1
    }

    /// Exact image of an axis-aligned box when it is again an axis-aligned
    /// box whose grid maps node-to-node (diagonal affine maps).
    fn image_box(&self, _lo: &[f64], _hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

pub type MapRef = Arc<dyn Mapping>;

/// N(y, f, A): number of preimages of `y` lying in `a`.
pub fn count_preimages_in(f: &dyn Mapping, y: &[f64], a: &Domain) -> Result<usize> {
    let pre = f
        .preimages(y)
        .ok_or_else(|| Error::Unsupported(format!("{} cannot enumerate preimages", f.name())))?;
    Ok(pre.iter().filter(|z| a.contains(z)).count())
}

/// Σ i(z, f) over preimages `z` of `y` in `set`.
pub fn index_sum_in(f: &dyn Mapping, y: &[f64], set: &Region) -> Result<usize> {
    let pre = f
        .preimages(y)
        .ok_or_else(|| Error::Unsupported(format!("{} cannot enumerate preimages", f.name())))?;
    Ok(pre.iter().filter(|z| set.contains(z)).map(|z| f.index(z)).sum())
}

/// Predicate for the image set f(S), tested through preimages.
pub fn image_region(f: MapRef, set: Region) -> Region {
    Region::new(move |y| match f.preimages(y) {
        Some(pre) => pre.iter().any(|z| set.contains(z)),
        None => false,
    })
}

/// N(f, A) estimated as the largest preimage count over images of the
/// domain's grid nodes (exact for the zoo fixtures).
pub fn multiplicity_on(f: &dyn Mapping, a: &Domain) -> Result<usize> {
    let grid = a.grid();
    let mut best = 0;
    let mut x = vec![0.0; grid.dim()];
    for i in 0..grid.node_count() {
        grid.node_coords(i, &mut x);
        if !a.region().contains(&x) {
            continue;
        }
        let y = f.eval(&x);
        best = best.max(count_preimages_in(f, &y, a)?);
        if best >= f.max_multiplicity() {
            break;
        }
    }
    Ok(best)
}

/// Axis-aligned box containing f(A ∩ box), padded by one source cell
/// unless the mapping reports an exact image box.
pub fn image_bounding_box(f: &dyn Mapping, a: &Domain) -> (Vec<f64>, Vec<f64>) {
    let grid = a.grid();
    if let Some(b) = f.image_box(grid.lo(), grid.hi()) {
        return b;
    }
    let d = grid.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut x = vec![0.0; d];
    for i in 0..grid.node_count() {
        grid.node_coords(i, &mut x);
        if !a.region().contains(&x) {
            continue;
        }
        let y = f.eval(&x);
        for k in 0..d {
            lo[k] = lo[k].min(y[k]);
            hi[k] = hi[k].max(y[k]);
        }
    }
    // One target cell of padding on each side.
    for k in 0..d {
        let extra = (hi[k] - lo[k]) / grid.cells()[k] as f64;
        lo[k] -= extra;
        hi[k] += extra;
    }
    (lo, hi)
}

/// Grid over the image of `a` with the same per-axis resolution.
pub fn image_domain(f: MapRef, a: &Domain) -> Result<Domain> {
    let (lo, hi) = image_bounding_box(f.as_ref(), a);
    let grid = Grid::new(lo, hi, a.grid().cells().to_vec())?;
    Ok(Domain::new(grid, image_region(f, a.region().clone())))
}

/// `f ∘ g`.
pub struct Composite {
    outer: MapRef,
    inner: MapRef,
}

impl Composite {
    pub fn new(outer: MapRef, inner: MapRef) -> Result<Self> {
        if outer.group() != inner.group() {
            return Err(Error::InvalidParameter("composite maps must share a group".into()));
        }
        Ok(Composite { outer, inner })
    }
}

impl Mapping for Composite {
    fn name(&self) -> String {
        format!("{}∘{}", self.outer.name(), self.inner.name())
    }

    fn group(&self) -> &Group {
        self.inner.group()
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.outer.eval(&self.inner.eval(x))
    }

    fn hdiff(&self, x: &[f64]) -> DMatrix<f64> {
        self.outer.hdiff(&self.inner.eval(x)) * self.inner.hdiff(x)
    }

    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        for z in self.outer.preimages(y)? {
            out.extend(self.inner.preimages(&z)?);
        }
        Some(out)
    }

    fn index(&self, x: &[f64]) -> usize {
        self.inner.index(x) * self.outer.index(&self.inner.eval(x))
    }

    fn max_multiplicity(&self) -> usize {
        self.outer.max_multiplicity() * self.inner.max_multiplicity()
    }
}

/// Outcome of comparing a mapping's analytic data with finite differences.
#[derive(Debug, Clone)]
pub struct ValidationSummary {
    /// max |FD horizontal derivative − hdiff| / max(1, |hdiff|)
    pub hdiff_rel_error: f64,
    /// max relative gap between the Euclidean Jacobian determinant (FD) and `jacobian`
    pub jacobian_rel_error: f64,
    /// largest component of X_i f transverse to the horizontal bundle
    pub contact_defect: f64,
    /// max coordinate gap between f(preimage) and y
    pub preimage_defect: f64,
    /// points where `index >= 2` disagrees with `in_branch_set`
    pub branch_mismatches: usize,
}

impl ValidationSummary {
    pub fn passes(&self, tol: f64) -> bool {
        self.hdiff_rel_error < tol
            && self.jacobian_rel_error < tol
            && self.contact_defect < tol
            && self.preimage_defect < 1e-9
            && self.branch_mismatches == 0
    }
}

/// Finite-difference self-check at the given sample points with step `h`.
/// Horizontal derivatives follow the flows of the left-invariant fields,
/// `X_i f(x) ≈ (f(x·exp(h e_i)) − f(x·exp(−h e_i))) / 2h`.
pub fn validate(f: &dyn Mapping, points: &[Vec<f64>], h: f64) -> ValidationSummary {
    let g = f.group();
    let n = g.total_dim();
    let n1 = g.horizontal_dim();
    let mut s = ValidationSummary {
        hdiff_rel_error: 0.0,
        jacobian_rel_error: 0.0,
        contact_defect: 0.0,
        preimage_defect: 0.0,
        branch_mismatches: 0,
    };
    let mut step = vec![0.0; n];
    let mut moved = vec![0.0; n];
    for x in points {
        let m = f.hdiff(x);
        let fx = f.eval(x);
        let target_frame = g.horizontal_frame(&fx).expect("valid point");
        let scale = m.abs().max().max(1.0);
        for i in 0..n1 {
            step.iter_mut().for_each(|v| *v = 0.0);
            step[i] = h;
            g.compose_into(x, &step, &mut moved);
            let fp = f.eval(&moved);
            step[i] = -h;
            g.compose_into(x, &step, &mut moved);
            let fm = f.eval(&moved);
            let xf: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            for j in 0..n1 {
                s.hdiff_rel_error = s.hdiff_rel_error.max((xf[j] - m[(j, i)]).abs() / scale);
            }
            // The vertical part must be what the horizontal part dictates.
            for k in n1..n {
                let implied: f64 = (0..n1).map(|j| target_frame.coefficient(k, j) * xf[j]).sum();
                s.contact_defect = s.contact_defect.max((xf[k] - implied).abs() / scale);
            }
        }
        // Euclidean Jacobian determinant by central differences.
        let mut jm = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let (fp, fm) = (f.eval(&xp), f.eval(&xm));
            for r in 0..n {
                jm[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        let j_fd = jm.determinant();
        let j = f.jacobian(x);
        s.jacobian_rel_error = s.jacobian_rel_error.max((j_fd - j).abs() / j.abs().max(1.0));
        // Coordinate distances: the gauge turns roundoff ε in t into √ε.
        let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        if let Some(pre) = f.preimages(&fx) {
            for z in &pre {
                s.preimage_defect = s.preimage_defect.max(gap(&f.eval(z), &fx));
            }
            if !pre.iter().any(|z| gap(z, x) < 1e-9 * (1.0 + g.gauge_norm(x))) {
                s.preimage_defect = s.preimage_defect.max(f64::INFINITY);
            }
        }
        if (f.index(x) >= 2) != f.in_branch_set(x) {
            s.branch_mismatches += 1;
        }
    }
    s
}
