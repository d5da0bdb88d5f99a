//! The push-forward v = f_*u and smooth test functions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Region};
use crate::group::Group;
use crate::mapping::{MapRef, Mapping};

/// An analytic test function together with an open set containing its support.
#[derive(Clone)]
pub struct TestFunction {
    pub label: String,
    pub eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub support: Region,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({})", self.label)
    }
}

impl TestFunction {
    pub fn sample(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_fn(grid.clone(), |x| (self.eval)(x))
    }

    pub fn scaled(&self, c: f64) -> TestFunction {
        let e = self.eval.clone();
        TestFunction {
            label: format!("{c}*{}", self.label),
            eval: Arc::new(move |x| c * e(x)),
            support: self.support.clone(),
        }
    }
}

/// ψ(ρ(c⁻¹x)⁴ / R⁴) with ψ(s) = exp(1 − 1/(1 − s)) on s < 1: smooth, equal
/// to 1 at the centre, supported in the open gauge ball B(c, R).
pub fn bump(group: &Group, center: &[f64], radius: f64) -> TestFunction {
    let g = group.clone();
    let c = center.to_vec();
    let r4 = radius.powi(4);
    TestFunction {
        label: format!("bump(c={center:?},R={radius})"),
        eval: Arc::new(move |x| {
            let s = g.distance(&c, x).powi(4) / r4;
            if s < 1.0 {
                (1.0 - 1.0 / (1.0 - s)).exp()
            } else {
                0.0
            }
        }),
        support: Region::open_ball(group, center, radius),
    }
}

/// A bump modulated by a smooth non-radial factor.
pub fn wavy_bump(group: &Group, center: &[f64], radius: f64, freq: f64) -> TestFunction {
    let b = bump(group, center, radius);
    let e = b.eval.clone();
    TestFunction {
        label: format!("wavy_bump(c={center:?},R={radius},w={freq})"),
        eval: Arc::new(move |x| e(x) * (1.0 + 0.5 * (freq * x[0]).sin() * (0.7 * freq * x[1]).cos())),
        support: b.support,
    }
}

/// exp(−ρ(c⁻¹x)²/w²)·(1 + x₀/4): smooth, not compactly supported.
pub fn tilted_gaussian(group: &Group, center: &[f64], width: f64) -> TestFunction {
    let g = group.clone();
    let c = center.to_vec();
    TestFunction {
        label: format!("tilted_gaussian(c={center:?},w={width})"),
        eval: Arc::new(move |x| {
            let d = g.distance(&c, x) / width;
            (-d * d).exp() * (1.0 + 0.25 * x[0])
        }),
        support: Region::everything(),
    }
}

/// v(y) = Λ Σ_{z ∈ f⁻¹(y)} i(z, f) u(z), with u read from its grid by
/// multilinear interpolation and taken as 0 outside the grid box.
pub fn push_forward(f: &dyn Mapping, u: &GridFunction, lambda: f64, target: &Grid) -> Result<GridFunction> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("push-forward weight must be positive, got {lambda}")));
    }
    let src = u.grid();
    if target.dim() != src.dim() || src.dim() != f.group().total_dim() {
        return Err(Error::DimensionMismatch { expected: f.group().total_dim(), got: target.dim() });
    }
    if touches_boundary(u) {
        return Err(Error::Precondition("supp u touches the boundary of its domain".into()));
    }
    let mut y = vec![0.0; target.dim()];
    let mut values = vec![0.0; target.node_count()];
    for (i, v) in values.iter_mut().enumerate() {
        target.node_coords(i, &mut y);
        let pre = f
            .preimages(&y)
            .ok_or_else(|| Error::Unsupported(format!("{} cannot enumerate preimages", f.name())))?;
        let mut acc = 0.0;
        for z in &pre {
            if src.contains(z) {
                acc += f.index(z) as f64 * u.interpolate(z);
            }
        }
        *v = lambda * acc;
    }
    GridFunction::new(target.clone(), values)
}

fn touches_boundary(u: &GridFunction) -> bool {
    let grid = u.grid();
    let d = grid.dim();
    let mut multi = vec![0; d];
    u.values().iter().enumerate().any(|(i, v)| {
        if *v == 0.0 {
            return false;
        }
        grid.node_multi(i, &mut multi);
        (0..d).any(|k| multi[k] == 0 || multi[k] == grid.cells()[k])
    })
}

/// Disagreement between supp v and an analytic image support, in grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportComparison {
    /// nodes with v ≠ 0 farther than one cell from the image support
    pub spurious: usize,
    /// nodes of the image support farther than one cell from supp v
    pub missing: usize,
    pub support_nodes: usize,
}

impl SupportComparison {
    pub fn agrees(&self) -> bool {
        self.spurious == 0 && self.missing == 0
    }
}

/// Compares `supp v` with `image_support` node by node, allowing a
/// one-cell (Chebyshev) neighbourhood on both sides.
pub fn support_agreement(v: &GridFunction, image_support: &Region) -> SupportComparison {
    let grid = v.grid();
    let n = grid.node_count();
    let mut x = vec![0.0; grid.dim()];
    let inside: Vec<bool> = (0..n)
        .map(|i| {
            grid.node_coords(i, &mut x);
            image_support.contains(&x)
        })
        .collect();
    let nonzero: Vec<bool> = v.values().iter().map(|a| *a != 0.0).collect();
    let near = |set: &[bool], i: usize| neighbourhood(grid, i).any(|j| set[j]);
    let spurious = (0..n).filter(|&i| nonzero[i] && !near(&inside, i)).count();
    let missing = (0..n).filter(|&i| inside[i] && !near(&nonzero, i)).count();
    SupportComparison { spurious, missing, support_nodes: nonzero.iter().filter(|b| **b).count() }
}

/// Node indices in the closed one-cell Chebyshev neighbourhood of node `i`.
fn neighbourhood(grid: &Grid, i: usize) -> impl Iterator<Item = usize> + '_ {
    let d = grid.dim();
    let mut multi = vec![0; d];
    grid.node_multi(i, &mut multi);
    let total = 3usize.pow(d as u32);
    (0..total).filter_map(move |code| {
        let mut c = code;
        let mut idx = 0usize;
        for k in 0..d {
            let off = (c % 3) as i64 - 1;
            c /= 3;
            let m = multi[k] as i64 + off;
            if m < 0 || m > grid.cells()[k] as i64 {
                return None;
            }
            idx += m as usize * grid.strides()[k];
        }
        Some(idx)
    })
}

/// f(supp u) as a predicate through preimages.
pub fn image_support(f: MapRef, u: &TestFunction) -> Region {
    crate::mapping::image_region(f, u.support.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn identity_resamples() {
        let g = Group::abelian(2);
        let grid = Grid::uniform(vec![-1.0, -1.0], vec![1.0, 1.0], 32).unwrap();
        let u = bump(&g, &[0.1, 0.0], 0.6).sample(&grid);
        let id = zoo::identity(&g);
        let v = push_forward(id.map.as_ref(), &u, 1.0, &grid).unwrap();
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn winding_multiplies_radial_bump() {
        let g = Group::abelian(2);
        let grid = Grid::uniform(vec![-1.0, -1.0], vec![1.0, 1.0], 64).unwrap();
        let u = bump(&g, &[0.0, 0.0], 0.8);
        let ug = u.sample(&grid);
        let w = zoo::winding(3).unwrap();
        let v = push_forward(w.map.as_ref(), &ug, 1.0, &grid).unwrap();
        let err = v.values().iter().zip(ug.values()).map(|(a, b)| (a - 3.0 * b).abs()).fold(0.0, f64::max);
        assert!(err < 0.02 * 3.0, "{err}");
        let cmp = support_agreement(&v, &image_support(w.map.clone(), &u));
        assert!(cmp.agrees(), "{cmp:?}");
    }

    #[test]
    fn homogeneous_and_boundary_checked() {
        let g = Group::abelian(2);
        let grid = Grid::uniform(vec![-1.0, -1.0], vec![1.0, 1.0], 16).unwrap();
        let u = bump(&g, &[0.0, 0.0], 0.5).sample(&grid);
        let lin = zoo::linear(&g, nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        let target = Grid::uniform(vec![-2.0, -1.0], vec![2.0, 1.0], 16).unwrap();
        let v1 = push_forward(lin.map.as_ref(), &u, 1.0, &target).unwrap();
        let v3 = push_forward(lin.map.as_ref(), &u, 3.0, &target).unwrap();
        assert!(v1.values().iter().zip(v3.values()).all(|(a, b)| (3.0 * a - b).abs() < 1e-14));
        let wide = bump(&g, &[0.0, 0.0], 1.5).sample(&grid);
        assert!(matches!(push_forward(lin.map.as_ref(), &wide, 1.0, &target), Err(Error::Precondition(_))));
    }
}
