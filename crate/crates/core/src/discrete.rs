//! Discrete horizontal p-energy on a tensor grid.
//!
//! Every grid cell is split into the `d!` Kuhn simplices (one per ordering
//! of the axes). On each simplex the nodal values define an affine
//! function whose Euclidean gradient is exact; the horizontal frame is
//! evaluated at the simplex centroid (midpoint rule), and the cell weight is
//! the coverage fraction of the integration mask. For the abelian group
//! this is precisely the Dirichlet p-energy of the piecewise-linear
//! interpolant.
//!
//! Gradient scatters are parallel over slabs of cells along axis 0: slabs
//! of equal parity touch disjoint node layers, so even and odd slabs are
//! processed in two passes without locking.

use rayon::prelude::*;

use crate::group::{Group, GroupKind};
use crate::grid::Grid;

/// Largest supported grid dimension.
pub const MAX_DIM: usize = 5;

pub struct SimplexEnergy {
    heisenberg: bool,
    grid: Grid,
    dim: usize,
    h: Vec<f64>,
    /// active cells: lower-corner node index and weight (coverage · simplex volume)
    corners: Vec<usize>,
    weights: Vec<f64>,
    /// [start, end) ranges into `corners` per axis-0 slab
    slabs: Vec<(usize, usize)>,
    /// node offsets of the 2^d cell corners, by bitmask
    corner_offsets: Vec<usize>,
    /// per simplex: visited corner masks and the axis stepped at each edge
    paths: Vec<[usize; MAX_DIM + 1]>,
    axes: Vec<[usize; MAX_DIM]>,
    /// centroid offsets (in coordinates) from the lower corner
    centroids: Vec<[f64; MAX_DIM]>,
}

/// Which outputs a pass accumulates.
#[derive(Clone, Copy)]
struct Want {
    grad: bool,
    diag: bool,
}

/// s^{p/2}, avoiding `powf` when p is a multiple of 1/2.
#[inline(always)]
fn pow_half(s2: f64, p: f64) -> f64 {
    let m = 2.0 * p;
    if m == m.trunc() && m <= 64.0 {
        let m = m as u32;
        let mut f = s2.powi((m / 4) as i32);
        match m % 4 {
            1 => f *= s2.sqrt().sqrt(),
            2 => f *= s2.sqrt(),
            3 => {
                let r = s2.sqrt();
                f *= r * r.sqrt();
            }
            _ => {}
        }
        f
    } else {
        s2.powf(0.5 * p)
    }
}

macro_rules! dispatch {
    ($self:ident, $method:ident ( $($arg:expr),* )) => {
        match ($self.dim, $self.heisenberg) {
            (1, false) => $self.$method::<1, 2, false>($($arg),*),
            (2, false) => $self.$method::<2, 4, false>($($arg),*),
            (3, false) => $self.$method::<3, 8, false>($($arg),*),
            (4, false) => $self.$method::<4, 16, false>($($arg),*),
            (5, false) => $self.$method::<5, 32, false>($($arg),*),
            (3, true) => $self.$method::<3, 8, true>($($arg),*),
            (5, true) => $self.$method::<5, 32, true>($($arg),*),
            (d, h) => unreachable!("unsupported energy layout d={d} heisenberg={h}"),
        }
    };
}

impl SimplexEnergy {
    /// `cell_weights` are per-cell coverage fractions in `[0, 1]`; cells with
    /// zero weight or rejected by `keep` are skipped.
    pub fn new(group: &Group, grid: &Grid, cell_weights: &[f64], keep: impl Fn(usize) -> bool) -> Self {
        let dim = grid.dim();
        assert!(dim <= MAX_DIM, "grid dimension {dim} exceeds {MAX_DIM}");
        assert_eq!(dim, group.total_dim(), "grid and group dimensions differ");
        assert_eq!(cell_weights.len(), grid.cell_count());
        let h = grid.spacings();
        let strides = grid.strides().to_vec();
        let corner_offsets: Vec<usize> = (0..1usize << dim)
            .map(|m| (0..dim).filter(|k| m >> k & 1 == 1).map(|k| strides[k]).sum())
            .collect();

        let mut paths = Vec::new();
        let mut axes = Vec::new();
        let mut centroids = Vec::new();
        for perm in permutations(dim) {
            let mut mask = 0usize;
            let mut path = [0usize; MAX_DIM + 1];
            let mut ax = [0usize; MAX_DIM];
            let mut centroid = [0.0; MAX_DIM];
            for (j, &k) in perm.iter().enumerate() {
                mask |= 1 << k;
                path[j + 1] = mask;
                ax[j] = k;
                // vertices j+1..=d have axis k incremented
                centroid[k] = h[k] * (dim - j) as f64 / (dim + 1) as f64;
            }
            paths.push(path);
            axes.push(ax);
            centroids.push(centroid);
        }
        let simplex_vol = grid.cell_volume() / paths.len() as f64;

        let mut corners = Vec::new();
        let mut weights = Vec::new();
        let mut slabs = Vec::new();
        let per_slab = grid.cell_count() / grid.cells()[0];
        for s in 0..grid.cells()[0] {
            let start = corners.len();
            for c in s * per_slab..(s + 1) * per_slab {
                let w = cell_weights[c];
                if w > 0.0 && keep(c) {
                    corners.push(grid.cell_corner(c));
                    weights.push(w * simplex_vol);
                }
            }
            slabs.push((start, corners.len()));
        }
        SimplexEnergy {
            heisenberg: matches!(group.kind(), GroupKind::Heisenberg(_)),
            grid: grid.clone(),
            dim,
            h,
            corners,
            weights,
            slabs,
            corner_offsets,
            paths,
            axes,
            centroids,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn active_cells(&self) -> usize {
        self.corners.len()
    }

    /// Energy Σ w (|∇_H u|² + ε²)^{p/2}, optionally with its gradient and the
    /// diagonal of its Hessian accumulated into `grad` / `diag` (which are
    /// overwritten).
    pub fn evaluate(
        &self,
        u: &[f64],
        p: f64,
        eps2: f64,
        mut grad: Option<&mut [f64]>,
        mut diag: Option<&mut [f64]>,
    ) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        if let Some(dg) = diag.as_deref_mut() {
            dg.iter_mut().for_each(|v| *v = 0.0);
        }
        let want = Want { grad: grad.is_some(), diag: diag.is_some() };
        if !want.grad && !want.diag {
            let parts: Vec<f64> = (0..self.slabs.len())
                .into_par_iter()
                .map(|s| dispatch!(self, slab_pass(s, u, p, eps2, want, &mut [], &mut [], 0)))
                .collect();
            return parts.iter().sum();
        }
        let layer = self.grid.strides()[0];
        let mut parts = vec![0.0; self.slabs.len()];
        for parity in 0..2 {
            let offset = parity * layer;
            let mut g_iter = chunks(grad.as_deref_mut(), offset, 2 * layer).into_iter();
            let mut d_iter = chunks(diag.as_deref_mut(), offset, 2 * layer).into_iter();
            let mut jobs: Vec<(usize, &mut [f64], &mut [f64])> = Vec::new();
            for s in (parity..self.slabs.len()).step_by(2) {
                jobs.push((s, g_iter.next().unwrap_or_default(), d_iter.next().unwrap_or_default()));
            }
            let results: Vec<(usize, f64)> = jobs
                .into_par_iter()
                .map(|(s, gc, dc)| (s, dispatch!(self, slab_pass(s, u, p, eps2, want, gc, dc, s * layer))))
                .collect();
            for (s, e) in results {
                parts[s] = e;
            }
        }
        parts.iter().sum()
    }

    /// One slab of cells. `base` is the global node index where the local
    /// gradient chunks start.
    #[allow(clippy::too_many_arguments)]
    #[inline(never)]
    fn slab_pass<const D: usize, const C: usize, const HEIS: bool>(
        &self,
        s: usize,
        u: &[f64],
        p: f64,
        eps2: f64,
        want: Want,
        grad: &mut [f64],
        diag: &mut [f64],
        base: usize,
    ) -> f64 {
        let (start, end) = self.slabs[s];
        let n = D / 2;
        let n1 = if HEIS { D - 1 } else { D };
        let mut inv_h = [0.0; D];
        for k in 0..D {
            inv_h[k] = 1.0 / self.h[k];
        }
        let mut offs = [0usize; C];
        offs.copy_from_slice(&self.corner_offsets[..C]);
        let mut vals = [0.0; C];
        let mut lg = [0.0; C];
        let mut ld = [0.0; C];
        let mut x0 = [0.0; D];
        let mut xc = [0.0; D];
        let mut du = [0.0; D];
        let mut w = [0.0; D];
        let mut energy = 0.0;

        for ci in start..end {
            let corner = self.corners[ci];
            let wt = self.weights[ci];
            for m in 0..C {
                vals[m] = u[corner + offs[m]];
            }
            if want.grad {
                lg = [0.0; C];
            }
            if want.diag {
                ld = [0.0; C];
            }
            if HEIS {
                self.grid.node_coords(corner, &mut x0);
            }
            for si in 0..self.paths.len() {
                let path = &self.paths[si];
                let axes = &self.axes[si];
                for j in 0..D {
                    let k = axes[j];
                    du[k] = (vals[path[j + 1]] - vals[path[j]]) * inv_h[k];
                }
                if HEIS {
                    let c = &self.centroids[si];
                    for k in 0..D {
                        xc[k] = x0[k] + c[k];
                    }
                    let dt = du[D - 1];
                    for i in 0..n {
                        w[i] = du[i] + 2.0 * xc[n + i] * dt;
                        w[n + i] = du[n + i] - 2.0 * xc[i] * dt;
                    }
                } else {
                    w = du;
                }
                let mut s2 = eps2;
                for i in 0..n1 {
                    s2 += w[i] * w[i];
                }
                let f = pow_half(s2, p);
                energy += wt * f;
                if !(want.grad || want.diag) || s2 <= 0.0 {
                    continue;
                }
                // dF/dw = p s^{p/2-1} w
                let coef = wt * p * f / s2;
                if want.grad {
                    // Pull coef·w back through the frame to coordinates.
                    let mut ge = [0.0; D];
                    for i in 0..n1 {
                        ge[i] = coef * w[i];
                    }
                    if HEIS {
                        let mut dt = 0.0;
                        for i in 0..n {
                            dt += 2.0 * xc[n + i] * ge[i] - 2.0 * xc[i] * ge[n + i];
                        }
                        ge[D - 1] = dt;
                    }
                    for j in 0..D {
                        let k = axes[j];
                        let v = ge[k] * inv_h[k];
                        lg[path[j + 1]] += v;
                        lg[path[j]] -= v;
                    }
                }
                if want.diag {
                    // Hat function of vertex j has gradient e_{axis j-1}/h − e_{axis j}/h.
                    for j in 0..=D {
                        let mut b = [0.0; D];
                        if j >= 1 {
                            let k = axes[j - 1];
                            b[k] += inv_h[k];
                        }
                        if j < D {
                            let k = axes[j];
                            b[k] -= inv_h[k];
                        }
                        if HEIS {
                            let bt = b[D - 1];
                            for i in 0..n {
                                let bx = b[i];
                                b[i] = bx + 2.0 * xc[n + i] * bt;
                                b[n + i] -= 2.0 * xc[i] * bt;
                            }
                        }
                        let mut bb = 0.0;
                        let mut wb = 0.0;
                        for i in 0..n1 {
                            bb += b[i] * b[i];
                            wb += w[i] * b[i];
                        }
                        ld[path[j]] += coef * (bb + (p - 2.0) * wb * wb / s2);
                    }
                }
            }
            let local = corner - base;
            if want.grad {
                for m in 0..C {
                    grad[local + offs[m]] += lg[m];
                }
            }
            if want.diag {
                for m in 0..C {
                    diag[local + offs[m]] += ld[m];
                }
            }
        }
        energy
    }

    /// Second directional derivative `dᵀ H(u) d` of the energy.
    pub fn curvature(&self, u: &[f64], dir: &[f64], p: f64, eps2: f64) -> f64 {
        let parts: Vec<f64> = (0..self.slabs.len())
            .into_par_iter()
            .map(|s| dispatch!(self, slab_curvature(s, u, dir, p, eps2)))
            .collect();
        parts.iter().sum()
    }

    #[inline(never)]
    fn slab_curvature<const D: usize, const C: usize, const HEIS: bool>(
        &self,
        s: usize,
        u: &[f64],
        dir: &[f64],
        p: f64,
        eps2: f64,
    ) -> f64 {
        let (start, end) = self.slabs[s];
        let n = D / 2;
        let n1 = if HEIS { D - 1 } else { D };
        let mut inv_h = [0.0; D];
        for k in 0..D {
            inv_h[k] = 1.0 / self.h[k];
        }
        let mut offs = [0usize; C];
        offs.copy_from_slice(&self.corner_offsets[..C]);
        let mut vu = [0.0; C];
        let mut vd = [0.0; C];
        let mut x0 = [0.0; D];
        let mut xc = [0.0; D];
        let mut du = [0.0; D];
        let mut dd = [0.0; D];
        let mut w = [0.0; D];
        let mut z = [0.0; D];
        let mut acc = 0.0;
        for ci in start..end {
            let corner = self.corners[ci];
            let wt = self.weights[ci];
            let mut any = false;
            for m in 0..C {
                let idx = corner + offs[m];
                vu[m] = u[idx];
                vd[m] = dir[idx];
                any |= vd[m] != 0.0;
            }
            if !any {
                continue;
            }
            if HEIS {
                self.grid.node_coords(corner, &mut x0);
            }
            for si in 0..self.paths.len() {
                let path = &self.paths[si];
                let axes = &self.axes[si];
                for j in 0..D {
                    let k = axes[j];
                    du[k] = (vu[path[j + 1]] - vu[path[j]]) * inv_h[k];
                    dd[k] = (vd[path[j + 1]] - vd[path[j]]) * inv_h[k];
                }
                if HEIS {
                    let c = &self.centroids[si];
                    for k in 0..D {
                        xc[k] = x0[k] + c[k];
                    }
                    let (dt, zt) = (du[D - 1], dd[D - 1]);
                    for i in 0..n {
                        w[i] = du[i] + 2.0 * xc[n + i] * dt;
                        w[n + i] = du[n + i] - 2.0 * xc[i] * dt;
                        z[i] = dd[i] + 2.0 * xc[n + i] * zt;
                        z[n + i] = dd[n + i] - 2.0 * xc[i] * zt;
                    }
                } else {
                    w = du;
                    z = dd;
                }
                let (mut s2, mut zz, mut wz) = (eps2, 0.0, 0.0);
                for i in 0..n1 {
                    s2 += w[i] * w[i];
                    zz += z[i] * z[i];
                    wz += w[i] * z[i];
                }
                if s2 <= 0.0 {
                    continue;
                }
                let f = pow_half(s2, p);
                acc += wt * p * f / s2 * (zz + (p - 2.0) * wz * wz / s2);
            }
        }
        acc
    }
}

fn chunks(v: Option<&mut [f64]>, offset: usize, size: usize) -> Vec<&mut [f64]> {
    match v {
        Some(g) => g[offset..].chunks_mut(size).collect(),
        None => Vec::new(),
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                cur.push(k);
                rec(cur, used, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(d), &mut vec![false; d], &mut out);
    out
}
