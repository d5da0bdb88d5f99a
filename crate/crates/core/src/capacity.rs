//! Variational p-capacity of condensers.
//!
//! The admissible class is discretized by piecewise-linear functions on the
//! Kuhn triangulation of a grid: nodes in F₁ are pinned to 1, nodes in F₀
//! to 0, the rest are free in `[0, 1]`. The discrete energy is minimized by
//! a Jacobi-preconditioned, projected Polak–Ribière conjugate gradient with
//! Newton step lengths and Armijo backtracking, started from the
//! prolongated solution of the half-resolution problem.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::discrete::SimplexEnergy;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Region};
use crate::group::Group;
use crate::report::VerificationReport;
use crate::stats::Estimate;

/// A condenser (F₀, F₁; D) inside an axis-aligned box.
#[derive(Debug, Clone)]
pub struct Condenser {
    lo: Vec<f64>,
    hi: Vec<f64>,
    f0: Region,
    f1: Region,
    d: Region,
    label: String,
}

impl Condenser {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, f0: Region, f1: Region, d: Region, label: impl Into<String>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("condenser box is degenerate".into()));
        }
        Ok(Condenser { lo, hi, f0, f1, d, label: label.into() })
    }

    /// The ring (∁B(c, R), B̄(c, r); B(c, R)) in gauge balls, boxed by the
    /// bounding box of B̄(c, R).
    pub fn ring(group: &Group, center: &[f64], r: f64, big_r: f64) -> Result<Self> {
        group.check(center)?;
        if !(0.0 < r && r < big_r) {
            return Err(Error::InvalidParameter(format!("ring needs 0 < r < R, got r={r}, R={big_r}")));
        }
        let (lo, hi) = group.ball_bounding_box(center, big_r);
        let d = Region::open_ball(group, center, big_r);
        let f1 = Region::ball(group, center, r);
        let label = format!("ring[{};c={center:?};r={r};R={big_r}]", group.kind());
        Condenser::new(lo, hi, d.complement(), f1, d, label)
    }

    /// The condenser E = (∂U, C; U) of an open set `u` and compact `c ⊂ u`,
    /// with F₀ taken as the whole complement of U in the box.
    pub fn from_open_set(lo: Vec<f64>, hi: Vec<f64>, u: Region, c: Region, label: impl Into<String>) -> Result<Self> {
        Condenser::new(lo, hi, u.complement(), c, u, label)
    }

    /// δ_t E, with the box dilated along.
    pub fn dilated(&self, group: &Group, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {t}")));
        }
        if self.lo.len() != group.total_dim() {
            return Err(Error::DimensionMismatch { expected: group.total_dim(), got: self.lo.len() });
        }
        let lo = group.dilate(t, &self.lo)?.into_inner();
        let hi = group.dilate(t, &self.hi)?.into_inner();
        let pull = |r: &Region| {
            let (g, r) = (group.clone(), r.clone());
            Region::new(move |y| {
                let mut x = y.to_vec();
                g.dilate_in_place(1.0 / t, &mut x);
                r.contains(&x)
            })
        };
        Condenser::new(lo, hi, pull(&self.f0), pull(&self.f1), pull(&self.d), format!("{}∘δ[{t}]", self.label))
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn f0(&self) -> &Region {
        &self.f0
    }

    pub fn f1(&self) -> &Region {
        &self.f1
    }

    pub fn d(&self) -> &Region {
        &self.d
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    Zero,
    One,
    Free,
    Outside,
}

/// A condenser on a concrete grid.
pub struct DiscreteProblem {
    grid: Grid,
    classes: Vec<NodeClass>,
    energy: SimplexEnergy,
    free: usize,
    epsilon: f64,
}

impl DiscreteProblem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn free_count(&self) -> usize {
        self.free
    }

    pub fn active_cells(&self) -> usize {
        self.energy.active_cells()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Discrete energy of a nodal vector, without regularization.
    pub fn energy(&self, u: &[f64], p: f64) -> f64 {
        self.energy.evaluate(u, p, 0.0, None, None)
    }
}

pub fn discretize(c: &Condenser, g: &Group, resolution: usize) -> Result<DiscreteProblem> {
    if c.lo.len() != g.total_dim() {
        return Err(Error::DimensionMismatch { expected: g.total_dim(), got: c.lo.len() });
    }
    let grid = Grid::uniform(c.lo.clone(), c.hi.clone(), resolution)?;
    discretize_on(c, g, grid)
}

pub fn discretize_on(c: &Condenser, g: &Group, grid: Grid) -> Result<DiscreteProblem> {
    let d = grid.dim();
    let n = grid.node_count();
    let mut x = vec![0.0; d];
    let mut classes = vec![NodeClass::Outside; n];
    let (mut zeros, mut ones) = (0usize, 0usize);
    for (i, cl) in classes.iter_mut().enumerate() {
        grid.node_coords(i, &mut x);
        let in1 = c.f1.contains(&x);
        let in0 = c.f0.contains(&x);
        if in1 && in0 {
            return Err(Error::Discretization(format!("F0 and F1 share the grid node {x:?}")));
        }
        if in1 {
            *cl = NodeClass::One;
            ones += 1;
        } else if in0 {
            *cl = NodeClass::Zero;
            zeros += 1;
        }
    }
    if ones == 0 || zeros == 0 {
        return Err(Error::Discretization(format!(
            "resolution {:?} resolves no node of {}",
            grid.cells(),
            if ones == 0 { "F1" } else { "F0" }
        )));
    }
    // F1 must lie in the closure of D: every F1 node is in D or one step from it.
    let strides = grid.strides().to_vec();
    let mut multi = vec![0; d];
    let mut y = vec![0.0; d];
    for i in 0..n {
        if classes[i] != NodeClass::One {
            continue;
        }
        grid.node_coords(i, &mut x);
        if c.d.contains(&x) {
            continue;
        }
        grid.node_multi(i, &mut multi);
        let near = (0..d).any(|k| {
            [-1i64, 1].iter().any(|&s| {
                let m = multi[k] as i64 + s;
                if m < 0 || m > grid.cells()[k] as i64 {
                    return false;
                }
                let j = (i as i64 + s * strides[k] as i64) as usize;
                grid.node_coords(j, &mut y);
                c.d.contains(&y)
            })
        });
        if !near {
            return Err(Error::Discretization(format!("F1 node {x:?} is not in the closure of D")));
        }
    }

    let support = c.d.or(&c.f0).or(&c.f1);
    let coverage = grid.cell_coverage(&support);
    let ncorner = 1usize << d;
    let offsets: Vec<usize> = (0..ncorner)
        .map(|m| (0..d).filter(|k| m >> k & 1 == 1).map(|k| strides[k]).sum())
        .collect();
    let mut keep = vec![false; grid.cell_count()];
    for (cell, k) in keep.iter_mut().enumerate() {
        if coverage[cell] == 0.0 {
            continue;
        }
        let base = grid.cell_corner(cell);
        let first = classes[base];
        let uniform = first != NodeClass::Free
            && first != NodeClass::Outside
            && offsets.iter().all(|&o| classes[base + o] == first);
        *k = !uniform;
    }
    for (cell, &k) in keep.iter().enumerate() {
        if !k {
            continue;
        }
        let base = grid.cell_corner(cell);
        for &o in &offsets {
            if classes[base + o] == NodeClass::Outside {
                classes[base + o] = NodeClass::Free;
            }
        }
    }
    let free = classes.iter().filter(|c| **c == NodeClass::Free).count();
    if free == 0 {
        return Err(Error::Discretization("no free nodes between the plates".into()));
    }
    let energy = SimplexEnergy::new(g, &grid, &coverage, |cell| keep[cell]);
    let epsilon = 1e-8 * grid.diameter() / *grid.cells().iter().max().unwrap() as f64;
    Ok(DiscreteProblem { grid, classes, energy, free, epsilon })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverOptions {
    /// stop when max_i |∂E/∂u_i| / sqrt(H_ii E) falls below this
    pub tol: f64,
    pub max_iters: usize,
    /// start from the prolongated half-resolution solution
    pub nested: bool,
    /// coarsest resolution used by the nested start
    pub min_coarse: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 3e-4, max_iters: 20_000, nested: true, min_coarse: 16 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub value: f64,
    #[serde(skip)]
    pub minimizer: GridFunction,
    pub p: f64,
    pub iterations: usize,
    pub grad_residual: f64,
    pub resolution: Vec<usize>,
    pub converged: bool,
    pub epsilon: f64,
}

impl CapacityResult {
    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations, residual: self.grad_residual })
        }
    }

    pub const CSV_HEADER: &'static str = "group,p,resolution,value,iterations,residual";

    pub fn csv_row(&self, group: &Group) -> String {
        let res: Vec<String> = self.resolution.iter().map(|r| r.to_string()).collect();
        format!(
            "{},{},{},{:.12e},{},{:.6e}",
            group.kind(),
            self.p,
            res.join("x"),
            self.value,
            self.iterations,
            self.grad_residual
        )
    }
}

pub fn solve_capacity(c: &Condenser, g: &Group, p: f64, resolution: usize, opts: &SolverOptions) -> Result<CapacityResult> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("capacity exponent must be > 1, got {p}")));
    }
    let problem = discretize(c, g, resolution)?;
    let mut u = vec![0.0; problem.grid.node_count()];
    let coarse = resolution / 2;
    let mut start = None;
    if opts.nested && resolution.is_multiple_of(2) && coarse >= opts.min_coarse {
        if let Ok(cr) = solve_capacity(c, g, p, coarse, opts) {
            start = Some(cr.minimizer);
        }
    }
    let grid = problem.grid.clone();
    let mut x = vec![0.0; grid.dim()];
    for (i, v) in u.iter_mut().enumerate() {
        *v = match problem.classes[i] {
            NodeClass::One => 1.0,
            NodeClass::Zero | NodeClass::Outside => 0.0,
            NodeClass::Free => match &start {
                Some(s) => {
                    grid.node_coords(i, &mut x);
                    s.interpolate(&x).clamp(0.0, 1.0)
                }
                None => 0.5,
            },
        };
    }
    minimize(&problem, u, p, opts)
}

/// Minimizes the regularized discrete energy from `u` (pinned values already set).
pub fn minimize(problem: &DiscreteProblem, mut u: Vec<f64>, p: f64, opts: &SolverOptions) -> Result<CapacityResult> {
    let n = u.len();
    let free: Vec<bool> = problem.classes.iter().map(|c| *c == NodeClass::Free).collect();
    let eps2 = problem.epsilon * problem.epsilon;
    let energy = &problem.energy;

    let mut g = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut e = energy.evaluate(&u, p, eps2, Some(&mut g), Some(&mut diag));
    let mask = |v: &mut [f64]| v.iter_mut().zip(&free).for_each(|(x, f)| if !f { *x = 0.0 });
    mask(&mut g);

    let mut dir = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut g_old = vec![0.0; n];
    let mut s_dot_r_old = 0.0;
    let mut restart = true;
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        // Projected residual and preconditioned steepest descent direction.
        residual = 0.0;
        let floor = diag_floor(&diag, &free);
        let mut s_dot_r = 0.0;
        let mut s_dot_dr = 0.0;
        for i in 0..n {
            if !free[i] || bound_active(u[i], g[i]) {
                s[i] = 0.0;
                continue;
            }
            let hii = diag[i].max(floor);
            residual = f64::max(residual, g[i].abs() / (hii * e).sqrt());
            s[i] = -g[i] / hii;
            s_dot_r += s[i] * -g[i];
            s_dot_dr += s[i] * (-g[i] + g_old[i]);
        }
        if residual < opts.tol || e == 0.0 {
            converged = true;
            break;
        }
        let beta = if restart || s_dot_r_old <= 0.0 { 0.0 } else { (s_dot_dr / s_dot_r_old).max(0.0) };
        let mut slope = 0.0;
        for i in 0..n {
            dir[i] = if s[i] == 0.0 && (!free[i] || bound_active(u[i], g[i])) { 0.0 } else { s[i] + beta * dir[i] };
            slope += g[i] * dir[i];
        }
        if slope >= 0.0 {
            dir.copy_from_slice(&s);
            slope = -s_dot_r;
        }
        s_dot_r_old = s_dot_r;
        g_old.copy_from_slice(&g);

        let curv = energy.curvature(&u, &dir, p, eps2);
        let mut alpha = if curv > 0.0 { -slope / curv } else { 1.0 };
        let mut accepted = false;
        let mut clipped = false;
        let mut e_trial = e;
        for _ in 0..40 {
            clipped = false;
            for i in 0..n {
                let v = u[i] + alpha * dir[i];
                let c = v.clamp(0.0, 1.0);
                clipped |= c != v;
                trial[i] = c;
            }
            e_trial = energy.evaluate(&trial, p, eps2, Some(&mut g_trial), None);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - u[i])).sum();
            if e_trial <= e + 1e-4 * decrease || e_trial < e && decrease.abs() < 1e-300 {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        mask(&mut g);
        e = e_trial;
        restart = clipped;
        if iterations % 10 == 0 {
            energy.evaluate(&u, p, eps2, None, Some(&mut diag));
        }
        history.push(e);
        if history.len() > 200 {
            let old = history[history.len() - 201];
            if (old - e) <= 1e-13 * e {
                converged = residual < 10.0 * opts.tol;
                break;
            }
        }
    }
    let value = problem.energy(&u, p);
    Ok(CapacityResult {
        value,
        minimizer: GridFunction::new(problem.grid.clone(), u)?,
        p,
        iterations,
        grad_residual: residual,
        resolution: problem.grid.cells().to_vec(),
        converged,
        epsilon: problem.epsilon,
    })
}

#[inline]
fn bound_active(u: f64, g: f64) -> bool {
    (u <= 0.0 && g > 0.0) || (u >= 1.0 && g < 0.0)
}

/// Lower bound for the Jacobi preconditioner where the local gradient
/// vanishes (p > 2 makes the Hessian degenerate there).
fn diag_floor(diag: &[f64], free: &[bool]) -> f64 {
    let max = diag.iter().zip(free).filter(|(_, f)| **f).map(|(d, _)| *d).fold(0.0, f64::max);
    (max * 1e-8).max(f64::MIN_POSITIVE)
}

/// Independent solves in parallel, results in input order.
pub fn solve_batch(jobs: &[(Condenser, Group, f64, usize)], opts: &SolverOptions) -> Vec<Result<CapacityResult>> {
    jobs.par_iter().map(|(c, g, p, res)| solve_capacity(c, g, *p, *res, opts)).collect()
}

type Slot = Arc<Mutex<Option<Arc<CapacityResult>>>>;

/// Memoized solves keyed by condenser label, group, exponent and resolution.
/// Concurrent requests for the same key wait for a single solve.
#[derive(Default)]
pub struct CapacityCache {
    map: Mutex<HashMap<String, Slot>>,
}

impl CapacityCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&self, c: &Condenser, g: &Group, p: f64, resolution: usize, opts: &SolverOptions) -> Result<Arc<CapacityResult>> {
        let key = format!("{}|{}|{p}|{resolution}|{}|{}", c.label(), g.kind(), opts.tol, opts.max_iters);
        let slot = self.map.lock().unwrap().entry(key).or_default().clone();
        let mut guard = slot.lock().unwrap();
        if let Some(r) = guard.as_ref() {
            return Ok(r.clone());
        }
        let r = Arc::new(solve_capacity(c, g, p, resolution, opts)?);
        *guard = Some(r.clone());
        Ok(r)
    }

    /// Number of completed solves.
    pub fn len(&self) -> usize {
        self.map.lock().unwrap().values().filter(|s| s.lock().unwrap().is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Γ(n/2) for a positive integer n.
fn gamma_half(n: usize) -> f64 {
    let mut v = if n.is_multiple_of(2) { 1.0 } else { PI.sqrt() };
    let mut k = if n.is_multiple_of(2) { 2 } else { 1 };
    while k < n {
        v *= k as f64 / 2.0;
        k += 2;
    }
    v
}

/// Surface area ω_{n−1} of the unit sphere in ℝⁿ.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Exact p-capacity of the Euclidean spherical ring r < |x| < R in ℝⁿ.
pub fn ring_capacity_oracle(n: usize, p: f64, r: f64, big_r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("ring capacity needs p > 1, got {p}")));
    }
    if !(0.0 < r && r < big_r) {
        return Err(Error::InvalidParameter(format!("ring needs 0 < r < R, got r={r}, R={big_r}")));
    }
    let w = sphere_area(n);
    let nf = n as f64;
    if (p - nf).abs() < 1e-12 {
        return Ok(w * (big_r / r).ln().powf(1.0 - nf));
    }
    let a = (p - nf) / (p - 1.0);
    let gap = if big_r.is_infinite() { r.powf(a).abs() } else { (big_r.powf(a) - r.powf(a)).abs() };
    Ok(w * ((nf - p) / (p - 1.0)).abs().powf(p - 1.0) * gap.powf(1.0 - p))
}

/// Compares cp_p(δ_t E) with t^{ν−p} cp_p(E).
pub fn capacity_scaling_check(
    c: &Condenser,
    g: &Group,
    p: f64,
    t: f64,
    resolution: usize,
    opts: &SolverOptions,
    tol: f64,
) -> Result<VerificationReport> {
    let base = solve_capacity(c, g, p, resolution, opts)?;
    base.ensure_converged()?;
    let scaled = solve_capacity(&c.dilated(g, t)?, g, p, resolution, opts)?;
    scaled.ensure_converged()?;
    let predicted = t.powf(g.hom_dim() as f64 - p) * base.value;
    let digest = format!("condenser={};p={p};t={t};resolution={resolution}", c.label());
    Ok(VerificationReport::agreement("capacity_scaling", Estimate::exact(scaled.value), Estimate::exact(predicted), tol, digest)
        .with_note(format!("ratio={:.6}", scaled.value / base.value)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        assert!((ring_capacity_oracle(2, 2.0, 1.0, std::f64::consts::E).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((ring_capacity_oracle(3, 2.0, 1.0, f64::INFINITY).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((ring_capacity_oracle(3, 2.0, 1.0, 2.0).unwrap() - 8.0 * PI).abs() < 1e-12);
        assert!(ring_capacity_oracle(2, 2.0, 1.0, 1.0 + 1e-9).unwrap() > 1e9);
        assert!(ring_capacity_oracle(2, 2.0, 2.0, 1.0).is_err());
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn oracle_matches_radial_quadrature() {
        // cp = ω (∫_r^R ρ^{(1−n)/(p−1)} dρ)^{1−p}
        for (n, p) in [(2usize, 3.0), (3, 1.5), (3, 4.0), (4, 2.5)] {
            let (r, big_r) = (0.7, 2.3);
            let m = 200_000;
            let hstep = (big_r - r) / m as f64;
            let integral: f64 = (0..m)
                .map(|i| (r + (i as f64 + 0.5) * hstep).powf((1.0 - n as f64) / (p - 1.0)) * hstep)
                .sum();
            let quad = sphere_area(n) * integral.powf(1.0 - p);
            let exact = ring_capacity_oracle(n, p, r, big_r).unwrap();
            assert!((quad / exact - 1.0).abs() < 1e-8, "n={n} p={p}: {quad} vs {exact}");
        }
    }

    #[test]
    fn discretize_examples() {
        let g = Group::abelian(2);
        let c = Condenser::ring(&g, &[0.0, 0.0], 1.0, 2.0).unwrap();
        let d = discretize(&c, &g, 64).unwrap();
        assert!(d.free_count() > 0);

        // Plates colliding at every node.
        let bad = Condenser::new(
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            Region::everything(),
            Region::ball(&g, &[0.0, 0.0], 0.5),
            Region::everything(),
            "",
        )
        .unwrap();
        assert!(matches!(discretize(&bad, &g, 8), Err(Error::Discretization(_))));

        // F1 far from D.
        let far = Condenser::new(
            vec![-4.0, -4.0],
            vec![4.0, 4.0],
            Region::ball(&g, &[0.0, 0.0], 4.0).complement(),
            Region::ball(&g, &[3.0, 3.0], 0.5),
            Region::open_ball(&g, &[-2.0, -2.0], 1.0),
            "",
        )
        .unwrap();
        assert!(matches!(discretize(&far, &g, 32), Err(Error::Discretization(_))));

        // Inner plate thinner than a cell.
        let thin = Condenser::ring(&g, &[0.0, 0.0], 0.01, 2.0).unwrap();
        assert!(matches!(discretize(&thin, &g, 9), Err(Error::Discretization(_))));
    }

    #[test]
    fn planar_ring_coarse() {
        let g = Group::abelian(2);
        let c = Condenser::ring(&g, &[0.0, 0.0], 1.0, std::f64::consts::E).unwrap();
        let r = solve_capacity(&c, &g, 2.0, 64, &SolverOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value / (2.0 * PI) - 1.0).abs() < 0.08, "{}", r.value);
        assert!(r.minimizer.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(solve_capacity(&c, &g, 1.0, 16, &SolverOptions::default()).is_err());
    }
}
