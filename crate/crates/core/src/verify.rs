//! Numerical checks of the capacity and norm inequalities satisfied by
//! mappings with bounded (p,q)-distortion.
//!
//! Every check solves or integrates both sides on grids, compares them
//! with a multiplicative slack on the right-hand side and keeps the raw
//! numbers in the report.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{distortion_coefficient, p_energy};
use crate::capacity::{CapacityCache, Condenser, SolverOptions};
use crate::discrete::SimplexEnergy;
use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, GridFunction, Region};
use crate::group::Group;
use crate::mapping::{count_preimages_in, image_domain, image_region, index_sum_in, multiplicity_on, MapRef, Mapping};
use crate::pushforward::{bump, image_support, push_forward, support_agreement, tilted_gaussian, wavy_bump, SupportComparison, TestFunction};
use crate::report::VerificationReport;
use crate::zoo;

pub const DEFAULT_SLACK: f64 = 0.10;

/// Exponents of the push-forward estimates: s = p/(p−(ν−1)),
/// r = q/(q−(ν−1)), 1/κ = 1/q − 1/p, the weight Λ and the index floor M(f,C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    pub p: f64,
    pub q: f64,
    pub nu: f64,
    pub r: f64,
    pub s: f64,
    /// `f64::INFINITY` when p = q
    pub kappa: f64,
    pub lambda: f64,
    pub m: f64,
}

impl Exponents {
    pub fn new(group: &Group, p: f64, q: f64) -> Result<Self> {
        let nu = group.hom_dim() as f64;
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponents must be finite, got p={p}, q={q}")));
        }
        if q > p {
            return Err(Error::Precondition(format!("need q <= p, got p={p}, q={q}")));
        }
        if !(q > nu - 1.0) {
            return Err(Error::Precondition(format!("need q > nu - 1 = {}, got q={q}", nu - 1.0)));
        }
        let kappa = if p == q { f64::INFINITY } else { 1.0 / (1.0 / q - 1.0 / p) };
        Ok(Exponents {
            p,
            q,
            nu,
            r: q / (q - (nu - 1.0)),
            s: p / (p - (nu - 1.0)),
            kappa,
            lambda: 1.0,
            m: 1.0,
        })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("weight must be positive, got {lambda}")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    /// Records M(f,C) and sets Λ = 1/M.
    pub fn with_index_floor(mut self, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::Precondition(format!("index floor M(f,C) must be positive, got {m}")));
        }
        self.m = m;
        self.lambda = 1.0 / m;
        Ok(self)
    }
}

/// inf over y ∈ f(C) of Σ i(z,f) over z ∈ f⁻¹(y) ∩ C, sampled at the
/// images of the grid nodes lying in C.
pub fn index_floor(f: &dyn Mapping, c: &Domain) -> Result<usize> {
    let grid = c.grid();
    let mut x = vec![0.0; grid.dim()];
    let mut best: Option<usize> = None;
    for i in 0..grid.node_count() {
        grid.node_coords(i, &mut x);
        if !c.contains(&x) {
            continue;
        }
        let m = index_sum_in(f, &f.eval(&x), c.region())?;
        best = Some(best.map_or(m, |b| b.min(m)));
    }
    best.ok_or_else(|| Error::Discretization("no grid node lies in C".into()))
}

/// Radius `r` ring condenser geometry: F₁ = B̄(c, r), D = B(c, R).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub center: Vec<f64>,
    pub r: f64,
    pub big_r: f64,
}

impl Ring {
    pub fn condenser(&self, g: &Group) -> Result<Condenser> {
        Condenser::ring(g, &self.center, self.r, self.big_r)
    }

    /// The open ball D on the ring's box.
    pub fn domain(&self, g: &Group, resolution: usize) -> Result<Domain> {
        let (lo, hi) = g.ball_bounding_box(&self.center, self.big_r);
        Ok(Domain::new(Grid::uniform(lo, hi, resolution)?, Region::open_ball(g, &self.center, self.big_r)))
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c: Vec<String> = self.center.iter().map(|v| v.to_string()).collect();
        write!(f, "ring(c={};r={};R={})", c.join(" "), self.r, self.big_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// cp_q(F₀,F₁;A)^{1/q} ≤ K_{p,q}(f;A) N(f,A)^{1/p} cp_p(f(F₀),f(F₁);f(A))^{1/p}
    CapacityComparison,
    /// cp_s(f(E))^{1/s} ≤ K_{p,q}(f;A)^{ν−1} cp_r(E)^{1/r}
    ImageCapacity,
    /// the same with the factor N(f,A)^{(s−1)/s} / M(f,C)
    ImageCapacityMultiplicity,
    /// ‖f_*u | L¹_s(f(D))‖ ≤ Λ N(f,D)^{(s−1)/s} K_{p,q}(f;D)^{ν−1} ‖u | L¹_r(D)‖
    PushforwardNorm,
    /// ‖u∘f | L¹_q(D)‖ ≤ K_{p,q}(f;D) (∫ |∇_H u|^p N(y,f,D) dy)^{1/p}
    Composition,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::CapacityComparison,
        Check::ImageCapacity,
        Check::ImageCapacityMultiplicity,
        Check::PushforwardNorm,
        Check::Composition,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Check::CapacityComparison => "capacity_comparison",
            Check::ImageCapacity => "image_capacity",
            Check::ImageCapacityMultiplicity => "image_capacity_multiplicity",
            Check::PushforwardNorm => "pushforward_norm",
            Check::Composition => "composition",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown check '{s}'")))
    }
}

/// One line of a suite manifest.
#[derive(Debug, Clone)]
pub struct SuiteItem {
    pub check: Check,
    pub group: Group,
    /// zoo name with parameters, e.g. `winding(k=2)`
    pub map: String,
    pub ring: Ring,
    pub p: f64,
    pub q: f64,
}

impl SuiteItem {
    pub fn label(&self) -> String {
        format!("{}|{}|{}|{}|p={}|q={}", self.check, self.group.kind(), self.map, self.ring, self.p, self.q)
    }
}

pub struct SuiteOutcome {
    pub item: SuiteItem,
    pub result: Result<Vec<VerificationReport>>,
}

/// Push-forward check with the computed v and the support comparison.
pub struct PushforwardOutcome {
    pub report: VerificationReport,
    pub support: SupportComparison,
    pub pushed: GridFunction,
}

/// Cp_s(f(A_k), f(C)) along an exhaustion by balls.
#[derive(Debug, Clone, Serialize)]
pub struct LiouvilleTable {
    pub map: String,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub radii: Vec<f64>,
    pub capacities: Vec<f64>,
    pub iterations: Vec<usize>,
    /// first capacity over last
    pub decay: f64,
    /// nonincreasing up to the relative tolerance `10·tol`
    pub monotone: bool,
}

impl LiouvilleTable {
    pub const CSV_HEADER: &'static str = "map,p,q,s,radius,capacity,iterations";

    pub fn csv_rows(&self) -> Vec<String> {
        self.radii
            .iter()
            .zip(&self.capacities)
            .zip(&self.iterations)
            .map(|((r, c), it)| {
                format!(
                    "{},{},{},{},{},{:.12e},{}",
                    crate::report::csv_field(&self.map),
                    self.p,
                    self.q,
                    self.s,
                    r,
                    c,
                    it
                )
            })
            .collect()
    }
}

/// Runs the checks with a shared capacity cache, so the same condenser
/// and exponent is solved once across a suite.
pub struct Verifier {
    pub resolution: usize,
    pub slack: f64,
    pub opts: SolverOptions,
    cache: CapacityCache,
}

impl Verifier {
    pub fn new(resolution: usize, slack: f64) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::InvalidParameter(format!("resolution must be at least 4, got {resolution}")));
        }
        if !(slack >= 0.0) || !slack.is_finite() {
            return Err(Error::InvalidParameter(format!("slack must be a nonnegative number, got {slack}")));
        }
        Ok(Verifier { resolution, slack, opts: SolverOptions::default(), cache: CapacityCache::new() })
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn cache(&self) -> &CapacityCache {
        &self.cache
    }

    fn capacity(&self, c: &Condenser, g: &Group, p: f64, resolution: usize) -> Result<(f64, usize)> {
        let r = self.cache.solve(c, g, p, resolution, &self.opts)?;
        r.ensure_converged()?;
        Ok((r.value, r.iterations))
    }

    fn source_domain(&self, c: &Condenser) -> Result<Domain> {
        Ok(Domain::new(Grid::uniform(c.lo().to_vec(), c.hi().to_vec(), self.resolution)?, c.d().clone()))
    }

    fn digest(&self, f: &dyn Mapping, what: &str, p: f64, q: f64, resolution: usize) -> String {
        format!("map={};{what};p={p};q={q};resolution={resolution}", f.name())
    }

    /// f(E) = (∂f(D), f(F₁); f(D)) as a predicate condenser. The box is the
    /// exact image box when the mapping has one (then grids correspond node
    /// to node), otherwise the sampled bounding box of f(D ∪ F₁).
    pub fn image_condenser(&self, f: &MapRef, c: &Condenser) -> Result<Condenser> {
        if f.name() == "identity" {
            return Ok(c.clone());
        }
        let (lo, hi) = match f.image_box(c.lo(), c.hi()) {
            Some(b) => b,
            None => {
                let grid = Grid::uniform(c.lo().to_vec(), c.hi().to_vec(), self.resolution)?;
                crate::mapping::image_bounding_box(f.as_ref(), &Domain::new(grid, c.d().or(c.f1())))
            }
        };
        let u = image_region(f.clone(), c.d().clone());
        let plate = image_region(f.clone(), c.f1().clone());
        Condenser::from_open_set(lo, hi, u, plate, format!("{}<{}>", f.name(), c.label()))
    }

    pub fn capacity_comparison(&self, f: &MapRef, c: &Condenser, p: f64, q: f64) -> Result<VerificationReport> {
        if !(q > 1.0 && q <= p) {
            return Err(Error::Precondition(format!("need 1 < q <= p, got p={p}, q={q}")));
        }
        let g = f.group();
        let a = self.source_domain(c)?;
        let k = distortion_coefficient(f.as_ref(), &a, p, q)?.coefficient;
        let n = multiplicity_on(f.as_ref(), &a)? as f64;
        let (cq, _) = self.capacity(c, g, q, self.resolution)?;
        let image = self.image_condenser(f, c)?;
        let (cp, _) = self.capacity(&image, g, p, self.resolution)?;
        let lhs = cq.powf(1.0 / q);
        let rhs = k * n.powf(1.0 / p) * cp.powf(1.0 / p);
        let digest = self.digest(f.as_ref(), &format!("condenser={}", c.label()), p, q, self.resolution);
        Ok(VerificationReport::inequality(Check::CapacityComparison.as_str(), lhs, rhs, self.slack, digest)
            .with_note(format!("K={k:.6e}"))
            .with_note(format!("N={n}"))
            .with_note(format!("cp_q(E)={cq:.6e}"))
            .with_note(format!("cp_p(fE)={cp:.6e}")))
    }

    pub fn image_capacity(&self, f: &MapRef, c: &Condenser, p: f64, q: f64) -> Result<VerificationReport> {
        self.image_capacity_impl(f, c, p, q, false)
    }

    pub fn image_capacity_multiplicity(&self, f: &MapRef, c: &Condenser, p: f64, q: f64) -> Result<VerificationReport> {
        self.image_capacity_impl(f, c, p, q, true)
    }

    fn image_capacity_impl(&self, f: &MapRef, c: &Condenser, p: f64, q: f64, with_multiplicity: bool) -> Result<VerificationReport> {
        let g = f.group();
        let mut ex = Exponents::new(g, p, q)?;
        let a = self.source_domain(c)?;
        let k = distortion_coefficient(f.as_ref(), &a, p, q)?.coefficient;
        let image = self.image_condenser(f, c)?;
        let (cs, _) = self.capacity(&image, g, ex.s, self.resolution)?;
        let (cr, _) = self.capacity(c, g, ex.r, self.resolution)?;
        let lhs = cs.powf(1.0 / ex.s);
        let mut rhs = k.powf(ex.nu - 1.0) * cr.powf(1.0 / ex.r);
        let mut notes = vec![format!("s={}", ex.s), format!("r={}", ex.r), format!("K={k:.6e}")];
        let id = if with_multiplicity {
            let n = multiplicity_on(f.as_ref(), &a)? as f64;
            let plate = Domain::new(a.grid().clone(), c.f1().clone());
            ex = ex.with_index_floor(index_floor(f.as_ref(), &plate)? as f64)?;
            rhs *= n.powf((ex.s - 1.0) / ex.s) / ex.m;
            notes.push(format!("N={n}"));
            notes.push(format!("M={}", ex.m));
            Check::ImageCapacityMultiplicity
        } else {
            Check::ImageCapacity
        };
        notes.push(format!("cp_s(fE)={cs:.6e}"));
        notes.push(format!("cp_r(E)={cr:.6e}"));
        let digest = self.digest(f.as_ref(), &format!("condenser={}", c.label()), p, q, self.resolution);
        let mut report = VerificationReport::inequality(id.as_str(), lhs, rhs, self.slack, digest);
        report.notes = notes;
        Ok(report)
    }

    /// Pushes `u` (sampled on the domain's grid) forward with weight Λ onto a
    /// grid over f(D) of the same per-axis resolution. The report fails when
    /// either the norm inequality or the support comparison fails.
    pub fn pushforward_norm(&self, f: &MapRef, u: &TestFunction, d: &Domain, p: f64, q: f64, lambda: f64) -> Result<PushforwardOutcome> {
        let g = f.group();
        let ex = Exponents::new(g, p, q)?.with_lambda(lambda)?;
        let ug = u.sample(d.grid());
        let mut x = vec![0.0; g.total_dim()];
        let outside = ug.values().iter().enumerate().any(|(i, v)| {
            d.grid().node_coords(i, &mut x);
            *v != 0.0 && !d.contains(&x)
        });
        if outside {
            return Err(Error::Precondition("supp u is not contained in D".into()));
        }
        let target = image_domain(f.clone(), d)?;
        let v = push_forward(f.as_ref(), &ug, ex.lambda, target.grid())?;
        let support = support_agreement(&v, &image_support(f.clone(), u));
        let k = distortion_coefficient(f.as_ref(), d, p, q)?.coefficient;
        let n = multiplicity_on(f.as_ref(), d)? as f64;
        let lhs = p_energy(g, &v, ex.s, &Region::everything())?.powf(1.0 / ex.s);
        let norm_u = p_energy(g, &ug, ex.r, d.region())?.powf(1.0 / ex.r);
        let rhs = ex.lambda * n.powf((ex.s - 1.0) / ex.s) * k.powf(ex.nu - 1.0) * norm_u;
        let digest = self.digest(f.as_ref(), &format!("u={}", u.label), p, q, d.grid().cells()[0]);
        let mut report = VerificationReport::inequality(Check::PushforwardNorm.as_str(), lhs, rhs, self.slack, digest)
            .with_note(format!("s={}", ex.s))
            .with_note(format!("r={}", ex.r))
            .with_note(format!("K={k:.6e}"))
            .with_note(format!("N={n}"))
            .with_note(format!("Lambda={}", ex.lambda))
            .with_note(format!("support_spurious={}", support.spurious))
            .with_note(format!("support_missing={}", support.missing));
        report.pass = report.pass && support.agrees();
        Ok(PushforwardOutcome { report, support, pushed: v })
    }

    /// Composition bound for `u` given on the image side.
    pub fn composition(&self, f: &MapRef, u: &TestFunction, d: &Domain, p: f64, q: f64) -> Result<VerificationReport> {
        if !(q >= 1.0 && q <= p) {
            return Err(Error::Precondition(format!("need 1 <= q <= p, got p={p}, q={q}")));
        }
        let g = f.group();
        let w = GridFunction::from_fn(d.grid().clone(), |x| (u.eval)(&f.eval(x)));
        let lhs = p_energy(g, &w, q, d.region())?.powf(1.0 / q);
        let target = image_domain(f.clone(), d)?;
        let probe = target.grid().node_point(0);
        count_preimages_in(f.as_ref(), &probe, d)?;
        let weights = target.grid().cell_average(|y| count_preimages_in(f.as_ref(), y, d).unwrap_or(0) as f64);
        let ut = u.sample(target.grid());
        let energy = SimplexEnergy::new(g, target.grid(), &weights, |_| true).evaluate(ut.values(), p, 0.0, None, None);
        let k = distortion_coefficient(f.as_ref(), d, p, q)?.coefficient;
        let rhs = k * energy.powf(1.0 / p);
        let digest = self.digest(f.as_ref(), &format!("u={}", u.label), p, q, d.grid().cells()[0]);
        Ok(VerificationReport::inequality(Check::Composition.as_str(), lhs, rhs, self.slack, digest)
            .with_note(format!("K={k:.6e}")))
    }

    /// cp_s(f(B(c,R_k)), f(B̄(c,ρ))) for increasing R_k, with
    /// ν−1 < q ≤ p ≤ ν. Outside that range the experiment is refused.
    #[allow(clippy::too_many_arguments)]
    pub fn liouville_decay(
        &self,
        f: &MapRef,
        center: &[f64],
        c_radius: f64,
        radii: &[f64],
        p: f64,
        q: f64,
        resolution: usize,
    ) -> Result<LiouvilleTable> {
        let g = f.group();
        let ex = Exponents::new(g, p, q)?;
        if p > ex.nu {
            return Err(Error::Precondition(format!("out of hypothesis: need p <= nu = {}, got p={p}", ex.nu)));
        }
        if radii.is_empty() || radii.windows(2).any(|w| !(w[0] < w[1])) || !(radii[0] > c_radius) {
            return Err(Error::InvalidParameter("radii must increase and exceed the plate radius".into()));
        }
        let mut capacities = Vec::new();
        let mut iterations = Vec::new();
        for &big_r in radii {
            let c = Condenser::ring(g, center, c_radius, big_r)?;
            let image = self.image_condenser(f, &c)?;
            let (v, it) = self.capacity(&image, g, ex.s, resolution)?;
            capacities.push(v);
            iterations.push(it);
        }
        let tol = 10.0 * self.opts.tol;
        let monotone = capacities.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol));
        Ok(LiouvilleTable {
            map: f.name(),
            p,
            q,
            s: ex.s,
            radii: radii.to_vec(),
            decay: capacities[0] / capacities[capacities.len() - 1],
            capacities,
            iterations,
            monotone,
        })
    }

    /// Test functions on the image side for the composition check: a bump,
    /// a modulated bump and a non-compact Gaussian around f(c).
    pub fn composition_functions(&self, f: &dyn Mapping, ring: &Ring) -> Vec<TestFunction> {
        let g = f.group();
        let y0 = f.eval(&ring.center);
        let d = match ring.domain(g, 32) {
            Ok(d) => d,
            Err(_) => return Vec::new(),
        };
        let (lo, hi) = crate::mapping::image_bounding_box(f, &d);
        let n1 = g.horizontal_dim();
        let mut half = f64::INFINITY;
        for k in 0..lo.len() {
            let w = 0.5 * (hi[k] - lo[k]);
            half = half.min(if k < n1 { w } else { w.sqrt() });
        }
        let rad = 0.6 * half;
        vec![bump(g, &y0, rad), wavy_bump(g, &y0, rad, 3.0 / rad), tilted_gaussian(g, &y0, rad)]
    }

    /// Runs one manifest line.
    pub fn run_item(&self, item: &SuiteItem) -> Result<Vec<VerificationReport>> {
        let entry = zoo::by_name(&item.group, &item.map)?;
        let f = entry.map.clone();
        match item.check {
            Check::CapacityComparison => Ok(vec![self.capacity_comparison(&f, &item.ring.condenser(&item.group)?, item.p, item.q)?]),
            Check::ImageCapacity => Ok(vec![self.image_capacity(&f, &item.ring.condenser(&item.group)?, item.p, item.q)?]),
            Check::ImageCapacityMultiplicity => {
                Ok(vec![self.image_capacity_multiplicity(&f, &item.ring.condenser(&item.group)?, item.p, item.q)?])
            }
            Check::PushforwardNorm => {
                let d = item.ring.domain(&item.group, self.resolution)?;
                let u = bump(&item.group, &item.ring.center, 0.8 * item.ring.big_r);
                Ok(vec![self.pushforward_norm(&f, &u, &d, item.p, item.q, 1.0)?.report])
            }
            Check::Composition => {
                let d = item.ring.domain(&item.group, self.resolution)?;
                self.composition_functions(f.as_ref(), &item.ring)
                    .iter()
                    .map(|u| self.composition(&f, u, &d, item.p, item.q))
                    .collect()
            }
        }
    }

    /// Runs the items in parallel; outcomes come back sorted by label.
    pub fn run_suite(&self, items: &[SuiteItem]) -> Vec<SuiteOutcome> {
        let mut out: Vec<SuiteOutcome> = items
            .par_iter()
            .map(|item| SuiteOutcome { item: item.clone(), result: self.run_item(item) })
            .collect();
        out.sort_by_key(|o| o.item.label());
        out
    }
}
