//! Analytic example mappings with exact differentials, Jacobians,
//! preimages, indices and branch sets, plus sphere-sampling estimators of
//! linear distortion.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::calculus::{distortion_coefficient, jacobian_from_hdiff};
use crate::error::{Error, Result};
use crate::grid::{Domain, Grid, Region};
use crate::group::{Group, GroupKind};
use crate::mapping::{MapRef, Mapping};
use crate::stats::Running;

/// Parameters of a zoo mapping.
#[derive(Debug, Clone, PartialEq)]
pub enum ZooKind {
    Identity,
    Translation(Vec<f64>),
    Dilation(f64),
    /// Heisenberg rotation of every (xᵢ, yᵢ) plane
    Rotation(f64),
    Linear(DMatrix<f64>),
    Winding(u32),
    RadialPower(f64),
    Anisotropic(f64, f64),
}

/// Closed exponent box `p_min ≤ q ≤ p ≤ p_max`, `q ≥ q_min`, with `q_min`
/// excluded when `q_open`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentRange {
    pub q_min: f64,
    pub q_open: bool,
    pub p_max: f64,
}

impl ExponentRange {
    pub fn all() -> Self {
        ExponentRange { q_min: 1.0, q_open: false, p_max: f64::INFINITY }
    }

    pub fn admits(&self, p: f64, q: f64) -> bool {
        let q_ok = if self.q_open { q > self.q_min } else { q >= self.q_min };
        q_ok && q <= p && p <= self.p_max
    }
}

impl fmt::Display for ExponentRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.q_open { "<" } else { "<=" };
        if self.p_max.is_finite() {
            write!(f, "{} {open} q <= p <= {}", self.q_min, self.p_max)
        } else {
            write!(f, "{} {open} q <= p", self.q_min)
        }
    }
}

#[derive(Clone)]
pub struct ZooEntry {
    pub name: String,
    pub kind: ZooKind,
    pub map: MapRef,
    pub admissible: ExponentRange,
    pub kp_formula: String,
    pub notes: String,
}

impl fmt::Debug for ZooEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZooEntry").field("name", &self.name).field("group", self.map.group()).finish()
    }
}

impl ZooEntry {
    pub fn group(&self) -> &Group {
        self.map.group()
    }

    /// The analytic K_p(x, f).
    pub fn analytic_kp(&self, x: &[f64], p: f64) -> f64 {
        let nu = self.group().hom_dim() as f64;
        match &self.kind {
            ZooKind::Identity | ZooKind::Translation(_) | ZooKind::Rotation(_) => 1.0,
            ZooKind::Dilation(t) => t.powf(1.0 - nu / p),
            ZooKind::Linear(a) => {
                a.clone().svd(false, false).singular_values.max() / a.determinant().powf(1.0 / p)
            }
            ZooKind::Winding(k) => (*k as f64).powf(1.0 - 1.0 / p),
            ZooKind::RadialPower(alpha) => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                alpha.max(1.0) * alpha.powf(-1.0 / p) * r.powf((alpha - 1.0) * (1.0 - nu / p))
            }
            ZooKind::Anisotropic(a, b) => {
                let n = self.group().horizontal_dim() as f64 / 2.0;
                a.max(*b) / (a * b).powf((n + 1.0) / p)
            }
        }
    }
}

fn entry(kind: ZooKind, map: MapRef, admissible: ExponentRange, kp_formula: &str, notes: &str) -> ZooEntry {
    ZooEntry {
        name: map.name(),
        kind,
        map,
        admissible,
        kp_formula: kp_formula.to_string(),
        notes: notes.to_string(),
    }
}

pub fn identity(g: &Group) -> ZooEntry {
    entry(
        ZooKind::Identity,
        Arc::new(Identity { group: g.clone() }),
        ExponentRange::all(),
        "K_p = 1",
        "N = 1, no branch points",
    )
}

pub fn left_translation(g: &Group, a: &[f64]) -> Result<ZooEntry> {
    g.check(a)?;
    Ok(entry(
        ZooKind::Translation(a.to_vec()),
        Arc::new(Translation { group: g.clone(), a: a.to_vec(), a_inv: g.inverse(a)?.into_inner() }),
        ExponentRange::all(),
        "K_p = 1",
        "isometry of d, N = 1",
    ))
}

pub fn dilation(g: &Group, t: f64) -> Result<ZooEntry> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("dilation factor must be positive, got {t}")));
    }
    Ok(entry(
        ZooKind::Dilation(t),
        Arc::new(Dilation { group: g.clone(), t }),
        ExponentRange::all(),
        "K_p = t^(1-nu/p)",
        "conformal at p = nu, N = 1",
    ))
}

pub fn rotation(g: &Group, phi: f64) -> Result<ZooEntry> {
    if g.is_abelian() {
        return Err(Error::InvalidParameter("rotation is the Heisenberg fixture; use linear on R^n".into()));
    }
    Ok(entry(
        ZooKind::Rotation(phi),
        Arc::new(Rotation { group: g.clone(), phi }),
        ExponentRange::all(),
        "K_p = 1",
        "automorphism rotating each (x_i, y_i) plane",
    ))
}

pub fn linear(g: &Group, a: DMatrix<f64>) -> Result<ZooEntry> {
    let n = match g.kind() {
        GroupKind::Abelian(n) => n,
        GroupKind::Heisenberg(_) => return Err(Error::InvalidParameter("linear maps are abelian fixtures".into())),
    };
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
    }
    let det = a.determinant();
    if !(det > 0.0) {
        return Err(Error::InvalidParameter(format!("linear fixture needs det A > 0, got {det}")));
    }
    let inv = a.clone().try_inverse().expect("nonzero determinant");
    Ok(entry(
        ZooKind::Linear(a.clone()),
        Arc::new(Linear { group: g.clone(), a, inv }),
        ExponentRange::all(),
        "K_p = |A| / det(A)^(1/p)",
        "N = 1",
    ))
}

pub fn winding(k: u32) -> Result<ZooEntry> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("winding number must be >= 2, got {k}")));
    }
    Ok(entry(
        ZooKind::Winding(k),
        Arc::new(Winding { group: Group::abelian(2), k }),
        ExponentRange::all(),
        "K_p = k^(1-1/p), K_2 = sqrt(k)",
        "planar; B_f = {0}, i(0) = k, N = k on annuli about 0",
    ))
}

pub fn radial_power(g: &Group, alpha: f64) -> Result<ZooEntry> {
    let n = match g.kind() {
        GroupKind::Abelian(n) => n,
        GroupKind::Heisenberg(_) => return Err(Error::InvalidParameter("radial power is an abelian fixture".into())),
    };
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("radial power needs alpha > 0, got {alpha}")));
    }
    Ok(entry(
        ZooKind::RadialPower(alpha),
        Arc::new(RadialPower { group: g.clone(), alpha }),
        radial_power_range(n, alpha),
        "K_p = max(a,1) a^(-1/p) |x|^((a-1)(1-n/p))",
        "domain is the punctured unit ball",
    ))
}

/// The (p, q) with K_p ∈ L_κ(B(0,1)): κ·e + n > 0 where e = (α−1)(1−n/p),
/// or e ≥ 0 when p = q. Reported conservatively as a box.
fn radial_power_range(n: usize, alpha: f64) -> ExponentRange {
    if alpha >= 1.0 {
        // e ≥ 0 iff p ≥ n; below that K_p blows up at 0 like |x|^e.
        ExponentRange { q_min: n as f64, q_open: false, p_max: f64::INFINITY }
    } else {
        ExponentRange { q_min: 1.0, q_open: false, p_max: n as f64 }
    }
}

/// Whether the radial power distortion K_p lies in L_κ on the unit ball.
pub fn radial_power_admits(n: usize, alpha: f64, p: f64, q: f64) -> bool {
    let e = (alpha - 1.0) * (1.0 - n as f64 / p);
    if q == p {
        e >= 0.0
    } else {
        let kappa = 1.0 / (1.0 / q - 1.0 / p);
        kappa * e + n as f64 > 0.0
    }
}

/// ‖K_p | L_κ(B(0,1))‖ for the radial power, in closed form.
pub fn radial_power_coefficient(n: usize, alpha: f64, p: f64, q: f64) -> f64 {
    let c = alpha.max(1.0) * alpha.powf(-1.0 / p);
    let e = (alpha - 1.0) * (1.0 - n as f64 / p);
    if q == p {
        return c;
    }
    let kappa = 1.0 / (1.0 / q - 1.0 / p);
    let w = crate::capacity::sphere_area(n);
    (c.powf(kappa) * w / (kappa * e + n as f64)).powf(1.0 / kappa)
}

pub fn anisotropic(g: &Group, a: f64, b: f64) -> Result<ZooEntry> {
    if g.is_abelian() {
        return Err(Error::InvalidParameter("anisotropic map is a Heisenberg fixture".into()));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!("anisotropic map needs a, b > 0, got a={a}, b={b}")));
    }
    Ok(entry(
        ZooKind::Anisotropic(a, b),
        Arc::new(Anisotropic { group: g.clone(), a, b }),
        ExponentRange::all(),
        "K_p = max(a,b) / (ab)^((n+1)/p)",
        "contact, not conformal unless a = b",
    ))
}

/// Looks up `name(key=value, ...)` on `group`. Vectors and matrices use
/// spaces between entries and `;` between rows.
pub fn by_name(group: &Group, text: &str) -> Result<ZooEntry> {
    let text = text.trim();
    let (head, args) = match text.find('(') {
        Some(i) if text.ends_with(')') => (&text[..i], &text[i + 1..text.len() - 1]),
        Some(_) => return Err(Error::Config(format!("malformed zoo entry '{text}'"))),
        None => (text, ""),
    };
    let mut params = Vec::new();
    for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("zoo parameter '{part}' is not key=value")))?;
        params.push((k.trim().to_string(), v.trim().to_string()));
    }
    let get = |key: &str| -> Result<&str> {
        params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Config(format!("zoo entry '{head}' needs parameter '{key}'")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?.parse::<f64>().map_err(|_| Error::Config(format!("parameter '{key}' is not a number")))
    };
    let vector = |s: &str| -> Result<Vec<f64>> {
        s.split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| Error::Config(format!("bad number '{v}'"))))
            .collect()
    };
    let e = match head {
        "identity" => identity(group),
        "translation" => left_translation(group, &vector(get("a")?)?)?,
        "dilation" => dilation(group, num("t")?)?,
        "rotation" => rotation(group, num("phi")?)?,
        "linear" => {
            let rows: Vec<Vec<f64>> = get("A")?.split(';').map(vector).collect::<Result<_>>()?;
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config("linear matrix must be square".into()));
            }
            linear(group, DMatrix::from_fn(n, n, |i, j| rows[i][j]))?
        }
        "winding" => {
            if *group != Group::abelian(2) {
                return Err(Error::Config("winding lives on R2".into()));
            }
            let k = num("k")?;
            if k.fract() != 0.0 || k < 0.0 {
                return Err(Error::Config(format!("winding number must be an integer, got {k}")));
            }
            winding(k as u32)?
        }
        "radial_power" => radial_power(group, num("alpha")?)?,
        "anisotropic" => anisotropic(group, num("a")?, num("b")?)?,
        _ => return Err(Error::Config(format!("unknown zoo entry '{head}'"))),
    };
    Ok(e)
}

/// Every fixture in a fixed order, with representative parameters.
pub fn catalogue() -> Vec<ZooEntry> {
    let r2 = Group::abelian(2);
    let r3 = Group::abelian(3);
    let h1 = Group::heisenberg(1);
    let mut out = vec![
        identity(&r2),
        identity(&r3),
        identity(&h1),
        left_translation(&h1, &[1.0, 0.0, 0.0]).unwrap(),
        dilation(&r2, 2.0).unwrap(),
        dilation(&h1, 2.0).unwrap(),
        rotation(&h1, PI / 6.0).unwrap(),
        linear(&r2, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap(),
        linear(&r2, DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 3.0])).unwrap(),
    ];
    for k in [2, 3] {
        out.push(winding(k).unwrap());
    }
    out.push(radial_power(&r2, 2.0).unwrap());
    out.push(radial_power(&r2, 0.5).unwrap());
    out.push(anisotropic(&h1, 2.0, 1.0).unwrap());
    out
}

/// Deterministic table of the catalogue, optionally filtered by substring.
pub fn list_zoo(filter: &str) -> String {
    let mut s = String::from("group\tname\tadmissible (p,q)\tK_p\tnotes\n");
    for e in catalogue() {
        if !filter.is_empty() && !e.name.contains(filter) {
            continue;
        }
        s.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", e.group().kind(), e.name, e.admissible, e.kp_formula, e.notes));
    }
    s
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

struct Identity {
    group: Group,
}

impl Mapping for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn hdiff(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.group.horizontal_dim(), self.group.horizontal_dim())
    }
    fn jacobian(&self, _x: &[f64]) -> f64 {
        1.0
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(vec![y.to_vec()])
    }
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((lo.to_vec(), hi.to_vec()))
    }
}

struct Translation {
    group: Group,
    a: Vec<f64>,
    a_inv: Vec<f64>,
}

impl Mapping for Translation {
    fn name(&self) -> String {
        let v: Vec<String> = self.a.iter().map(|x| fmt_num(*x)).collect();
        format!("translation(a={})", v.join(" "))
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.group.compose(&self.a, x).expect("valid point").into_inner()
    }
    fn hdiff(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.group.horizontal_dim(), self.group.horizontal_dim())
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(vec![self.group.compose(&self.a_inv, y).ok()?.into_inner()])
    }
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        // A pure shift only when the horizontal part of `a` vanishes or the group is abelian.
        let n1 = self.group.horizontal_dim();
        if self.group.is_abelian() || self.a[..n1].iter().all(|v| *v == 0.0) {
            Some((
                lo.iter().zip(&self.a).map(|(l, a)| l + a).collect(),
                hi.iter().zip(&self.a).map(|(h, a)| h + a).collect(),
            ))
        } else {
            None
        }
    }
}

struct Dilation {
    group: Group,
    t: f64,
}

impl Mapping for Dilation {
    fn name(&self) -> String {
        format!("dilation(t={})", fmt_num(self.t))
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.group.dilate_in_place(self.t, &mut y);
        y
    }
    fn hdiff(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.group.horizontal_dim(), self.group.horizontal_dim()) * self.t
    }
    fn jacobian(&self, _x: &[f64]) -> f64 {
        self.t.powi(self.group.hom_dim() as i32)
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        let mut x = y.to_vec();
        self.group.dilate_in_place(1.0 / self.t, &mut x);
        Some(vec![x])
    }
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.eval(lo), self.eval(hi)))
    }
}

struct Rotation {
    group: Group,
    phi: f64,
}

impl Rotation {
    fn rotate(&self, x: &[f64], phi: f64) -> Vec<f64> {
        let n = self.group.horizontal_dim() / 2;
        let (c, s) = (phi.cos(), phi.sin());
        let mut y = x.to_vec();
        for i in 0..n {
            y[i] = c * x[i] - s * x[n + i];
            y[n + i] = s * x[i] + c * x[n + i];
        }
        y
    }
}

impl Mapping for Rotation {
    fn name(&self) -> String {
        format!("rotation(phi={})", fmt_num(self.phi))
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rotate(x, self.phi)
    }
    fn hdiff(&self, _x: &[f64]) -> DMatrix<f64> {
        let n1 = self.group.horizontal_dim();
        let n = n1 / 2;
        let (c, s) = (self.phi.cos(), self.phi.sin());
        let mut m = DMatrix::zeros(n1, n1);
        for i in 0..n {
            m[(i, i)] = c;
            m[(i, n + i)] = -s;
            m[(n + i, i)] = s;
            m[(n + i, n + i)] = c;
        }
        m
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(vec![self.rotate(y, -self.phi)])
    }
}

struct Linear {
    group: Group,
    a: DMatrix<f64>,
    inv: DMatrix<f64>,
}

fn is_diagonal(a: &DMatrix<f64>) -> bool {
    (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] == 0.0))
}

impl Mapping for Linear {
    fn name(&self) -> String {
        let rows: Vec<String> = (0..self.a.nrows())
            .map(|i| (0..self.a.ncols()).map(|j| fmt_num(self.a[(i, j)])).collect::<Vec<_>>().join(" "))
            .collect();
        format!("linear(A={})", rows.join(";"))
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (&self.a * nalgebra::DVector::from_column_slice(x)).iter().cloned().collect()
    }
    fn hdiff(&self, _x: &[f64]) -> DMatrix<f64> {
        self.a.clone()
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(vec![(&self.inv * nalgebra::DVector::from_column_slice(y)).iter().cloned().collect()])
    }
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if is_diagonal(&self.a) && (0..self.a.nrows()).all(|i| self.a[(i, i)] > 0.0) {
            Some((self.eval(lo), self.eval(hi)))
        } else {
            None
        }
    }
}

/// (ρ, θ) ↦ (ρ, kθ) on ℝ².
struct Winding {
    group: Group,
    k: u32,
}

impl Mapping for Winding {
    fn name(&self) -> String {
        format!("winding(k={})", self.k)
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let rho = x[0].hypot(x[1]);
        let theta = x[1].atan2(x[0]) * self.k as f64;
        vec![rho * theta.cos(), rho * theta.sin()]
    }
    /// R(kθ) · diag(1, k) · R(θ)ᵀ, taking θ = 0 at the origin.
    fn hdiff(&self, x: &[f64]) -> DMatrix<f64> {
        let theta = if x[0] == 0.0 && x[1] == 0.0 { 0.0 } else { x[1].atan2(x[0]) };
        let k = self.k as f64;
        let rot = |a: f64| DMatrix::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()]);
        rot(k * theta) * DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, k]) * rot(theta).transpose()
    }
    fn jacobian(&self, _x: &[f64]) -> f64 {
        self.k as f64
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        let rho = y[0].hypot(y[1]);
        if rho == 0.0 {
            return Some(vec![vec![0.0, 0.0]]);
        }
        let phi = y[1].atan2(y[0]);
        let k = self.k as f64;
        Some(
            (0..self.k)
                .map(|j| {
                    let a = (phi + 2.0 * PI * j as f64) / k;
                    vec![rho * a.cos(), rho * a.sin()]
                })
                .collect(),
        )
    }
    fn index(&self, x: &[f64]) -> usize {
        if x[0] == 0.0 && x[1] == 0.0 {
            self.k as usize
        } else {
            1
        }
    }
    fn in_branch_set(&self, x: &[f64]) -> bool {
        x[0] == 0.0 && x[1] == 0.0
    }
    fn max_multiplicity(&self) -> usize {
        self.k as usize
    }
}

/// x ↦ x|x|^{α−1} on ℝⁿ.
struct RadialPower {
    group: Group,
    alpha: f64,
}

impl Mapping for RadialPower {
    fn name(&self) -> String {
        format!("radial_power(alpha={})", fmt_num(self.alpha))
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return x.to_vec();
        }
        let s = r.powf(self.alpha - 1.0);
        x.iter().map(|v| v * s).collect()
    }
    /// |x|^{α−1} (I + (α−1) x̂ x̂ᵀ).
    fn hdiff(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            let s = if self.alpha > 1.0 {
                0.0
            } else if self.alpha == 1.0 {
                1.0
            } else {
                f64::INFINITY
            };
            return DMatrix::identity(n, n) * s;
        }
        let s = r.powf(self.alpha - 1.0);
        DMatrix::from_fn(n, n, |i, j| {
            s * ((i == j) as u8 as f64 + (self.alpha - 1.0) * x[i] * x[j] / (r * r))
        })
    }
    fn jacobian(&self, x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.alpha * r.powf(n * (self.alpha - 1.0))
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Some(vec![y.to_vec()]);
        }
        let s = r.powf(1.0 / self.alpha - 1.0);
        Some(vec![y.iter().map(|v| v * s).collect()])
    }
}

/// (x, y, t) ↦ (a x, b y, ab t) on ℍⁿ.
struct Anisotropic {
    group: Group,
    a: f64,
    b: f64,
}

impl Anisotropic {
    fn scales(&self, inverse: bool) -> Vec<f64> {
        let n = self.group.horizontal_dim() / 2;
        let (a, b) = if inverse { (1.0 / self.a, 1.0 / self.b) } else { (self.a, self.b) };
        let mut s = vec![a; n];
        s.extend(std::iter::repeat_n(b, n));
        s.push(a * b);
        s
    }
}

impl Mapping for Anisotropic {
    fn name(&self) -> String {
        format!("anisotropic(a={},b={})", fmt_num(self.a), fmt_num(self.b))
    }
    fn group(&self) -> &Group {
        &self.group
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.scales(false)).map(|(v, s)| v * s).collect()
    }
    fn hdiff(&self, _x: &[f64]) -> DMatrix<f64> {
        let s = self.scales(false);
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&s[..s.len() - 1]))
    }
    fn preimages(&self, y: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(vec![y.iter().zip(self.scales(true)).map(|(v, s)| v * s).collect()])
    }
    fn image_box(&self, lo: &[f64], hi: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.eval(lo), self.eval(hi)))
    }
}

/// L(x, r) / l(x, r) along a radius list.
#[derive(Debug, Clone, Serialize)]
pub struct LinearDistortion {
    pub radii: Vec<f64>,
    pub big_l: Vec<f64>,
    pub small_l: Vec<f64>,
    pub ratios: Vec<f64>,
    /// max of the ratios over the smallest quarter of the radii
    pub limsup: f64,
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidParameter("radii must be positive and nonempty".into()));
    }
    let max = radii.iter().cloned().fold(0.0, f64::max);
    let min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    if max / min < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter("radius list must span at least two decades".into()));
    }
    Ok(())
}

/// Indices of the smallest ⌈len/4⌉ radii.
fn smallest_quartile(radii: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..radii.len()).collect();
    idx.sort_by(|a, b| radii[*a].partial_cmp(&radii[*b]).unwrap());
    idx.truncate(radii.len().div_ceil(4));
    idx
}

/// Samples the gauge spheres S(x, r) = x·δ_r(S(0,1)) with one shared set of
/// unit-sphere directions.
pub fn linear_distortion_estimate<R: Rng + ?Sized>(
    f: &dyn Mapping,
    x: &[f64],
    radii: &[f64],
    max_radius: f64,
    samples: usize,
    rng: &mut R,
) -> Result<LinearDistortion> {
    let g = f.group();
    g.check(x)?;
    check_radii(radii)?;
    if let Some(r) = radii.iter().find(|r| **r > max_radius) {
        return Err(Error::InvalidParameter(format!("radius {r} exceeds the domain (max {max_radius})")));
    }
    let dirs = g.sample_unit_sphere(samples.max(1), rng);
    let fx = f.eval(x);
    let (mut big, mut small, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    let mut w = vec![0.0; x.len()];
    for &r in radii {
        let (mut lmax, mut lmin) = (0.0f64, f64::INFINITY);
        for s in &dirs {
            let mut v = s.to_vec();
            g.dilate_in_place(r, &mut v);
            g.compose_into(x, &v, &mut w);
            let dist = g.distance(&f.eval(&w), &fx);
            lmax = lmax.max(dist);
            lmin = lmin.min(dist);
        }
        if lmin == 0.0 {
            return Err(Error::InvalidParameter(format!("f collapses the sphere S(x, {r}) onto f(x)")));
        }
        big.push(lmax);
        small.push(lmin);
        ratios.push(lmax / lmin);
    }
    let limsup = smallest_quartile(radii).iter().map(|&i| ratios[i]).fold(0.0, f64::max);
    Ok(LinearDistortion { radii: radii.to_vec(), big_l: big, small_l: small, ratios, limsup })
}

/// Per-radius quotients of the pointwise distortion estimates.
#[derive(Debug, Clone, Serialize)]
pub struct QuotientSequence {
    pub radii: Vec<f64>,
    /// L^p r^{ν−p} / |f(B(x,λr))| ÷ (Φ(B(x,λr)) / |B(x,r)|)^{(p−q)/q}
    pub h_pq: Vec<f64>,
    /// L r^{(ν−q)/q} / |f(B(x,λr))|^{1/p} ÷ K_{p,q}(f; B(x,λr))
    pub scaled: Vec<f64>,
    /// max / min of each sequence over the smallest quarter of the radii
    pub h_pq_spread: f64,
    pub scaled_spread: f64,
    pub h_pq_max: f64,
    pub scaled_max: f64,
}

/// Set function on gauge balls B(x, ρ).
pub type BallFunction<'a> = dyn Fn(&[f64], f64) -> Result<f64> + 'a;

/// Φ(S) = K_{p,q}(f; S)^{pq/(p−q)} on balls, from a grid quadrature at
/// `resolution` cells per axis. Zero when p = q (the exponent on Φ vanishes).
pub fn distortion_set_function(f: &dyn Mapping, p: f64, q: f64, resolution: usize) -> impl Fn(&[f64], f64) -> Result<f64> + '_ {
    move |x: &[f64], rho: f64| {
        if p == q {
            return Ok(0.0);
        }
        let k = distortion_on_ball(f, x, rho, p, q, resolution)?;
        Ok(k.powf(p * q / (p - q)))
    }
}

/// K_{p,q}(f; B(x, ρ)) on a grid over the ball's bounding box.
pub fn distortion_on_ball(f: &dyn Mapping, x: &[f64], rho: f64, p: f64, q: f64, resolution: usize) -> Result<f64> {
    let g = f.group();
    let (lo, hi) = g.ball_bounding_box(x, rho);
    let grid = Grid::uniform(lo, hi, resolution)?;
    let dom = Domain::new(grid, Region::ball(g, x, rho));
    Ok(distortion_coefficient(f, &dom, p, q)?.coefficient)
}

/// Monte Carlo |f(B(x, ρ))|: the image volume ∫_B J / N is replaced by
/// rejection sampling in the image bounding box, counting points with a
/// preimage in the ball.
pub fn image_ball_volume<R: Rng + ?Sized>(f: &dyn Mapping, x: &[f64], rho: f64, samples: usize, rng: &mut R) -> Result<f64> {
    let g = f.group();
    let ball = Region::ball(g, x, rho);
    let (lo, hi) = g.ball_bounding_box(x, rho);
    let mut ilo = vec![f64::INFINITY; lo.len()];
    let mut ihi = vec![f64::NEG_INFINITY; lo.len()];
    // Bounding box of the image from the image of the box's boundary-dense sample.
    let grid = Grid::uniform(lo, hi, 16)?;
    let mut z = vec![0.0; grid.dim()];
    for i in 0..grid.node_count() {
        grid.node_coords(i, &mut z);
        let y = f.eval(&z);
        for k in 0..y.len() {
            ilo[k] = ilo[k].min(y[k]);
            ihi[k] = ihi[k].max(y[k]);
        }
    }
    for k in 0..ilo.len() {
        let pad = 0.1 * (ihi[k] - ilo[k]).max(f64::MIN_POSITIVE);
        ilo[k] -= pad;
        ihi[k] += pad;
    }
    let vol: f64 = ilo.iter().zip(&ihi).map(|(a, b)| b - a).product();
    let mut acc = Running::default();
    let mut y = vec![0.0; ilo.len()];
    for _ in 0..samples {
        for k in 0..y.len() {
            y[k] = rng.random_range(ilo[k]..ihi[k]);
        }
        let pre = f
            .preimages(&y)
            .ok_or_else(|| Error::Unsupported(format!("{} cannot enumerate preimages", f.name())))?;
        acc.push(pre.iter().any(|z| ball.contains(z)) as u8 as f64);
    }
    Ok(acc.estimate().value * vol)
}

/// The quotients H_{p,q} and L r^{(ν−q)/q} / |f(B)|^{1/p} / K_{p,q} along `radii`.
#[allow(clippy::too_many_arguments)]
pub fn h_pq_estimate<R: Rng + ?Sized>(
    f: &dyn Mapping,
    x: &[f64],
    p: f64,
    q: f64,
    lambda: f64,
    radii: &[f64],
    phi: &BallFunction<'_>,
    kpq: &BallFunction<'_>,
    samples: usize,
    rng: &mut R,
) -> Result<QuotientSequence> {
    if !(lambda > 1.0) {
        return Err(Error::InvalidParameter(format!("lambda must exceed 1, got {lambda}")));
    }
    if q > p {
        return Err(Error::Precondition(format!("need q <= p, got p={p}, q={q}")));
    }
    let g = f.group();
    let nu = g.hom_dim() as f64;
    check_radii(radii)?;
    let big_l = linear_distortion_estimate(f, x, radii, f64::INFINITY, samples, rng)?.big_l;
    let unit_ball = g.ball_volume(1.0, 200_000, rng)?.value;
    let mut h = Vec::new();
    let mut t2 = Vec::new();
    for (i, &r) in radii.iter().enumerate() {
        let img = image_ball_volume(f, x, lambda * r, samples.max(4096), rng)?;
        if !(img > 0.0) {
            return Err(Error::NonIntegrable(format!("image of B(x, {}) has no sampled volume", lambda * r)));
        }
        let ball = unit_ball * r.powf(nu);
        let mut hv = big_l[i].powf(p) * r.powf(nu - p) / img;
        if p != q {
            hv /= (phi(x, lambda * r)? / ball).powf((p - q) / q);
        }
        h.push(hv);
        let k = kpq(x, lambda * r)?;
        t2.push(big_l[i] * r.powf((nu - q) / q) / img.powf(1.0 / p) / k);
    }
    let quart = smallest_quartile(radii);
    let spread = |v: &[f64]| {
        let sel: Vec<f64> = quart.iter().map(|&i| v[i]).collect();
        sel.iter().cloned().fold(0.0, f64::max) / sel.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok(QuotientSequence {
        radii: radii.to_vec(),
        h_pq_spread: spread(&h),
        scaled_spread: spread(&t2),
        h_pq_max: h.iter().cloned().fold(0.0, f64::max),
        scaled_max: t2.iter().cloned().fold(0.0, f64::max),
        h_pq: h,
        scaled: t2,
    })
}

/// Points for self-validation away from singular loci.
pub fn validation_points(g: &Group, count: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            loop {
                let v: Vec<f64> = (0..g.total_dim()).map(|_| rng.random_range(-scale..scale)).collect();
                if v.iter().map(|a| a * a).sum::<f64>().sqrt() > 0.1 * scale {
                    return v;
                }
            }
        })
        .collect()
}

/// Jacobian through the graded-block formula, for cross-checks.
pub fn graded_jacobian(f: &dyn Mapping, x: &[f64]) -> Result<f64> {
    jacobian_from_hdiff(f.group(), &f.hdiff(x))
}
