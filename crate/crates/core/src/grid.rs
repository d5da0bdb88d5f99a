//! Axis-aligned grids, sampled scalar fields and region predicates.
//!
//! Nodes are stored in C order: axis 0 varies slowest, the last axis fastest.
//! A grid with `cells[k]` cells along axis `k` has `cells[k] + 1` nodes there.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::Group;

/// A closed-set predicate in graded coordinates.
#[derive(Clone)]
pub struct Region(Arc<dyn Fn(&[f64]) -> bool + Send + Sync>);

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Region(..)")
    }
}

impl Region {
    pub fn new(pred: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        Region(Arc::new(pred))
    }

    pub fn everything() -> Self {
        Region::new(|_| true)
    }

    pub fn nothing() -> Self {
        Region::new(|_| false)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.0)(x)
    }

    /// Closed gauge ball `{x : d(center, x) ≤ r}`.
    pub fn ball(group: &Group, center: &[f64], r: f64) -> Self {
        let g = group.clone();
        let c = center.to_vec();
        Region::new(move |x| g.distance(&c, x) <= r)
    }

    /// Open gauge ball `{x : d(center, x) < r}`.
    pub fn open_ball(group: &Group, center: &[f64], r: f64) -> Self {
        let g = group.clone();
        let c = center.to_vec();
        Region::new(move |x| g.distance(&c, x) < r)
    }

    /// Closed axis-aligned box.
    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Region::new(move |x| x.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| *a <= *v && *v <= *b))
    }

    pub fn and(&self, other: &Region) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Region::new(move |x| a.contains(x) && b.contains(x))
    }

    pub fn or(&self, other: &Region) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Region::new(move |x| a.contains(x) || b.contains(x))
    }

    pub fn complement(&self) -> Self {
        let a = self.clone();
        Region::new(move |x| !a.contains(x))
    }

    pub fn minus(&self, other: &Region) -> Self {
        self.and(&other.complement())
    }
}

/// Uniform tensor-product grid over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cells: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || cells.len() != d {
            return Err(Error::InvalidParameter("grid box and resolution must share a nonzero dimension".into()));
        }
        for k in 0..d {
            if !(lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k]) {
                return Err(Error::InvalidParameter(format!("degenerate box on axis {k}: [{}, {}]", lo[k], hi[k])));
            }
            if cells[k] < 2 {
                return Err(Error::InvalidParameter(format!("resolution must be >= 2 on axis {k}")));
            }
        }
        let mut strides = vec![1; d];
        for k in (0..d - 1).rev() {
            strides[k] = strides[k + 1] * (cells[k + 1] + 1);
        }
        Ok(Grid { lo, hi, cells, strides })
    }

    /// Same resolution on every axis.
    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>, resolution: usize) -> Result<Self> {
        let d = lo.len();
        Self::new(lo, hi, vec![resolution; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn spacing(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.cells[k] as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.spacing(k)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.cells.iter().map(|c| c + 1).product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn box_volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    /// Multi-index of node `idx`.
    pub fn node_multi(&self, mut idx: usize, out: &mut [usize]) {
        for k in 0..self.dim() {
            out[k] = idx / self.strides[k];
            idx %= self.strides[k];
        }
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn node_coords(&self, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for k in 0..self.dim() {
            let i = rem / self.strides[k];
            rem %= self.strides[k];
            out[k] = self.lo[k] + i as f64 * self.spacing(k);
        }
    }

    pub fn node_point(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.node_coords(idx, &mut x);
        x
    }

    /// Multi-index of cell `c` (cells are numbered in C order as well).
    pub fn cell_multi(&self, mut c: usize, out: &mut [usize]) {
        for k in (0..self.dim()).rev() {
            out[k] = c % self.cells[k];
            c /= self.cells[k];
        }
    }

    /// Node index of the lower corner of cell `c`.
    pub fn cell_corner(&self, c: usize) -> usize {
        let mut rem = c;
        let mut idx = 0;
        for k in (0..self.dim()).rev() {
            idx += (rem % self.cells[k]) * self.strides[k];
            rem /= self.cells[k];
        }
        idx
    }

    /// Locates the cell containing `x` and the local coordinates in `[0,1]^d`.
    /// Points outside the box are clamped onto it.
    pub fn locate(&self, x: &[f64], cell: &mut [usize], frac: &mut [f64]) {
        for k in 0..self.dim() {
            let s = ((x[k] - self.lo[k]) / self.spacing(k)).clamp(0.0, self.cells[k] as f64);
            let i = (s.floor() as usize).min(self.cells[k] - 1);
            cell[k] = i;
            frac[k] = s - i as f64;
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Fraction of each cell covered by `region`, from 16 fixed subsamples per cell.
    pub fn cell_coverage(&self, region: &Region) -> Vec<f64> {
        self.cell_average(|x| region.contains(x) as u8 as f64)
    }

    /// Mean of `f` over the same 16 subsamples per cell.
    pub fn cell_average(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let d = self.dim();
        let pts = subsample_offsets(d);
        let h = self.spacings();
        let mut corner = vec![0.0; d];
        let mut x = vec![0.0; d];
        (0..self.cell_count())
            .map(|c| {
                self.node_coords(self.cell_corner(c), &mut corner);
                let sum: f64 = pts
                    .iter()
                    .map(|off| {
                        for k in 0..d {
                            x[k] = corner[k] + off[k] * h[k];
                        }
                        f(&x)
                    })
                    .sum();
                sum / pts.len() as f64
            })
            .collect()
    }
}

pub const COVERAGE_SAMPLES: usize = 16;

/// Hammersley point set in the unit cell.
fn subsample_offsets(d: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..COVERAGE_SAMPLES)
        .map(|j| {
            (0..d)
                .map(|k| {
                    if k == 0 {
                        (j as f64 + 0.5) / COVERAGE_SAMPLES as f64
                    } else {
                        radical_inverse(j as u32 + 1, PRIMES[(k - 1) % PRIMES.len()])
                    }
                })
                .collect()
        })
        .collect()
}

fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// A box with a mask: the integration domain of every grid quadrature.
#[derive(Debug, Clone)]
pub struct Domain {
    grid: Grid,
    region: Region,
}

impl Domain {
    pub fn new(grid: Grid, region: Region) -> Self {
        Domain { grid, region }
    }

    /// The whole box.
    pub fn full(grid: Grid) -> Self {
        Domain { grid, region: Region::everything() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.grid.contains(x) && self.region.contains(x)
    }

    pub fn with_resolution(&self, resolution: usize) -> Result<Domain> {
        let grid = Grid::uniform(self.grid.lo.clone(), self.grid.hi.clone(), resolution)?;
        Ok(Domain { grid, region: self.region.clone() })
    }
}

/// A scalar field sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

const BINARY_MAGIC: &[u8; 8] = b"PQGRID01";

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch { expected: grid.node_count(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite grid value at node {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.node_count();
        GridFunction { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.node_count())
            .map(|i| {
                grid.node_coords(i, &mut x);
                f(&x)
            })
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation; points outside the box are clamped onto it.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        let mut cell = vec![0usize; d];
        let mut frac = vec![0.0; d];
        self.grid.locate(x, &mut cell, &mut frac);
        let base = self.grid.node_index(&cell);
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = base;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    idx += self.grid.strides[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }

    pub fn resample(&self, target: &Grid) -> Result<GridFunction> {
        if target.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch { expected: self.grid.dim(), got: target.dim() });
        }
        Ok(GridFunction::from_fn(target.clone(), |x| self.interpolate(x)))
    }

    /// CSV dump: a `#` header with box and resolution, then one row per
    /// node in C order (axis 0 slowest) with the node coordinates and value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";");
        writeln!(out, "# pqdist-grid v1")?;
        writeln!(out, "# lo={}", join(&self.grid.lo))?;
        writeln!(out, "# hi={}", join(&self.grid.hi))?;
        writeln!(
            out,
            "# cells={}",
            self.grid.cells.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
        )?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.grid.dim()).map(|k| format!("x{k}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        let mut x = vec![0.0; self.grid.dim()];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.node_coords(i, &mut x);
            let mut row: Vec<String> = x.iter().map(|c| format!("{c:?}")).collect();
            row.push(format!("{v:?}"));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<GridFunction> {
        let mut reader = BufReader::new(input);
        let mut lo = None;
        let mut hi = None;
        let mut cells = None;
        let mut line = String::new();
        let parse_f = |s: &str| -> Result<Vec<f64>> {
            s.split(';').map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(e.to_string()))).collect()
        };
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Config("grid csv: missing body".into()));
            }
            let Some(rest) = line.trim().strip_prefix('#') else {
                break;
            };
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("lo=") {
                lo = Some(parse_f(v)?);
            } else if let Some(v) = rest.strip_prefix("hi=") {
                hi = Some(parse_f(v)?);
            } else if let Some(v) = rest.strip_prefix("cells=") {
                let c: std::result::Result<Vec<usize>, _> = v.split(';').map(|t| t.trim().parse()).collect();
                cells = Some(c.map_err(|e| Error::Config(e.to_string()))?);
            }
        }
        let (Some(lo), Some(hi), Some(cells)) = (lo, hi, cells) else {
            return Err(Error::Config("grid csv: header must carry lo, hi and cells".into()));
        };
        let grid = Grid::new(lo, hi, cells)?;
        // `line` now holds the column header; the rest are data rows.
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut values = Vec::with_capacity(grid.node_count());
        for rec in rdr.records() {
            let rec = rec?;
            let v = rec
                .get(grid.dim())
                .ok_or_else(|| Error::Config("grid csv: short row".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Config(e.to_string()))?;
            values.push(v);
        }
        GridFunction::new(grid, values)
    }

    /// Binary dump: magic, little-endian `u32` dimension, `lo`, `hi` as `f64`,
    /// cells as `u64`, then the node values as `f64` in C order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        for v in self.grid.lo.iter().chain(&self.grid.hi) {
            out.write_all(&v.to_le_bytes())?;
        }
        for c in &self.grid.cells {
            out.write_all(&(*c as u64).to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<GridFunction> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Config("not a pqdist binary grid".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        let mut f64s = |n: usize, input: &mut R| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| {
                    input.read_exact(&mut b8)?;
                    Ok(f64::from_le_bytes(b8))
                })
                .collect()
        };
        let lo = f64s(d, &mut input)?;
        let hi = f64s(d, &mut input)?;
        let mut cells = Vec::with_capacity(d);
        for _ in 0..d {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            cells.push(u64::from_le_bytes(b) as usize);
        }
        let grid = Grid::new(lo, hi, cells)?;
        let values = f64s(grid.node_count(), &mut input)?;
        GridFunction::new(grid, values)
    }
}
