//! Small Monte Carlo helpers shared by the volume, change-of-variables and
//! distortion estimators.

use serde::Serialize;

/// Two-sided normal quantile for a 99% confidence interval.
pub const Z99: f64 = 2.575_829_303_548_901;

/// A sample-mean estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0, samples: 0 }
    }

    /// Scales an estimate of a mean into an estimate of `scale * mean`.
    pub fn scaled(self, scale: f64) -> Self {
        Estimate {
            value: self.value * scale,
            std_error: self.std_error * scale.abs(),
            samples: self.samples,
        }
    }

    pub fn interval(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.std_error, self.value + z * self.std_error)
    }

    pub fn overlaps(&self, other: &Estimate, z: f64) -> bool {
        let (a0, a1) = self.interval(z);
        let (b0, b1) = other.interval(z);
        a0 <= b1 && b0 <= a1
    }
}

/// Welford accumulator.
#[derive(Debug, Default, Clone)]
pub struct Running {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate {
            value: self.mean,
            std_error: (var / self.n.max(1) as f64).sqrt(),
            samples: self.n,
        }
    }
}
