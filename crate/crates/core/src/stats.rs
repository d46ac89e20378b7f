//! Running moments, autocorrelation-corrected standard errors and small
//! statistical helpers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_ESS: f64 = 100.0;

/// Mean and variance of one observable, with its stored series for the
/// autocorrelation estimate.
#[derive(Debug, Clone, Default)]
pub struct StatsAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
    series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub n: u64,
    pub mean: f64,
    pub variance: f64,
    pub iat: f64,
    pub ess: f64,
    pub se: f64,
    pub low_ess: bool,
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.series.push(x);
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, it: I) {
        for x in it {
            self.push(x);
        }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n − 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    /// Integrated autocorrelation time with Sokal's self-consistent window (c = 5).
    pub fn iat(&self) -> f64 {
        integrated_autocorrelation_time(&self.series)
    }

    pub fn ess(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.n as f64 / self.iat()
    }

    pub fn se(&self) -> f64 {
        let ess = self.ess();
        if ess <= 0.0 {
            return f64::INFINITY;
        }
        (self.variance() / ess).sqrt()
    }

    pub fn summary(&self, name: &str) -> Summary {
        let iat = self.iat();
        let ess = if self.n == 0 { 0.0 } else { self.n as f64 / iat };
        let se = if ess > 0.0 { (self.variance() / ess).sqrt() } else { f64::INFINITY };
        let low_ess = ess < MIN_ESS;
        if low_ess {
            log::warn!("{name}: effective sample size {ess:.1} is below {MIN_ESS}");
        }
        Summary { name: name.to_string(), n: self.n, mean: self.mean, variance: self.variance(), iat, ess, se, low_ess }
    }
}

pub fn integrated_autocorrelation_time(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let mut c = 0.0;
        for i in 0..n - lag {
            c += (x[i] - mean) * (x[i + lag] - mean);
        }
        tau += 2.0 * c / (n as f64 * c0);
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Summaries for named observables given row-major samples.
pub fn measure(rows: &[Vec<f64>], names: &[&str]) -> Result<Vec<Summary>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut acc = vec![StatsAccumulator::new(); names.len()];
    for r in rows {
        if r.len() != names.len() {
            return Err(Error::DimensionMismatch { expected: names.len(), got: r.len() });
        }
        for (a, v) in acc.iter_mut().zip(r) {
            a.push(*v);
        }
    }
    Ok(acc.iter().zip(names).map(|(a, n)| a.summary(n)).collect())
}

/// Mean and standard error of independent values.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, f64::INFINITY);
    }
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in samples.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Ordinary least squares `y ≈ X b`; returns `b` and its covariance.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::InsufficientData(format!("{n} observations for {p} coefficients")));
    }
    let xtx = x.transpose() * x;
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("rank-deficient design".into()))?;
    let b = &inv * x.transpose() * y;
    let resid = y - x * &b;
    let s2 = resid.dot(&resid) / (n - p) as f64;
    Ok((b, inv * s2))
}
