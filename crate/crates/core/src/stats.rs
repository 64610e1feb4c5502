//! Uncertainty of the witness, run-count projection, chunked errors and the
//! significance tests used to compare measurements.
//!
//! [`variance_d`] is the Gaussian `(X, Y)` propagation with
//! `X = 2P₀ − P₀₀`, `Y = P₀ + 2P₀₀`, treating `X` and `Y` as independent.
//! [`variance_d_delta`] is the first-order multinomial propagation through
//! `√(p01·p02) − √p00` with all covariances; it is what repeated simulated
//! measurements actually scatter by.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::witness::ClickProbabilities;

/// Rotation angle `arctan(1/2)` between the `(P₀, P₀₀)` and `(X, Y)` frames.
pub fn phi() -> f64 {
    0.5f64.atan()
}

/// Linear recombination of the witness inputs and their per-run variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XYStats {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub n_runs: u64,
}

impl XYStats {
    pub fn new(p0: f64, p00: f64, pc: f64, ps_excl: f64, n_runs: u64) -> Result<Self> {
        if n_runs == 0 {
            return Err(invalid("n_runs", "need at least one run"));
        }
        let n = n_runs as f64;
        Ok(Self {
            x: 2.0 * p0 - p00,
            y: p0 + 2.0 * p00,
            vx: pc * (1.0 - pc) / n,
            vy: ps_excl * (1.0 - ps_excl) / (4.0 * n) + 9.0 * p00 * (1.0 - p00) / (4.0 * n),
            n_runs,
        })
    }

    pub fn p0(&self) -> f64 {
        (2.0 * self.x + self.y) / 5.0
    }

    pub fn p00(&self) -> f64 {
        (2.0 * self.y - self.x) / 5.0
    }

    /// `d = (2X + Y)/5 − √((−X + 2Y)/5)`.
    pub fn witness(&self) -> f64 {
        (2.0 * self.x + self.y) / 5.0 - ((2.0 * self.y - self.x) / 5.0).sqrt()
    }

    /// `Vx (sinφ/(2√p00) + cosφ)² + Vy (cosφ/(2√p00) − sinφ)²`.
    pub fn variance_d(&self) -> Result<f64> {
        let p00 = self.p00();
        if !(p00 > 0.0) {
            return Err(Error::SingularVariance);
        }
        let (s, c) = phi().sin_cos();
        let root = 2.0 * p00.sqrt();
        Ok(self.vx * (s / root + c).powi(2) + self.vy * (c / root - s).powi(2))
    }
}

/// Closed-form `var(d)` after `n_runs` runs, symmetric-detector inputs.
pub fn variance_d(pc: f64, ps_excl: f64, p00: f64, n_runs: u64) -> Result<f64> {
    for (name, p) in [("pc", pc), ("ps_excl", ps_excl), ("p00", p00)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(name, format!("not a probability: {p}")));
        }
    }
    if p00 == 0.0 {
        return Err(Error::SingularVariance);
    }
    let p0 = p00 + 0.5 * ps_excl;
    XYStats::new(p0, p00, pc, ps_excl, n_runs)?.variance_d()
}

/// Multinomial delta-method `var(d)` after `n_runs` runs.
pub fn variance_d_delta(probs: &ClickProbabilities, n_runs: u64) -> Result<f64> {
    if n_runs == 0 {
        return Err(invalid("n_runs", "need at least one run"));
    }
    if !(probs.p00 > 0.0 && probs.p0 > 0.0) {
        return Err(Error::SingularVariance);
    }
    // Cells: both silent, only detector 1, only detector 2, both click.
    let cells = [probs.p00, probs.p02 - probs.p00, probs.p01 - probs.p00, probs.pc];
    let two_p0 = 2.0 * probs.p0;
    let grad = [
        (probs.p01 + probs.p02) / two_p0 - 0.5 / probs.p00.sqrt(),
        probs.p01 / two_p0,
        probs.p02 / two_p0,
        0.0,
    ];
    let mean: f64 = cells.iter().zip(&grad).map(|(p, g)| p * g).sum();
    let second: f64 = cells.iter().zip(&grad).map(|(p, g)| p * g * g).sum();
    Ok((second - mean * mean).max(0.0) / n_runs as f64)
}

/// Smallest number of runs `N` with `d ≥ k·√var_d(N)`: `⌈k² var₁ / d²⌉`.
pub fn required_runs(probs: &ClickProbabilities, k_sigma: f64) -> Result<u64> {
    required_runs_for(probs, probs.witness(), k_sigma)
}

/// [`required_runs`] with an externally computed (e.g. log-domain) witness.
pub fn required_runs_for(probs: &ClickProbabilities, d: f64, k_sigma: f64) -> Result<u64> {
    if !(k_sigma >= 0.0) {
        return Err(invalid("k_sigma", format!("must be non-negative, got {k_sigma}")));
    }
    if !(d > 0.0) {
        return Err(Error::NotViolable { d });
    }
    if k_sigma == 0.0 {
        return Ok(1);
    }
    let var_one = variance_d(probs.pc, probs.ps_excl, probs.p00, 1)?;
    let runs = (k_sigma * k_sigma * var_one / (d * d)).ceil();
    Ok(if runs >= u64::MAX as f64 {
        u64::MAX
    } else {
        (runs as u64).max(1)
    })
}

/// Sample mean and standard error of the mean of per-chunk witness values.
pub fn chunked_error(d_values: &[f64]) -> Result<(f64, f64)> {
    if d_values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: d_values.len(),
        });
    }
    let n = d_values.len() as f64;
    let mean = d_values.iter().sum::<f64>() / n;
    let ss: f64 = d_values.iter().map(|d| (d - mean).powi(2)).sum();
    Ok((mean, (ss / (n - 1.0)).sqrt() / n.sqrt()))
}

/// Number of equal parts a measurement is split into for error bars.
pub const DEFAULT_CHUNKS: usize = 5;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Confidence that `d2 > d1` under independent Gaussian errors.
pub fn compare_witnesses(d1: f64, sigma1: f64, d2: f64, sigma2: f64) -> Result<f64> {
    if !(sigma1 > 0.0 && sigma2 > 0.0) {
        return Err(invalid("sigma", "standard deviations must be positive"));
    }
    Ok(normal_cdf((d2 - d1) / sigma1.hypot(sigma2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub gradient: f64,
    pub intercept: f64,
    pub sigma_gradient: f64,
    /// One-sided probability that the true gradient is positive.
    pub confidence_positive: f64,
}

/// Weighted least-squares line through `(n, d, sigma)` points, weights `1/σ²`.
pub fn weighted_trend(points: &[(f64, f64, f64)]) -> Result<TrendFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: points.len(),
        });
    }
    if points.iter().any(|p| !(p.2 > 0.0)) {
        return Err(invalid("sigma", "all error bars must be positive"));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, sigma) in points {
        let w = 1.0 / (sigma * sigma);
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let first = points[0].0;
    if points.iter().all(|p| p.0 == first) || !(det > 0.0) {
        return Err(Error::SingularFit);
    }
    let gradient = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let sigma_gradient = (s / det).sqrt();
    Ok(TrendFit {
        gradient,
        intercept,
        sigma_gradient,
        confidence_positive: normal_cdf(gradient / sigma_gradient),
    })
}
