use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{substream, PulseTiming};
use crate::error::{invalid, Result};
use crate::timetag::{BinCounts, TagRecord};
use crate::witness::ClickProbabilities;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalKind {
    Coherent,
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub kind: ClassicalKind,
    /// Mean photon number per bin at the detectors.
    pub mu: f64,
    pub n_bins: u64,
    #[serde(rename = "split_T")]
    pub split_t: f64,
    pub seed: u64,
}

fn check(mu: f64, split_t: f64) -> Result<()> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be finite and >= 0, got {mu}")));
    }
    if !(0.0..=1.0).contains(&split_t) {
        return Err(invalid("split_T", format!("must be in [0, 1], got {split_t}")));
    }
    Ok(())
}

/// Exact click probabilities of a coherent or single-mode thermal field.
///
/// Coherent: `p0k = e^{−µ_k}` and `p00 = p01·p02`, which is `e^{−µ}`.
/// Thermal: `p0k = 1/(1 + µ_k)`, `p00 = 1/(1 + µ)`.
pub fn closed_form_classical(kind: ClassicalKind, mu: f64, split_t: f64) -> Result<ClickProbabilities> {
    check(mu, split_t)?;
    let (mu1, mu2) = (mu * split_t, mu * (1.0 - split_t));
    match kind {
        ClassicalKind::Coherent => {
            let (p01, p02) = ((-mu1).exp(), (-mu2).exp());
            ClickProbabilities::from_no_click(p01 * p02, p01, p02)
        }
        ClassicalKind::Thermal => {
            ClickProbabilities::from_no_click(1.0 / (1.0 + mu), 1.0 / (1.0 + mu1), 1.0 / (1.0 + mu2))
        }
    }
}

const BLOCK: u64 = 1 << 18;

fn check_config(config: &ClassicalConfig) -> Result<()> {
    check(config.mu, config.split_t)?;
    if config.n_bins == 0 {
        return Err(invalid("n_bins", "need at least one bin"));
    }
    Ok(())
}

/// Draws the outcomes of block `b` and hands each `(det1, det2)` to `emit`.
fn classical_block(config: &ClassicalConfig, b: u64, mut emit: impl FnMut(u64, bool, bool)) -> u64 {
    let (mu, t) = (config.mu, config.split_t);
    let len = (config.n_bins - b * BLOCK).min(BLOCK);
    let mut rng = substream(config.seed, b);
    match config.kind {
        ClassicalKind::Coherent => {
            let click1 = -(-mu * t).exp_m1();
            let click2 = -(-mu * (1.0 - t)).exp_m1();
            for i in 0..len {
                let d1 = rng.random::<f64>() < click1;
                let d2 = rng.random::<f64>() < click2;
                emit(i, d1, d2);
            }
        }
        ClassicalKind::Thermal => {
            // Photon number n has P(n) = µⁿ/(1+µ)ⁿ⁺¹.
            let photons = Geometric::new(1.0 / (1.0 + mu)).unwrap();
            for i in 0..len {
                let n = photons.sample(&mut rng);
                if n == 0 {
                    emit(i, false, false);
                    continue;
                }
                // u in [0, (1−T)ⁿ): all to port 2; then Tⁿ: all to port 1; else both.
                let u = rng.random::<f64>();
                let n = n.min(i32::MAX as u64) as i32;
                let (all1, all2) = (t.powi(n), (1.0 - t).powi(n));
                emit(i, u >= all2, u < all2 || u >= all1 + all2);
            }
        }
    }
    len
}

/// Per-bin binary outcomes of a classical field behind the splitter.
pub fn run_classical(config: &ClassicalConfig) -> Result<BinCounts> {
    check_config(config)?;
    Ok((0..config.n_bins.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut c = BinCounts::default();
            classical_block(config, b, |_, d1, d2| c.record(d1, d2));
            c.n_tb = (config.n_bins - b * BLOCK).min(BLOCK);
            c
        })
        .sum())
}

/// [`run_classical`] that also lays the clicks out as a pulsed tag stream,
/// bin `i` at `i·period + offset`.
pub fn run_classical_with_tags(config: &ClassicalConfig, timing: PulseTiming) -> Result<(BinCounts, Vec<TagRecord>)> {
    check_config(config)?;
    timing.validate(config.n_bins)?;
    let parts: Vec<(BinCounts, Vec<TagRecord>)> = (0..config.n_bins.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut c = BinCounts::default();
            let mut tags = Vec::new();
            let len = classical_block(config, b, |i, d1, d2| {
                c.record(d1, d2);
                let t = (b * BLOCK + i) * timing.period_ps + timing.click_offset_ps;
                if d1 {
                    tags.push(TagRecord::new(1, t));
                }
                if d2 {
                    tags.push(TagRecord::new(2, t));
                }
            });
            c.n_tb = len;
            (c, tags)
        })
        .collect();
    let mut counts = BinCounts::default();
    let mut tags = Vec::new();
    for (c, t) in parts {
        counts += c;
        tags.extend(t);
    }
    Ok((counts, tags))
}
