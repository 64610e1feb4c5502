//! Click probabilities, the witness `d = P₀ − √P₀₀` and its equivalent
//! criterion forms.
//!
//! Detector `k` is *silent* in a bin with probability `p0k`; `p00` is the
//! probability that both are silent. For asymmetric detectors the single
//! detector no-click probability is the geometric mean `p0 = √(p01·p02)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optics::EfficiencyVector;
use crate::stats;
use crate::timetag::BinCounts;

/// Tolerance for probability identities computed in floating point.
const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickProbabilities {
    pub p00: f64,
    pub p01: f64,
    pub p02: f64,
    pub p0: f64,
    /// Exactly one detector clicks.
    pub ps_excl: f64,
    /// Detector 1 clicks, regardless of detector 2.
    pub ps_marg1: f64,
    pub ps_marg2: f64,
    /// Both detectors click.
    pub pc: f64,
}

impl ClickProbabilities {
    /// Completes the table from the three no-click probabilities.
    pub fn from_no_click(p00: f64, p01: f64, p02: f64) -> Result<Self> {
        for (name, p) in [("p00", p00), ("p01", p01), ("p02", p02)] {
            if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&p) {
                return Err(invalid(name, format!("not a probability: {p}")));
            }
        }
        let ps_excl = p01 + p02 - 2.0 * p00;
        let pc = 1.0 - p01 - p02 + p00;
        if p00 > p01.min(p02) + PROB_TOL || pc < -PROB_TOL {
            return Err(Error::InconsistentCounts(format!(
                "no-click probabilities p00={p00}, p01={p01}, p02={p02} violate inclusion-exclusion"
            )));
        }
        let clamp = |p: f64| p.clamp(0.0, 1.0);
        Ok(Self {
            p00: clamp(p00),
            p01: clamp(p01),
            p02: clamp(p02),
            p0: (clamp(p01) * clamp(p02)).sqrt(),
            ps_excl: clamp(ps_excl),
            ps_marg1: clamp(1.0 - p01),
            ps_marg2: clamp(1.0 - p02),
            pc: clamp(pc),
        })
    }

    /// `d = p0 − √p00`.
    pub fn witness(&self) -> f64 {
        witness_distance(self.p0, self.p00)
    }

    /// Marginal click probability of the geometric-mean detector, `1 − p0`.
    pub fn ps_marg(&self) -> f64 {
        1.0 - self.p0
    }
}

/// Reduces bin tallies to probabilities.
///
/// `n_s1`, `n_s2` must count bins where *only* that detector clicked.
pub fn probabilities_from_counts(counts: &BinCounts) -> Result<ClickProbabilities> {
    counts.validate()?;
    let n = counts.n_tb as f64;
    let silent = counts.n_tb - counts.n_s1 - counts.n_s2 - counts.n_c;
    let p01 = (counts.n_tb - counts.n_s1 - counts.n_c) as f64 / n;
    let p02 = (counts.n_tb - counts.n_s2 - counts.n_c) as f64 / n;
    Ok(ClickProbabilities {
        p00: silent as f64 / n,
        p01,
        p02,
        p0: (p01 * p02).sqrt(),
        ps_excl: (counts.n_s1 + counts.n_s2) as f64 / n,
        ps_marg1: (counts.n_s1 + counts.n_c) as f64 / n,
        ps_marg2: (counts.n_s2 + counts.n_c) as f64 / n,
        pc: counts.n_c as f64 / n,
    })
}

/// Distance from the classical threshold, `p0 − √p00`. Positive values
/// certify nonclassical light.
pub fn witness_distance(p0: f64, p00: f64) -> f64 {
    p0 - p00.sqrt()
}

/// Evaluates `p0 + a·p00 > −1/(4a)` for one value of the free parameter.
pub fn functional_check(a: f64, p0: f64, p00: f64) -> Result<bool> {
    if !(a < 0.0) {
        return Err(invalid("a", format!("threshold is defined for a < 0, got {a}")));
    }
    Ok(p0 + a * p00 > -1.0 / (4.0 * a))
}

/// Whether some `a < 0` satisfies [`functional_check`].
///
/// The margin `p0 + a·p00 + 1/(4a)` is maximised at `a = −1/(2√p00)`, where it
/// equals `d`; for `p00 = 0` it tends to `p0` as `a → −∞`.
pub fn functional_witness_exists(p0: f64, p00: f64) -> bool {
    if p00 <= 0.0 {
        return p0 > 0.0 && functional_check(-4.0 / p0, p0, 0.0).unwrap_or(false);
    }
    functional_check(optimal_functional_parameter(p00), p0, p00).unwrap_or(false)
}

pub fn optimal_functional_parameter(p00: f64) -> f64 {
    -0.5 / p00.sqrt()
}

/// Imbalance-free criterion `p01·p02 > p00`.
pub fn asymmetric_product_check(p01: f64, p02: f64, p00: f64) -> bool {
    p01 * p02 > p00
}

/// The two per-detector conditions for a known imbalance `t`:
/// `p01 > p00^t` and `p02 > p00^(1−t)`.
pub fn imbalance_conditions(p01: f64, p02: f64, p00: f64, t: f64) -> [bool; 2] {
    [p01 > p00.powf(t), p02 > p00.powf(1.0 - t)]
}

/// `pc / ps_marg²`; below 1 flags nonclassicality for symmetric detection.
pub fn ratio_criterion(ps_marg: f64, pc: f64) -> Result<f64> {
    if ps_marg <= 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(pc / (ps_marg * ps_marg))
}

/// Binwise normalised coincidence `pc / (ps_marg1·ps_marg2)`.
///
/// An estimator of g²(0) for binary detectors, not the second moment itself.
pub fn g2_from_probabilities(probs: &ClickProbabilities) -> Result<f64> {
    if probs.ps_marg1 <= 0.0 || probs.ps_marg2 <= 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(probs.pc / (probs.ps_marg1 * probs.ps_marg2))
}

pub fn g2_estimate(counts: &BinCounts) -> Result<f64> {
    g2_from_probabilities(&probabilities_from_counts(counts)?)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Log-domain no-click probabilities of independent single-photon emitters.
///
/// `ln_excess = Σ ln(1 + q₁q₂/(1 − q₁ − q₂))` equals `ln p01 + ln p02 − ln p00`
/// term by term, so `d = √p00 · expm1(ln_excess / 2)` is free of the
/// cancellation in `p0 − √p00` when `d ≪ p0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleProbabilities {
    pub ln_p00: f64,
    pub ln_p01: f64,
    pub ln_p02: f64,
    pub ln_excess: f64,
}

#[derive(Default, Clone, Copy)]
struct Accum {
    p00: CompensatedSum,
    p01: CompensatedSum,
    p02: CompensatedSum,
    excess: CompensatedSum,
    exhausted: bool,
}

impl Accum {
    fn push(&mut self, q1: f64, q2: f64) {
        let rest = 1.0 - q1 - q2;
        self.p01.add((-q1).ln_1p());
        self.p02.add((-q2).ln_1p());
        if rest <= 0.0 {
            self.exhausted = true;
        } else {
            self.p00.add((-(q1 + q2)).ln_1p());
            self.excess.add((q1 * q2 / rest).ln_1p());
        }
    }

    fn merge(&mut self, other: Accum) {
        self.p00.merge(other.p00);
        self.p01.merge(other.p01);
        self.p02.merge(other.p02);
        self.excess.merge(other.excess);
        self.exhausted |= other.exhausted;
    }
}

const PARALLEL_CHUNK: usize = 1 << 14;

impl EnsembleProbabilities {
    /// Vacuum: nothing ever clicks.
    pub const VACUUM: Self = Self {
        ln_p00: 0.0,
        ln_p01: 0.0,
        ln_p02: 0.0,
        ln_excess: 0.0,
    };

    /// Accumulates per-emitter detector probabilities `(q1, q2)`.
    pub fn from_split_efficiencies(pairs: &[(f64, f64)]) -> Result<Self> {
        for (index, &(q1, q2)) in pairs.iter().enumerate() {
            if !(q1 >= 0.0 && q2 >= 0.0 && q1 <= 1.0 && q2 <= 1.0 && q1 + q2 <= 1.0) {
                return Err(Error::EfficiencyOutOfRange { index, value: q1 + q2 });
            }
        }
        let accum = if pairs.len() > 2 * PARALLEL_CHUNK {
            use rayon::prelude::*;
            let parts: Vec<Accum> = pairs
                .par_chunks(PARALLEL_CHUNK)
                .map(|chunk| {
                    let mut a = Accum::default();
                    chunk.iter().for_each(|&(q1, q2)| a.push(q1, q2));
                    a
                })
                .collect();
            parts.into_iter().fold(Accum::default(), |mut acc, p| {
                acc.merge(p);
                acc
            })
        } else {
            let mut a = Accum::default();
            pairs.iter().for_each(|&(q1, q2)| a.push(q1, q2));
            a
        };
        Ok(if accum.exhausted {
            Self {
                ln_p00: f64::NEG_INFINITY,
                ln_p01: accum.p01.value(),
                ln_p02: accum.p02.value(),
                ln_excess: f64::INFINITY,
            }
        } else {
            Self {
                ln_p00: accum.p00.value(),
                ln_p01: accum.p01.value(),
                ln_p02: accum.p02.value(),
                ln_excess: accum.excess.value(),
            }
        })
    }

    pub fn witness(&self) -> f64 {
        if self.ln_p00 == f64::NEG_INFINITY {
            return (0.5 * (self.ln_p01 + self.ln_p02)).exp();
        }
        (0.5 * self.ln_p00).exp() * (0.5 * self.ln_excess).exp_m1()
    }

    /// Composes with an independent source whose detectors stay silent with
    /// probabilities `silent1`, `silent2` (dark counts, coherent background).
    pub fn with_background(&self, silent1: f64, silent2: f64) -> Self {
        let (l1, l2) = (silent1.ln(), silent2.ln());
        Self {
            ln_p00: self.ln_p00 + l1 + l2,
            ln_p01: self.ln_p01 + l1,
            ln_p02: self.ln_p02 + l2,
            ln_excess: self.ln_excess,
        }
    }

    pub fn probabilities(&self) -> ClickProbabilities {
        let p00 = self.ln_p00.exp();
        let p01 = self.ln_p01.exp();
        let p02 = self.ln_p02.exp();
        ClickProbabilities {
            p00,
            p01,
            p02,
            p0: (0.5 * (self.ln_p01 + self.ln_p02)).exp(),
            ps_excl: (p01 - p00) + (p02 - p00),
            ps_marg1: -self.ln_p01.exp_m1(),
            ps_marg2: -self.ln_p02.exp_m1(),
            pc: (1.0 - p01 - p02 + p00).max(0.0),
        }
    }
}

/// Log-domain ensemble for efficiencies `etas` behind splitter `split_t`
/// with detector scale factors `kappa1`, `kappa2`.
pub fn ensemble_probabilities(
    etas: &EfficiencyVector,
    split_t: f64,
    kappa1: f64,
    kappa2: f64,
) -> Result<EnsembleProbabilities> {
    let pairs: Vec<(f64, f64)> = etas
        .iter()
        .map(|eta| (eta * split_t * kappa1, eta * (1.0 - split_t) * kappa2))
        .collect();
    EnsembleProbabilities::from_split_efficiencies(&pairs)
}

/// Exact click probabilities of independent single-photon emitters:
/// `p01 = ∏(1 − ηᵢTκ₁)`, `p02 = ∏(1 − ηᵢ(1−T)κ₂)`, `p00 = ∏(1 − ηᵢTκ₁ − ηᵢ(1−T)κ₂)`.
pub fn analytic_probs(etas: &EfficiencyVector, split_t: f64, kappa1: f64, kappa2: f64) -> Result<ClickProbabilities> {
    Ok(ensemble_probabilities(etas, split_t, kappa1, kappa2)?.probabilities())
}

/// Summary of a witness evaluation, serialized as the analysis report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub d: f64,
    pub var_d: Option<f64>,
    pub sigma_d: Option<f64>,
    pub nonclassical_2sigma: bool,
    pub g2: Option<f64>,
    pub ratio: Option<f64>,
    pub p00: f64,
    pub p0: f64,
    pub n_bins: u64,
    pub pc: f64,
    pub ps_excl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunks: Option<ChunkSummary>,
}

/// Witness re-evaluated on equal-length parts of a measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkSummary {
    pub d_values: Vec<f64>,
    pub mean: f64,
    pub sigma_of_mean: f64,
}

impl WitnessReport {
    /// Report from total tallies with the closed-form variance; `var_d` is
    /// `None` when `p00 = 0`.
    pub fn from_counts(counts: &BinCounts) -> Result<Self> {
        let probs = probabilities_from_counts(counts)?;
        let d = probs.witness();
        let var_d = stats::variance_d(probs.pc, probs.ps_excl, probs.p00, counts.n_tb).ok();
        let sigma_d = var_d.map(f64::sqrt);
        Ok(Self {
            d,
            var_d,
            sigma_d,
            nonclassical_2sigma: sigma_d.is_some_and(|s| d > 2.0 * s),
            g2: g2_from_probabilities(&probs).ok(),
            ratio: ratio_criterion(probs.ps_marg(), probs.pc).ok(),
            p00: probs.p00,
            p0: probs.p0,
            n_bins: counts.n_tb,
            pc: probs.pc,
            ps_excl: probs.ps_excl,
            chunks: None,
        })
    }

    /// Attaches per-chunk witness values and their standard error.
    pub fn with_chunks(mut self, chunks: &[BinCounts]) -> Result<Self> {
        let d_values = chunks
            .iter()
            .map(|c| probabilities_from_counts(c).map(|p| p.witness()))
            .collect::<Result<Vec<_>>>()?;
        let (mean, sigma_of_mean) = stats::chunked_error(&d_values)?;
        self.chunks = Some(ChunkSummary {
            d_values,
            mean,
            sigma_of_mean,
        });
        Ok(self)
    }

    /// `d > k·σ_d`; false when the variance is undefined.
    pub fn nonclassical(&self, k: f64) -> bool {
        self.sigma_d.is_some_and(|s| self.d > k * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(n_tb: u64, n_s1: u64, n_s2: u64, n_c: u64) -> BinCounts {
        BinCounts { n_tb, n_s1, n_s2, n_c }
    }

    #[test]
    fn counts_to_probabilities() {
        let p = probabilities_from_counts(&counts(1000, 100, 100, 10)).unwrap();
        assert!((p.p00 - 0.79).abs() < 1e-15);
        assert!((p.p01 - 0.89).abs() < 1e-15);
        assert!((p.p02 - 0.89).abs() < 1e-15);
        assert!((p.p0 - 0.89).abs() < 1e-15);
        assert!((p.p00 + p.ps_excl + p.pc - 1.0).abs() < 1e-12);

        let dark = probabilities_from_counts(&counts(1000, 0, 0, 0)).unwrap();
        assert_eq!((dark.p00, dark.p0, dark.pc), (1.0, 1.0, 0.0));

        let tiny = probabilities_from_counts(&counts(4, 1, 1, 1)).unwrap();
        assert_eq!((tiny.p00, tiny.p01, tiny.p02), (0.25, 0.5, 0.5));
        assert_eq!(tiny.ps_marg1, 1.0 - tiny.p01);
    }

    #[test]
    fn count_errors() {
        assert!(matches!(
            probabilities_from_counts(&counts(0, 0, 0, 0)),
            Err(Error::EmptyMeasurement)
        ));
        assert!(matches!(
            probabilities_from_counts(&counts(10, 5, 5, 1)),
            Err(Error::InconsistentCounts(_))
        ));
    }

    #[test]
    fn witness_examples() {
        assert_eq!(witness_distance(0.5, 0.0), 0.5);
        for mu in [0.0, 0.01, 0.3, 2.0, 7.5] {
            let d = witness_distance((-mu / 2.0f64).exp(), f64::exp(-mu));
            assert!(d.abs() < 1e-15, "mu={mu} d={d}");
        }
        let d = witness_distance(0.89, 0.79);
        assert!((d - 1.180_558_268e-3).abs() < 1e-12, "{d}");
    }

    #[test]
    fn functional_examples() {
        // Coherent light touches the threshold at a = -1/(2c).
        let c: f64 = 0.5;
        assert!(!functional_check(-1.0 / (2.0 * c), c, c * c).unwrap());
        assert!(functional_check(-1.0, 0.5, 0.0).unwrap());
        assert!(functional_check(0.0, 0.5, 0.2).is_err());
        assert!(functional_check(0.3, 0.5, 0.2).is_err());

        // Thermal light: no a in the scan witnesses anything.
        let mu = 0.7;
        let (p0, p00) = (1.0 / (1.0 + mu / 2.0), 1.0 / (1.0 + mu));
        for i in 0..=600 {
            let a = -(10f64.powf(-3.0 + i as f64 / 100.0));
            assert!(!functional_check(a, p0, p00).unwrap());
        }
        assert!(!functional_witness_exists(p0, p00));
        assert!(functional_witness_exists(0.5, 0.0));
        assert!(!functional_witness_exists(0.0, 0.0));
    }

    #[test]
    fn product_check() {
        assert!(asymmetric_product_check(0.9, 0.9, 0.79));
        assert!(!asymmetric_product_check(0.5, 0.5, 0.5));
        // Coherent light with imbalance t = 1/4: p01 = p00^t exactly.
        let p00 = 1.0 / 16.0;
        assert!(!asymmetric_product_check(0.5, 0.125, p00));
        assert_eq!(imbalance_conditions(0.5, 0.125, p00, 0.25), [false, false]);
    }

    #[test]
    fn ratio_examples() {
        assert!((ratio_criterion(0.2, 0.04).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ratio_criterion(0.5, 0.0).unwrap(), 0.0);
        assert!(matches!(ratio_criterion(0.0, 0.0), Err(Error::UndefinedRatio)));
    }

    #[test]
    fn analytic_examples() {
        let p = analytic_probs(&EfficiencyVector(vec![1.0]), 0.5, 1.0, 1.0).unwrap();
        assert_eq!((p.p00, p.p01, p.p02), (0.0, 0.5, 0.5));
        assert_eq!(p.witness(), 0.5);
        let e = ensemble_probabilities(&EfficiencyVector(vec![1.0]), 0.5, 1.0, 1.0).unwrap();
        assert_eq!(e.witness(), 0.5);

        let p = analytic_probs(&EfficiencyVector(vec![0.5, 0.5]), 0.5, 1.0, 1.0).unwrap();
        assert!((p.p00 - 0.25).abs() < 1e-15);
        assert!((p.p0 - 0.5625).abs() < 1e-15);
        assert!((p.witness() - 0.0625).abs() < 1e-15);
        let e = ensemble_probabilities(&EfficiencyVector(vec![0.5, 0.5]), 0.5, 1.0, 1.0).unwrap();
        assert!((e.witness() - 0.0625).abs() < 1e-15);

        let vac = analytic_probs(&EfficiencyVector::default(), 0.5, 1.0, 1.0).unwrap();
        assert_eq!((vac.p00, vac.p01, vac.p02, vac.witness()), (1.0, 1.0, 1.0, 0.0));

        assert!(matches!(
            analytic_probs(&EfficiencyVector(vec![0.1, 1.2]), 0.5, 1.0, 1.0),
            Err(Error::EfficiencyOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn log_domain_matches_direct_products() {
        let etas: EfficiencyVector = (0..300).map(|i| 6.1e-4 * (-(i as f64) / 50.0).exp()).collect();
        let e = ensemble_probabilities(&etas, 0.45, 1.1, 0.9).unwrap();
        let (mut p00, mut p01, mut p02) = (1.0f64, 1.0f64, 1.0f64);
        for eta in etas.iter() {
            let (q1, q2) = (eta * 0.45 * 1.1, eta * 0.55 * 0.9);
            p00 *= 1.0 - q1 - q2;
            p01 *= 1.0 - q1;
            p02 *= 1.0 - q2;
        }
        let p = e.probabilities();
        assert!((p.p00 - p00).abs() < 1e-14);
        assert!((p.p01 - p01).abs() < 1e-14);
        assert!((p.p02 - p02).abs() < 1e-14);
        let direct = (p01 * p02).sqrt() - p00.sqrt();
        assert!((e.witness() - direct).abs() < 1e-14);
    }

    #[test]
    fn large_ensembles_do_not_underflow() {
        let etas = EfficiencyVector::uniform(6.1e-4, 100_000);
        let e = ensemble_probabilities(&etas, 0.5, 1.0, 1.0).unwrap();
        let p = e.probabilities();
        assert!(p.p00 > 0.0 && p.p00 < 1e-25);
        assert!(e.witness() > 0.0);
        // Parallel and sequential accumulation agree.
        let small: Vec<(f64, f64)> = etas.iter().map(|x| (x / 2.0, x / 2.0)).collect();
        let seq = small.chunks(1000).fold(Accum::default(), |mut acc, c| {
            c.iter().for_each(|&(a, b)| acc.push(a, b));
            acc
        });
        assert!((seq.p00.value() - e.ln_p00).abs() < 1e-9);
    }

    #[test]
    fn background_scales_witness() {
        let etas = EfficiencyVector::uniform(0.01, 50);
        let e = ensemble_probabilities(&etas, 0.5, 1.0, 1.0).unwrap();
        let noisy = e.with_background(0.9, 0.8);
        assert!((noisy.witness() - (0.72f64).sqrt() * e.witness()).abs() < 1e-15);
    }

    #[test]
    fn g2_examples() {
        assert_eq!(g2_estimate(&counts(100, 50, 50, 0)).unwrap(), 0.0);
        assert!(g2_estimate(&counts(100, 0, 0, 0)).is_err());
        // n equal weak emitters: g2 -> 1 - 1/n.
        let n = 4;
        let p = analytic_probs(&EfficiencyVector::uniform(1e-5, n), 0.5, 1.0, 1.0).unwrap();
        let g2 = g2_from_probabilities(&p).unwrap();
        assert!((g2 - 0.75).abs() < 1e-4, "{g2}");
    }

    #[test]
    fn report_from_counts() {
        let r = WitnessReport::from_counts(&counts(1000, 100, 100, 10)).unwrap();
        assert!((r.d - 1.180_558_268e-3).abs() < 1e-12);
        assert!((r.var_d.unwrap() - 1.43e-5).abs() < 1e-7);
        assert_eq!(r.sigma_d.unwrap(), r.var_d.unwrap().sqrt());
        assert_eq!(r.nonclassical_2sigma, r.nonclassical(2.0));
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "d",
            "var_d",
            "sigma_d",
            "nonclassical_2sigma",
            "g2",
            "ratio",
            "p00",
            "p0",
            "n_bins",
        ] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let single = WitnessReport::from_counts(&counts(10, 5, 5, 0)).unwrap();
        assert_eq!(single.var_d, None);
        assert!(!single.nonclassical_2sigma);
    }
}
