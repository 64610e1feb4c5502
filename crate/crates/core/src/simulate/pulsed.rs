use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{detection_axis, substream};
use crate::error::{invalid, Error, Result};
use crate::geometry::CrystalLayout;
use crate::optics::{per_ion_efficiencies, DetectionModel, EfficiencyVector};
use crate::timetag::{BinCounts, TagRecord};

const BLOCK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PulsedConfig {
    pub layout: CrystalLayout,
    pub model: DetectionModel,
    /// Probability that an ion is prepared and emits in a given pulse.
    pub eta_p: f64,
    pub n_pulses: u64,
    pub seed: u64,
}

impl PulsedConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        check_common(self.eta_p, self.n_pulses)
    }

    /// Expected photons emitted per pulse, `n·η_p`.
    pub fn mean_photons_per_pulse(&self) -> f64 {
        self.layout.len() as f64 * self.eta_p
    }

    pub fn efficiencies(&self) -> EfficiencyVector {
        per_ion_efficiencies(&self.model, &self.layout, &detection_axis())
    }
}

fn check_common(eta_p: f64, n_pulses: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta_p) {
        return Err(invalid("eta_p", format!("must be in [0, 1], got {eta_p}")));
    }
    if n_pulses == 0 {
        return Err(invalid("n_pulses", "need at least one pulse"));
    }
    Ok(())
}

/// Where clicks of pulse `p` land in a tag stream: `p·period + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseTiming {
    pub period_ps: u64,
    pub click_offset_ps: u64,
}

impl PulseTiming {
    pub fn validate(&self, n_pulses: u64) -> Result<()> {
        if self.period_ps == 0 || self.click_offset_ps >= self.period_ps {
            return Err(invalid("timing", "click offset must lie inside a positive period"));
        }
        if n_pulses.checked_mul(self.period_ps).is_none() {
            return Err(invalid("timing", "stream duration overflows u64 picoseconds"));
        }
        Ok(())
    }
}

impl Default for PulseTiming {
    fn default() -> Self {
        Self {
            period_ps: 1_000_000,
            click_offset_ps: 500_000,
        }
    }
}

/// Per-emitter per-pulse probabilities of a detector-1 and a detector-2 click.
struct Emitter {
    skip: Geometric,
    to_det1: f64,
}

fn emitters(etas: &EfficiencyVector, model: &DetectionModel, eta_p: f64) -> Result<Vec<Emitter>> {
    let mut out = Vec::with_capacity(etas.len());
    for (index, eta) in etas.iter().enumerate() {
        let (q1, q2) = model.split(eta);
        if !(q1 >= 0.0 && q2 >= 0.0 && q1 + q2 <= 1.0) {
            return Err(Error::EfficiencyOutOfRange { index, value: q1 + q2 });
        }
        let rate = eta_p * (q1 + q2);
        if rate > 0.0 {
            out.push(Emitter {
                skip: Geometric::new(rate).expect("rate in (0, 1]"),
                to_det1: q1 / (q1 + q2),
            });
        }
    }
    Ok(out)
}

/// Marks detector bits for every pulse of one block.
fn fill_block<R: Rng>(rng: &mut R, emitters: &[Emitter], dark: Option<&Geometric>, mask: &mut [u8]) {
    mask.fill(0);
    let len = mask.len() as u64;
    for e in emitters {
        let mut p = e.skip.sample(rng);
        while p < len {
            mask[p as usize] |= if rng.random::<f64>() < e.to_det1 { 1 } else { 2 };
            p = p.saturating_add(1).saturating_add(e.skip.sample(rng));
        }
    }
    if let Some(dark) = dark {
        for bit in [1u8, 2] {
            let mut p = dark.sample(rng);
            while p < len {
                mask[p as usize] |= bit;
                p = p.saturating_add(1).saturating_add(dark.sample(rng));
            }
        }
    }
}

fn tally(mask: &[u8]) -> BinCounts {
    let mut hist = [0u64; 4];
    for &m in mask {
        hist[m as usize] += 1;
    }
    BinCounts {
        n_tb: mask.len() as u64,
        n_s1: hist[1],
        n_s2: hist[2],
        n_c: hist[3],
    }
}

fn block_len(n_pulses: u64, b: u64) -> usize {
    (n_pulses - b * BLOCK).min(BLOCK) as usize
}

fn prepare(
    etas: &EfficiencyVector,
    model: &DetectionModel,
    eta_p: f64,
    n_pulses: u64,
) -> Result<(Vec<Emitter>, Option<Geometric>)> {
    model.validate()?;
    check_common(eta_p, n_pulses)?;
    let emitters = emitters(etas, model, eta_p)?;
    let dark = (model.dark_prob > 0.0).then(|| Geometric::new(model.dark_prob).expect("dark_prob in (0, 1)"));
    Ok((emitters, dark))
}

/// Pulsed emission from emitters with the given overall efficiencies.
///
/// Each pulse: every emitter independently emits with probability `eta_p`;
/// the photon clicks detector 1 with probability `ηTκ₁`, detector 2 with
/// `η(1−T)κ₂`, or is lost. Dark clicks are OR-ed in per detector.
pub fn run_pulsed_efficiencies(
    etas: &EfficiencyVector,
    model: &DetectionModel,
    eta_p: f64,
    n_pulses: u64,
    seed: u64,
) -> Result<BinCounts> {
    let (emitters, dark) = prepare(etas, model, eta_p, n_pulses)?;
    let n_blocks = n_pulses.div_ceil(BLOCK);
    Ok((0..n_blocks)
        .into_par_iter()
        .map_init(
            || vec![0u8; BLOCK as usize],
            |buf, b| {
                let mask = &mut buf[..block_len(n_pulses, b)];
                fill_block(&mut substream(seed, b), &emitters, dark.as_ref(), mask);
                tally(mask)
            },
        )
        .sum())
}

pub fn run_pulsed(config: &PulsedConfig) -> Result<BinCounts> {
    config.validate()?;
    run_pulsed_efficiencies(
        &config.efficiencies(),
        &config.model,
        config.eta_p,
        config.n_pulses,
        config.seed,
    )
}

/// [`run_pulsed`] that also returns the clicks as a tag stream. Counts are
/// identical to [`run_pulsed`] for the same config.
pub fn run_pulsed_with_tags(config: &PulsedConfig, timing: PulseTiming) -> Result<(BinCounts, Vec<TagRecord>)> {
    config.validate()?;
    timing.validate(config.n_pulses)?;
    let (emitters, dark) = prepare(&config.efficiencies(), &config.model, config.eta_p, config.n_pulses)?;
    let n_pulses = config.n_pulses;
    let parts: Vec<(BinCounts, Vec<TagRecord>)> = (0..n_pulses.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut mask = vec![0u8; block_len(n_pulses, b)];
            fill_block(&mut substream(config.seed, b), &emitters, dark.as_ref(), &mut mask);
            let mut tags = Vec::new();
            for (i, &m) in mask.iter().enumerate() {
                let t = (b * BLOCK + i as u64) * timing.period_ps + timing.click_offset_ps;
                if m & 1 != 0 {
                    tags.push(TagRecord::new(1, t));
                }
                if m & 2 != 0 {
                    tags.push(TagRecord::new(2, t));
                }
            }
            (tally(&mask), tags)
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_crystal;
    use crate::timetag::{gated_counts, GateSpec};
    use crate::witness::{analytic_probs, probabilities_from_counts};

    fn ideal() -> DetectionModel {
        DetectionModel {
            eta0: 1.0,
            ..DetectionModel::default()
        }
    }

    #[test]
    fn single_ideal_emitter_never_coincides() {
        let c = run_pulsed_efficiencies(&EfficiencyVector(vec![1.0]), &ideal(), 1.0, 1_000_000, 3).unwrap();
        assert_eq!(c.n_c, 0);
        assert_eq!(c.n_tb, 1_000_000);
        assert_eq!(c.n_s1 + c.n_s2, 1_000_000);
        assert!((c.n_s1 as f64 / 1e6 - 0.5).abs() < 0.003);
    }

    #[test]
    fn deterministic_given_seed() {
        let layout = sample_crystal(55, 3.0, 2).unwrap();
        let config = PulsedConfig {
            layout,
            model: DetectionModel::default(),
            eta_p: 0.71,
            n_pulses: 300_001,
            seed: 77,
        };
        let a = run_pulsed(&config).unwrap();
        assert_eq!(a, run_pulsed(&config).unwrap());
        assert_ne!(
            a,
            run_pulsed(&PulsedConfig {
                seed: 78,
                ..config.clone()
            })
            .unwrap()
        );
        assert_eq!(a.n_tb, 300_001);
    }

    #[test]
    fn tags_reduce_to_the_same_counts() {
        let config = PulsedConfig {
            layout: sample_crystal(12, 2.0, 5).unwrap(),
            model: DetectionModel {
                eta0: 0.05,
                dark_prob: 1e-3,
                ..DetectionModel::default()
            },
            eta_p: 0.7,
            n_pulses: 200_000,
            seed: 8,
        };
        let timing = PulseTiming::default();
        let (counts, tags) = run_pulsed_with_tags(&config, timing).unwrap();
        assert_eq!(counts, run_pulsed(&config).unwrap());
        let gate = GateSpec {
            period_ps: timing.period_ps,
            gate_open_ps: timing.click_offset_ps - 1000,
            gate_close_ps: timing.click_offset_ps + 1000,
            trim_ps: 100,
        };
        assert_eq!(gated_counts(&tags, &gate, config.n_pulses).unwrap(), counts);
    }

    #[test]
    fn agrees_with_analytic_probabilities() {
        let etas = EfficiencyVector(vec![0.3, 0.1, 0.05, 0.02]);
        let model = DetectionModel {
            kappa1: 0.9,
            kappa2: 1.1,
            split_t: 0.4,
            eta0: 1.0,
            ..DetectionModel::default()
        };
        let eta_p = 0.8;
        let n = 2_000_000;
        let c = run_pulsed_efficiencies(&etas, &model, eta_p, n, 21).unwrap();
        let emp = probabilities_from_counts(&c).unwrap();
        let exact = analytic_probs(&etas.scaled(eta_p), model.split_t, model.kappa1, model.kappa2).unwrap();
        for (e, x) in [(emp.p00, exact.p00), (emp.p01, exact.p01), (emp.p02, exact.p02)] {
            let se = (x * (1.0 - x) / n as f64).sqrt();
            assert!((e - x).abs() < 4.0 * se, "{e} vs {x}");
        }
    }

    #[test]
    fn rejects_invalid_configs() {
        let etas = EfficiencyVector(vec![0.5]);
        assert!(run_pulsed_efficiencies(&etas, &ideal(), 1.5, 10, 0).is_err());
        assert!(run_pulsed_efficiencies(&etas, &ideal(), 0.5, 0, 0).is_err());
        let too_bright = DetectionModel { kappa1: 4.0, ..ideal() };
        assert!(matches!(
            run_pulsed_efficiencies(&etas, &too_bright, 0.5, 10, 0),
            Err(Error::EfficiencyOutOfRange { .. })
        ));
    }
}
