use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Geometric};
use rayon::prelude::*;

use super::{detection_axis, substream, PICOS_PER_SECOND};
use crate::error::{invalid, Error, Result};
use crate::geometry::CrystalLayout;
use crate::optics::{per_ion_efficiencies, DetectionModel, EfficiencyVector};
use crate::timetag::{record_order, Regime, StreamHeader, TagRecord};

/// Continuously driven ensemble. Times are in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousConfig {
    pub layout: CrystalLayout,
    pub model: DetectionModel,
    /// Emission rate of one ion once its dead time has elapsed, 1/s.
    pub rate_per_ion: f64,
    /// Minimum interval between two emissions of the same ion.
    pub dead_time: f64,
    pub duration: f64,
    pub bin_tau: f64,
    pub seed: u64,
}

impl ContinuousConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.rate_per_ion >= 0.0 && self.rate_per_ion.is_finite()) {
            return Err(invalid(
                "rate_per_ion",
                format!("must be finite and >= 0, got {}", self.rate_per_ion),
            ));
        }
        if !(self.dead_time >= 0.0 && self.dead_time.is_finite()) {
            return Err(invalid("dead_time", format!("must be >= 0, got {}", self.dead_time)));
        }
        if !(self.duration > 0.0 && self.duration * PICOS_PER_SECOND < u64::MAX as f64) {
            return Err(invalid(
                "duration",
                format!("must be positive and fit in u64 ps, got {}", self.duration),
            ));
        }
        if !(self.bin_tau > 0.0 && self.bin_tau <= self.duration) {
            return Err(invalid(
                "bin_tau",
                format!("must be in (0, duration], got {}", self.bin_tau),
            ));
        }
        if self.tau_ps() == 0 {
            return Err(invalid("bin_tau", "shorter than one picosecond"));
        }
        Ok(())
    }

    pub fn efficiencies(&self) -> EfficiencyVector {
        per_ion_efficiencies(&self.model, &self.layout, &detection_axis())
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration * PICOS_PER_SECOND).round() as u64
    }

    pub fn tau_ps(&self) -> u64 {
        (self.bin_tau * PICOS_PER_SECOND).round() as u64
    }

    pub fn header(&self) -> StreamHeader {
        StreamHeader::new(Regime::Continuous, 1, self.duration_ps())
    }
}

/// Per-ion emission rate giving `target_rate` detected counts per second
/// summed over both detectors.
pub fn calibrate_rate_per_ion(
    etas: &EfficiencyVector,
    model: &DetectionModel,
    dead_time: f64,
    target_rate: f64,
) -> Result<f64> {
    if !(target_rate >= 0.0) || !(dead_time >= 0.0) {
        return Err(invalid("target_rate", "rates and dead time must be non-negative"));
    }
    let detected_fraction: f64 = etas
        .iter()
        .map(|eta| {
            let (q1, q2) = model.split(eta);
            q1 + q2
        })
        .sum();
    if !(detected_fraction > 0.0) {
        return Err(Error::NoEmitters);
    }
    // Long-run emission rate of a renewal process with mean gap dead + 1/rate.
    let renewal = target_rate / detected_fraction;
    if renewal * dead_time >= 1.0 {
        return Err(invalid(
            "target_rate",
            format!(
                "needs {renewal:.3e} emissions/s per ion, above the dead-time limit {:.3e}",
                1.0 / dead_time
            ),
        ));
    }
    Ok(renewal / (1.0 - renewal * dead_time))
}

/// Detected emissions of one ion as `(time_ps, channel)`.
///
/// Emissions form a renewal process with gaps `dead + Exp(rate)`, the first
/// one `Exp(rate)` from the start. Each is detected with probability
/// `q = q1 + q2`; the number of emissions up to the next detected one is
/// `1 + Geometric(q)`, so the gap between detected photons is drawn in one
/// step as `k·dead + Gamma(k, 1/rate)`.
fn ion_stream<R: Rng>(rng: &mut R, q1: f64, q2: f64, rate: f64, dead_ps: f64, end_ps: f64, out: &mut Vec<TagRecord>) {
    let q = q1 + q2;
    if !(q > 0.0 && rate > 0.0) {
        return;
    }
    let skip = Geometric::new(q).expect("q in (0, 1]");
    let scale = PICOS_PER_SECOND / rate;
    let mut t = -dead_ps;
    loop {
        let k = 1 + skip.sample(rng);
        let waiting = if k == 1 {
            Exp::new(1.0).unwrap().sample(rng)
        } else {
            Gamma::new(k as f64, 1.0).unwrap().sample(rng)
        };
        t += k as f64 * dead_ps + waiting * scale;
        if t >= end_ps {
            break;
        }
        let channel = if rng.random::<f64>() * q < q1 { 1 } else { 2 };
        out.push(TagRecord::new(channel, t as u64));
    }
}

/// Poisson dark clicks at `rate` per second on one channel.
fn dark_stream<R: Rng>(rng: &mut R, channel: u8, rate: f64, end_ps: f64, out: &mut Vec<TagRecord>) {
    if rate <= 0.0 {
        return;
    }
    let gap = Exp::new(rate / PICOS_PER_SECOND).unwrap();
    let mut t = gap.sample(rng);
    while t < end_ps {
        out.push(TagRecord::new(channel, t as u64));
        t += gap.sample(rng);
    }
}

/// Time-ordered detection records of independently emitting ions.
pub fn run_continuous(config: &ContinuousConfig) -> Result<Vec<TagRecord>> {
    config.validate()?;
    let etas = config.efficiencies();
    let pairs: Vec<(f64, f64)> = etas.iter().map(|eta| config.model.split(eta)).collect();
    for (index, &(q1, q2)) in pairs.iter().enumerate() {
        if q1 + q2 > 1.0 {
            return Err(Error::EfficiencyOutOfRange { index, value: q1 + q2 });
        }
    }
    let end_ps = config.duration_ps() as f64;
    let dead_ps = config.dead_time * PICOS_PER_SECOND;
    let n = pairs.len() as u64;
    // A per-bin dark probability p is a Poisson rate of -ln(1-p)/τ.
    let dark_rate = -(-config.model.dark_prob).ln_1p() / config.bin_tau;

    let mut records: Vec<TagRecord> = (0..n + 2)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = substream(config.seed, i);
            let mut out = Vec::new();
            if i < n {
                let (q1, q2) = pairs[i as usize];
                ion_stream(&mut rng, q1, q2, config.rate_per_ion, dead_ps, end_ps, &mut out);
            } else {
                dark_stream(&mut rng, (i - n + 1) as u8, dark_rate, end_ps, &mut out);
            }
            out
        })
        .collect();
    records.par_sort_unstable_by(record_order);
    Ok(records)
}
