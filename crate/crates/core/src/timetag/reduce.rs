//! Single-pass reduction of time-ordered records to [`BinCounts`].

use rayon::prelude::*;

use super::{BinCounts, GateSpec, TagRecord};
use crate::error::{invalid, Result, StreamError};

/// Assigns a record time to an analysis bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinMapper {
    /// Bins `[bτ, (b+1)τ)` for `b < n_bins`.
    Continuous { tau_ps: u64, n_bins: u64 },
    /// One bin per pulse period, counting only records inside the trimmed gate.
    Gated { gate: GateSpec, n_pulses: u64 },
}

impl BinMapper {
    pub fn continuous(tau_ps: u64, duration_ps: u64) -> Result<Self> {
        if tau_ps == 0 {
            return Err(invalid("tau_ps", "bin width must be positive"));
        }
        Ok(Self::Continuous {
            tau_ps,
            n_bins: duration_ps / tau_ps,
        })
    }

    pub fn gated(gate: GateSpec, n_pulses: u64) -> Result<Self> {
        gate.validate()?;
        if n_pulses == 0 {
            return Err(invalid("n_pulses", "need at least one pulse"));
        }
        Ok(Self::Gated { gate, n_pulses })
    }

    pub fn n_bins(&self) -> u64 {
        match *self {
            Self::Continuous { n_bins, .. } => n_bins,
            Self::Gated { n_pulses, .. } => n_pulses,
        }
    }

    #[inline]
    pub fn bin_of(&self, time_ps: u64) -> Option<u64> {
        match *self {
            Self::Continuous { tau_ps, n_bins } => {
                let b = time_ps / tau_ps;
                (b < n_bins).then_some(b)
            }
            Self::Gated { gate, n_pulses } => {
                let pulse = time_ps / gate.period_ps;
                let offset = time_ps % gate.period_ps;
                let (start, end) = gate.window();
                (pulse < n_pulses && offset >= start && offset < end).then_some(pulse)
            }
        }
    }
}

/// Splits `n_bins` into `k` contiguous ranges of near-equal length.
pub fn chunk_bounds(n_bins: u64, k: usize) -> Vec<u64> {
    let k = k.max(1) as u128;
    (0..=k).map(|i| (i * n_bins as u128 / k) as u64).collect()
}

/// Streaming classifier. Holds the click state of one bin at a time and
/// optionally tallies `k` contiguous bin ranges separately.
#[derive(Debug, Clone)]
pub struct Reducer {
    mapper: BinMapper,
    bounds: Vec<u64>,
    counts: Vec<BinCounts>,
    chunk: usize,
    current: Option<u64>,
    mask: u8,
    previous_ps: Option<u64>,
    index: u64,
}

impl Reducer {
    pub fn new(mapper: BinMapper) -> Self {
        Self::chunked(mapper, 1)
    }

    pub fn chunked(mapper: BinMapper, k: usize) -> Self {
        let bounds = chunk_bounds(mapper.n_bins(), k);
        let counts = vec![BinCounts::default(); bounds.len() - 1];
        Self {
            mapper,
            bounds,
            counts,
            chunk: 0,
            current: None,
            mask: 0,
            previous_ps: None,
            index: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, rec: TagRecord) -> Result<()> {
        if !(rec.channel == 1 || rec.channel == 2) {
            return Err(StreamError::BadChannel {
                index: self.index,
                channel: rec.channel,
            }
            .into());
        }
        if let Some(prev) = self.previous_ps {
            if rec.time_ps < prev {
                return Err(StreamError::TimeOrder {
                    index: self.index,
                    time_ps: rec.time_ps,
                    previous_ps: prev,
                }
                .into());
            }
        }
        self.previous_ps = Some(rec.time_ps);
        self.index += 1;
        if let Some(bin) = self.mapper.bin_of(rec.time_ps) {
            if self.current != Some(bin) {
                self.flush();
                self.current = Some(bin);
            }
            self.mask |= rec.channel;
        }
        Ok(())
    }

    fn flush(&mut self) {
        if let Some(bin) = self.current.take() {
            while bin >= self.bounds[self.chunk + 1] {
                self.chunk += 1;
            }
            self.counts[self.chunk].record(self.mask & 1 != 0, self.mask & 2 != 0);
            self.mask = 0;
        }
    }

    /// Per-range tallies, in time order.
    pub fn finish_chunks(mut self) -> Vec<BinCounts> {
        self.flush();
        for (i, c) in self.counts.iter_mut().enumerate() {
            c.n_tb = self.bounds[i + 1] - self.bounds[i];
        }
        self.counts
    }

    pub fn finish(self) -> BinCounts {
        self.finish_chunks().into_iter().sum()
    }
}

fn reduce(records: &[TagRecord], mapper: BinMapper) -> Result<BinCounts> {
    let mut r = Reducer::new(mapper);
    for &rec in records {
        r.push(rec)?;
    }
    Ok(r.finish())
}

/// Tallies `⌊duration/τ⌋` bins of width `τ`. Records at or after the end of
/// the last complete bin are ignored.
pub fn bin_counts_continuous(records: &[TagRecord], tau_ps: u64, duration_ps: u64) -> Result<BinCounts> {
    reduce(records, BinMapper::continuous(tau_ps, duration_ps)?)
}

/// Tallies one bin per pulse over `n_pulses` periods.
pub fn gated_counts(records: &[TagRecord], gate: &GateSpec, n_pulses: u64) -> Result<BinCounts> {
    reduce(records, BinMapper::gated(*gate, n_pulses)?)
}

const PAR_MIN_SLICE: usize = 1 << 16;

/// Parallel [`bin_counts_continuous`]: the record slice is cut where the bin
/// index changes and the partial tallies are summed.
pub fn bin_counts_continuous_par(records: &[TagRecord], tau_ps: u64, duration_ps: u64) -> Result<BinCounts> {
    let mapper = BinMapper::continuous(tau_ps, duration_ps)?;
    let pieces = (records.len() / PAR_MIN_SLICE).clamp(1, 4 * rayon::current_num_threads());
    if pieces == 1 {
        return reduce(records, mapper);
    }
    let bin = |t: u64| t / tau_ps;
    let mut cuts = vec![0usize];
    for p in 1..pieces {
        let mut at = (p * records.len() / pieces).max(*cuts.last().unwrap());
        while at < records.len() && at > 0 && bin(records[at].time_ps) == bin(records[at - 1].time_ps) {
            at += 1;
        }
        cuts.push(at);
    }
    cuts.push(records.len());
    cuts.dedup();

    // Order across cut points is checked here; each piece checks its interior.
    for w in cuts.windows(2).skip(1) {
        let i = w[0];
        if i > 0 && i < records.len() && records[i].time_ps < records[i - 1].time_ps {
            return Err(StreamError::TimeOrder {
                index: i as u64,
                time_ps: records[i].time_ps,
                previous_ps: records[i - 1].time_ps,
            }
            .into());
        }
    }
    let partial: Vec<BinCounts> = cuts
        .par_windows(2)
        .map(|w| {
            let mut r = Reducer::new(mapper);
            for (j, &rec) in records[w[0]..w[1]].iter().enumerate() {
                r.push(rec).map_err(|e| offset_index(e, w[0] as u64, j as u64))?;
            }
            let c = r.finish();
            Ok(BinCounts { n_tb: 0, ..c })
        })
        .collect::<Result<_>>()?;
    Ok(BinCounts {
        n_tb: mapper.n_bins(),
        ..partial.into_iter().sum()
    })
}

fn offset_index(e: crate::error::Error, base: u64, local: u64) -> crate::error::Error {
    use crate::error::Error;
    match e {
        Error::Stream(StreamError::TimeOrder {
            time_ps, previous_ps, ..
        }) => StreamError::TimeOrder {
            index: base + local,
            time_ps,
            previous_ps,
        }
        .into(),
        Error::Stream(StreamError::BadChannel { channel, .. }) => StreamError::BadChannel {
            index: base + local,
            channel,
        }
        .into(),
        other => other,
    }
}
