//! Time-tag streams and their reduction to per-bin click tallies.

mod format;
mod reduce;

pub use format::{
    read_csv, read_stream, write_csv, write_stream, StreamHeader, StreamReader, HEADER_LEN, MAGIC, RECORD_LEN, VERSION,
};
pub use reduce::{bin_counts_continuous, bin_counts_continuous_par, chunk_bounds, gated_counts, BinMapper, Reducer};

use std::iter::Sum;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagRecord {
    pub channel: u8,
    pub time_ps: u64,
}

impl TagRecord {
    pub fn new(channel: u8, time_ps: u64) -> Self {
        Self { channel, time_ps }
    }
}

/// Order used when merging streams: by time, then channel.
pub fn record_order(a: &TagRecord, b: &TagRecord) -> std::cmp::Ordering {
    a.time_ps.cmp(&b.time_ps).then(a.channel.cmp(&b.channel))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Continuous,
    Pulsed,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::Continuous => 0,
            Regime::Pulsed => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Regime::Continuous),
            1 => Some(Regime::Pulsed),
            _ => None,
        }
    }
}

/// Bin tallies. `n_s1`, `n_s2` count bins where only that detector clicked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinCounts {
    pub n_tb: u64,
    pub n_s1: u64,
    pub n_s2: u64,
    pub n_c: u64,
}

impl BinCounts {
    pub fn validate(&self) -> Result<()> {
        if self.n_tb == 0 {
            return Err(Error::EmptyMeasurement);
        }
        let clicked = self.n_s1.checked_add(self.n_s2).and_then(|s| s.checked_add(self.n_c));
        match clicked {
            Some(c) if c <= self.n_tb => Ok(()),
            _ => Err(Error::InconsistentCounts(format!(
                "{} + {} + {} clicked bins exceed {} total bins",
                self.n_s1, self.n_s2, self.n_c, self.n_tb
            ))),
        }
    }

    /// Bins with at least one click.
    pub fn clicked(&self) -> u64 {
        self.n_s1 + self.n_s2 + self.n_c
    }

    pub fn silent(&self) -> u64 {
        self.n_tb - self.clicked()
    }

    /// Tallies one bin given which detectors fired.
    #[inline]
    pub fn record(&mut self, det1: bool, det2: bool) {
        match (det1, det2) {
            (true, true) => self.n_c += 1,
            (true, false) => self.n_s1 += 1,
            (false, true) => self.n_s2 += 1,
            (false, false) => {}
        }
    }
}

impl Add for BinCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            n_tb: self.n_tb + rhs.n_tb,
            n_s1: self.n_s1 + rhs.n_s1,
            n_s2: self.n_s2 + rhs.n_s2,
            n_c: self.n_c + rhs.n_c,
        }
    }
}

impl AddAssign for BinCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sum for BinCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

/// Detection window within each pulse period.
///
/// A record at offset `o` inside its period counts when
/// `gate_open + trim ≤ o < gate_close − trim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub period_ps: u64,
    pub gate_open_ps: u64,
    pub gate_close_ps: u64,
    pub trim_ps: u64,
}

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        if self.period_ps == 0 {
            return Err(invalid("period_ps", "must be positive"));
        }
        if !(self.gate_open_ps < self.gate_close_ps && self.gate_close_ps <= self.period_ps) {
            return Err(invalid(
                "gate",
                format!(
                    "need 0 <= open < close <= period, got [{}, {}) in {}",
                    self.gate_open_ps, self.gate_close_ps, self.period_ps
                ),
            ));
        }
        if 2 * self.trim_ps >= self.gate_close_ps - self.gate_open_ps {
            return Err(invalid("trim_ps", "trim leaves an empty window"));
        }
        Ok(())
    }

    /// Effective window `[start, end)` after trimming.
    pub fn window(&self) -> (u64, u64) {
        (self.gate_open_ps + self.trim_ps, self.gate_close_ps - self.trim_ps)
    }
}
