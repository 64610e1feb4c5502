//! Inputs shared by the benchmarks.

use clickwit_core::geometry::{sample_crystal, DEFAULT_SPACING_UM};
use clickwit_core::simulate::PulsedConfig;
use clickwit_core::timetag::{write_stream, Regime, StreamHeader, TagRecord};
use clickwit_core::DetectionModel;

/// The 275-ion crystal under the default optics at 71% emission probability.
pub fn crystal_275(n_pulses: u64) -> PulsedConfig {
    PulsedConfig {
        layout: sample_crystal(275, DEFAULT_SPACING_UM, 0).expect("valid crystal"),
        model: DetectionModel::default(),
        eta_p: 0.71,
        n_pulses,
        seed: 1,
    }
}

/// `n` time-ordered records alternating irregularly between the channels,
/// about one per `mean_gap_ps`.
pub fn synthetic_records(n: usize, mean_gap_ps: u64) -> Vec<TagRecord> {
    // Fixed LCG: cheap and identical across runs.
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut t = 0u64;
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            t += 1 + (state >> 33) % (2 * mean_gap_ps);
            TagRecord::new(1 + (state >> 63) as u8, t)
        })
        .collect()
}

/// The records encoded as an IONTAG byte stream.
pub fn encoded(records: &[TagRecord], regime: Regime) -> Vec<u8> {
    let duration = records.last().map_or(0, |r| r.time_ps + 1);
    let mut bytes = Vec::new();
    write_stream(&mut bytes, &StreamHeader::new(regime, 1, duration), records).expect("sorted records");
    bytes
}
