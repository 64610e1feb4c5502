//! Nonclassicality of light from ensembles of independent single-photon
//! emitters, as seen by two binary (click/no-click) detectors.
//!
//! * [`geometry`]: ion positions in shell-structured or lattice crystals.
//! * [`optics`]: per-ion detection efficiencies and the detector split.
//! * [`witness`]: click probabilities and the witness `d = P₀ − √P₀₀`.
//! * [`stats`]: uncertainty of `d`, required run counts, trend tests.
//! * [`simulate`]: seeded Monte Carlo of pulsed, continuous and classical sources.
//! * [`timetag`]: the IONTAG stream format and bin reducers.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod optics;
pub mod simulate;
pub mod stats;
pub mod timetag;
pub mod witness;

pub use error::{Error, Result, StreamError};
pub use geometry::{sample_crystal, CrystalLayout, Provenance, ShellSpec};
pub use optics::{DetectionModel, EfficiencyVector};
pub use simulate::{ClassicalConfig, ClassicalKind, ContinuousConfig, PulsedConfig};
pub use stats::{TrendFit, XYStats};
pub use timetag::{BinCounts, GateSpec, Regime, StreamHeader, TagRecord};
pub use witness::{ClickProbabilities, EnsembleProbabilities, WitnessReport};
