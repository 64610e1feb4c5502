//! Seeded Monte Carlo generation of click data.
//!
//! Work is split into fixed-size blocks, each driven by its own ChaCha stream
//! derived from the seed, so results do not depend on the thread count.

mod classical;
mod continuous;
mod pulsed;

pub use classical::{closed_form_classical, run_classical, run_classical_with_tags, ClassicalConfig, ClassicalKind};
pub use continuous::{calibrate_rate_per_ion, run_continuous, ContinuousConfig};
pub use pulsed::{run_pulsed, run_pulsed_efficiencies, run_pulsed_with_tags, PulseTiming, PulsedConfig};

use nalgebra::{Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for work unit `stream` of a run seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Optical axis used when converting layouts to efficiencies.
pub fn detection_axis() -> Unit<Vector3<f64>> {
    Vector3::z_axis()
}

pub(crate) const PICOS_PER_SECOND: f64 = 1e12;
