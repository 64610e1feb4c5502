//! Fully resolved run configurations. A plan plus an output directory
//! determines every byte a run writes.

use std::path::PathBuf;

use clickwit_core::geometry::{crystal_for_size, read_layout_csv};
use clickwit_core::simulate::{ClassicalKind, PulseTiming};
use clickwit_core::{CrystalLayout, DetectionModel};
use serde::{Deserialize, Serialize};

/// Where the emitter positions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CrystalSource {
    /// Shell model up to 2000 ions, lattice above.
    Generated { ions: usize, spacing_um: f64, seed: u64 },
    /// Layout CSV written by `clickwit crystal`.
    File { path: PathBuf },
}

impl CrystalSource {
    pub fn build(&self) -> anyhow::Result<CrystalLayout> {
        Ok(match self {
            Self::Generated { ions, spacing_um, seed } => crystal_for_size(*ions, *spacing_um, *seed)?,
            Self::File { path } => {
                let file = std::fs::File::open(path)?;
                read_layout_csv(std::io::BufReader::new(file))?
            }
        })
    }
}

/// Emitters seen by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Emitters {
    /// `ions` emitters sharing one overall efficiency.
    Uniform { ions: usize, eta: f64 },
    /// Efficiencies from positions and the detection model.
    Crystal { crystal: CrystalSource },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalPlan {
    pub crystal: CrystalSource,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsedPlan {
    pub crystal: CrystalSource,
    pub model: DetectionModel,
    pub eta_p: f64,
    pub pulses: u64,
    pub seed: u64,
    pub timing: PulseTiming,
    pub counts_output: String,
    pub tags_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousPlan {
    pub crystal: CrystalSource,
    pub model: DetectionModel,
    /// Emission rate per ion (1/s); `None` calibrates it to `target_rate`.
    pub rate_per_ion: Option<f64>,
    /// Detected counts per second over both detectors.
    pub target_rate: Option<f64>,
    pub dead_time_s: f64,
    pub duration_s: f64,
    pub bin_tau_s: f64,
    pub seed: u64,
    pub counts_output: String,
    pub tags_output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalPlan {
    pub kind: ClassicalKind,
    pub mu: f64,
    pub bins: u64,
    #[serde(rename = "split_T")]
    pub split_t: f64,
    pub seed: u64,
    pub timing: PulseTiming,
    pub counts_output: String,
    pub tags_output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Auto,
    Iontag,
    Counts,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzePlan {
    pub input: PathBuf,
    pub format: InputFormat,
    /// Continuous bin width.
    pub tau_ps: Option<u64>,
    pub period_ps: u64,
    pub gate_open_ps: u64,
    pub gate_close_ps: u64,
    pub trim_ps: u64,
    /// Stream length for CSV input; IONTAG carries its own.
    pub duration_ps: Option<u64>,
    /// Treat CSV input as pulsed rather than continuous.
    pub pulsed: bool,
    pub chunks: usize,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictPlan {
    pub emitters: Emitters,
    pub model: DetectionModel,
    pub eta_p: f64,
    pub runs: Option<u64>,
    pub k_sigma: Option<f64>,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub ions: Vec<usize>,
    pub model: DetectionModel,
    pub eta_p: f64,
    pub spacing_um: f64,
    /// Crystal seeds `seed, seed+1, …` averaged per size.
    pub seed: u64,
    pub seeds: u64,
    pub runs: u64,
    pub k_sigma: f64,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "parameters", rename_all = "kebab-case")]
pub enum Plan {
    Crystal(CrystalPlan),
    SimulatePulsed(PulsedPlan),
    SimulateContinuous(ContinuousPlan),
    SimulateClassical(ClassicalPlan),
    Analyze(AnalyzePlan),
    Predict(PredictPlan),
    Sweep(SweepPlan),
}

impl Plan {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Crystal(_) => "crystal",
            Self::SimulatePulsed(_) => "simulate-pulsed",
            Self::SimulateContinuous(_) => "simulate-continuous",
            Self::SimulateClassical(_) => "simulate-classical",
            Self::Analyze(_) => "analyze",
            Self::Predict(_) => "predict",
            Self::Sweep(_) => "sweep",
        }
    }

    /// The seed driving the run's randomness, if any.
    pub fn seed(&self) -> Option<u64> {
        let crystal_seed = |c: &CrystalSource| match c {
            CrystalSource::Generated { seed, .. } => Some(*seed),
            CrystalSource::File { .. } => None,
        };
        match self {
            Self::Crystal(p) => crystal_seed(&p.crystal),
            Self::SimulatePulsed(p) => Some(p.seed),
            Self::SimulateContinuous(p) => Some(p.seed),
            Self::SimulateClassical(p) => Some(p.seed),
            Self::Analyze(_) => None,
            Self::Predict(p) => match &p.emitters {
                Emitters::Uniform { .. } => None,
                Emitters::Crystal { crystal } => crystal_seed(crystal),
            },
            Self::Sweep(p) => Some(p.seed),
        }
    }
}
