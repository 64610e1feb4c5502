//! Command-line syntax and its resolution into [`Plan`]s.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use clickwit_core::geometry::DEFAULT_SPACING_UM;
use clickwit_core::simulate::{ClassicalKind, PulseTiming};
use clickwit_core::DetectionModel;

use crate::plan::*;
use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "clickwit",
    version,
    about = "Click-statistics nonclassicality witness for emitter ensembles"
)]
pub struct Cli {
    /// Directory receiving every output file and the run manifest.
    #[arg(long, global = true, env = "CLICKWIT_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an ion layout and write it as CSV.
    Crystal(CrystalCmd),
    /// Generate click data.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Reduce a tag stream or bin counts to a witness report.
    Analyze(AnalyzeCmd),
    /// Analytic witness, its variance and the runs needed to resolve it.
    Predict(PredictCmd),
    /// Analytic witness over a list of crystal sizes, as CSV.
    Sweep(SweepCmd),
    /// Rerun the configuration recorded in a manifest.
    Replay(ReplayCmd),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Pulsed excitation of a crystal.
    Pulsed(PulsedCmd),
    /// Continuous excitation with per-ion dead time.
    Continuous(ContinuousCmd),
    /// Coherent or thermal light.
    Classical(ClassicalCmd),
}

/// Accepts plain integers and exact float spellings such as `1e7`.
fn count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x >= 0.0 && x.fract() == 0.0 && x < u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

/// `2sigma`, `2σ` or plain `2`.
fn sigma_multiple(s: &str) -> Result<f64, String> {
    let trimmed = s.trim_end_matches("sigma").trim_end_matches('σ');
    match trimmed.parse::<f64>() {
        Ok(k) if k > 0.0 && k.is_finite() => Ok(k),
        _ => Err(format!("`{s}` is not a confidence like `2sigma`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct OpticsArgs {
    /// Base model: `default`, `apd`, `wide-field` or a TOML file.
    #[arg(long, default_value = "default")]
    pub model: String,
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Radial width, µm.
    #[arg(long)]
    pub sigma_r: Option<f64>,
    /// Axial width, µm.
    #[arg(long)]
    pub sigma_a: Option<f64>,
    /// Fraction of light sent to detector 1.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub kappa2: Option<f64>,
    /// Per-bin dark-click probability of each detector.
    #[arg(long)]
    pub dark_prob: Option<f64>,
}

impl OpticsArgs {
    pub fn resolve(&self) -> anyhow::Result<DetectionModel> {
        let mut m = match self.model.as_str() {
            "default" => DetectionModel::default(),
            "apd" => DetectionModel::measured_apd(),
            "wide-field" => DetectionModel::wide_field(),
            path => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading model {path}"))?;
                DetectionModel::from_toml_str(&text)?
            }
        };
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut m.eta0, self.eta0);
        set(&mut m.sigma_r, self.sigma_r);
        set(&mut m.sigma_a, self.sigma_a);
        set(&mut m.split_t, self.split);
        set(&mut m.kappa1, self.kappa1);
        set(&mut m.kappa2, self.kappa2);
        set(&mut m.dark_prob, self.dark_prob);
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CrystalArgs {
    /// Number of ions; shells up to 2000, lattice above.
    #[arg(long, conflicts_with = "layout")]
    pub ions: Option<usize>,
    /// Shell spacing, µm.
    #[arg(long, conflicts_with = "layout")]
    pub spacing: Option<f64>,
    /// Layout CSV instead of a generated crystal.
    #[arg(long)]
    pub layout: Option<PathBuf>,
}

/// Layout draws use a seed distinct from the simulation's block streams.
pub fn crystal_seed(seed: u64) -> u64 {
    seed ^ 0x5851_f42d_4c95_7f2d
}

impl CrystalArgs {
    fn resolve(&self, seed: u64) -> anyhow::Result<CrystalSource> {
        if let Some(path) = &self.layout {
            return Ok(CrystalSource::File { path: path.clone() });
        }
        let Some(ions) = self.ions else {
            bail!(UsageError("give --ions or --layout".into()));
        };
        Ok(CrystalSource::Generated {
            ions,
            spacing_um: self.spacing.unwrap_or(DEFAULT_SPACING_UM),
            seed: crystal_seed(seed),
        })
    }
}

/// Explicit seed, or a fresh one that the manifest records.
fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        eprintln!("seed: {s} (generated)");
        s
    })
}

#[derive(Debug, Args)]
pub struct CrystalCmd {
    #[arg(long)]
    pub ions: usize,
    /// Shell spacing, µm.
    #[arg(long, default_value_t = DEFAULT_SPACING_UM)]
    pub spacing: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "crystal.csv")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct PulsedCmd {
    #[command(flatten)]
    pub crystal: CrystalArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Per-pulse preparation and emission probability.
    #[arg(long, default_value_t = 0.71)]
    pub eta_p: f64,
    #[arg(long, value_parser = count, default_value = "1000000")]
    pub pulses: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = PulseTiming::default().period_ps)]
    pub period_ps: u64,
    #[arg(long, default_value = "counts.json")]
    pub output: String,
    /// Also write the clicks as an IONTAG stream with this name.
    #[arg(long)]
    pub tags: Option<String>,
}

#[derive(Debug, Args)]
pub struct ContinuousCmd {
    #[command(flatten)]
    pub crystal: CrystalArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Emission rate of one ion, 1/s.
    #[arg(long, conflicts_with = "target_rate", required_unless_present = "target_rate")]
    pub rate_per_ion: Option<f64>,
    /// Detected counts per second over both detectors.
    #[arg(long)]
    pub target_rate: Option<f64>,
    /// Per-ion dead time, s.
    #[arg(long, default_value_t = 1e-7)]
    pub dead_time: f64,
    /// Stream length, s.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Bin width for the counts output, s.
    #[arg(long, default_value_t = 1e-6)]
    pub tau: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "counts.json")]
    pub output: String,
    #[arg(long, default_value = "tags.iontag")]
    pub tags: String,
}

#[derive(Debug, Args)]
pub struct ClassicalCmd {
    #[arg(long, value_enum)]
    pub kind: ClassicalKindArg,
    /// Mean photon number per bin.
    #[arg(long)]
    pub mu: f64,
    #[arg(long, value_parser = count, default_value = "1000000")]
    pub bins: u64,
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "counts.json")]
    pub output: String,
    /// IONTAG output, one pulse period per bin.
    #[arg(long, default_value = "tags.iontag")]
    pub tags: String,
    /// Skip the IONTAG output.
    #[arg(long)]
    pub no_tags: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClassicalKindArg {
    Coherent,
    Thermal,
}

#[derive(Debug, Args)]
pub struct AnalyzeCmd {
    /// IONTAG stream, bin-counts JSON or `channel,time_ps` CSV.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub format: InputFormat,
    /// Bin width for continuous streams.
    #[arg(long)]
    pub tau_ps: Option<u64>,
    #[arg(long, default_value_t = PulseTiming::default().period_ps)]
    pub period_ps: u64,
    /// Gate window within each period; defaults to the whole period.
    #[arg(long, default_value_t = 0)]
    pub gate_open_ps: u64,
    #[arg(long)]
    pub gate_close_ps: Option<u64>,
    /// Removed from both gate edges.
    #[arg(long, default_value_t = 0)]
    pub trim_ps: u64,
    /// Stream length for CSV input.
    #[arg(long)]
    pub duration_ps: Option<u64>,
    /// Read CSV input as pulsed.
    #[arg(long)]
    pub pulsed: bool,
    #[arg(long, default_value_t = 5)]
    pub chunks: usize,
    #[arg(long, default_value = "report.json")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    #[command(flatten)]
    pub crystal: CrystalArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Same overall efficiency for every ion, bypassing the optics model.
    #[arg(long, conflicts_with = "layout")]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub eta_p: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Measurement runs for the quoted σ_d.
    #[arg(long, value_parser = count)]
    pub runs: Option<u64>,
    /// Confidence for the required-runs estimate, e.g. `2sigma`.
    #[arg(long, value_parser = sigma_multiple)]
    pub runs_for: Option<f64>,
    #[arg(long, default_value = "prediction.json")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Comma-separated crystal sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ions: Vec<usize>,
    #[command(flatten)]
    pub optics: OpticsArgs,
    #[arg(long, default_value_t = 0.71)]
    pub eta_p: f64,
    /// Shell spacing, µm.
    #[arg(long, default_value_t = DEFAULT_SPACING_UM)]
    pub spacing: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Crystal draws averaged per size.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Measurement runs for the quoted σ_d.
    #[arg(long, value_parser = count, default_value = "1000000000")]
    pub runs: u64,
    /// Confidence for the required-runs column.
    #[arg(long, value_parser = sigma_multiple, default_value = "2sigma")]
    pub runs_for: f64,
    #[arg(long, default_value = "sweep.csv")]
    pub output: String,
}

#[derive(Debug, Args)]
pub struct ReplayCmd {
    pub manifest: PathBuf,
}

fn check(ok: bool, msg: &str) -> anyhow::Result<()> {
    if ok {
        Ok(())
    } else {
        Err(UsageError(msg.into()).into())
    }
}

impl CrystalCmd {
    pub fn resolve(self) -> anyhow::Result<Plan> {
        let seed = seed_or_random(self.seed);
        Ok(Plan::Crystal(CrystalPlan {
            crystal: CrystalSource::Generated {
                ions: self.ions,
                spacing_um: self.spacing,
                seed: crystal_seed(seed),
            },
            output: self.output,
        }))
    }
}

impl SimulateCmd {
    pub fn resolve(self) -> anyhow::Result<Plan> {
        Ok(match self {
            Self::Pulsed(c) => {
                let seed = seed_or_random(c.seed);
                let timing = PulseTiming {
                    period_ps: c.period_ps,
                    click_offset_ps: c.period_ps / 2,
                };
                Plan::SimulatePulsed(PulsedPlan {
                    crystal: c.crystal.resolve(seed)?,
                    model: c.optics.resolve()?,
                    eta_p: c.eta_p,
                    pulses: c.pulses,
                    seed,
                    timing,
                    counts_output: c.output,
                    tags_output: c.tags,
                })
            }
            Self::Continuous(c) => {
                let seed = seed_or_random(c.seed);
                Plan::SimulateContinuous(ContinuousPlan {
                    crystal: c.crystal.resolve(seed)?,
                    model: c.optics.resolve()?,
                    rate_per_ion: c.rate_per_ion,
                    target_rate: c.target_rate,
                    dead_time_s: c.dead_time,
                    duration_s: c.duration,
                    bin_tau_s: c.tau,
                    seed,
                    counts_output: c.output,
                    tags_output: c.tags,
                })
            }
            Self::Classical(c) => Plan::SimulateClassical(ClassicalPlan {
                kind: match c.kind {
                    ClassicalKindArg::Coherent => ClassicalKind::Coherent,
                    ClassicalKindArg::Thermal => ClassicalKind::Thermal,
                },
                mu: c.mu,
                bins: c.bins,
                split_t: c.split,
                seed: seed_or_random(c.seed),
                timing: PulseTiming::default(),
                counts_output: c.output,
                tags_output: (!c.no_tags).then_some(c.tags),
            }),
        })
    }
}

impl AnalyzeCmd {
    pub fn resolve(self) -> anyhow::Result<Plan> {
        check(self.chunks >= 2, "--chunks must be at least 2")?;
        Ok(Plan::Analyze(AnalyzePlan {
            input: self.input,
            format: self.format,
            tau_ps: self.tau_ps,
            period_ps: self.period_ps,
            gate_open_ps: self.gate_open_ps,
            gate_close_ps: self.gate_close_ps.unwrap_or(self.period_ps),
            trim_ps: self.trim_ps,
            duration_ps: self.duration_ps,
            pulsed: self.pulsed,
            chunks: self.chunks,
            output: self.output,
        }))
    }
}

impl PredictCmd {
    pub fn resolve(self) -> anyhow::Result<Plan> {
        if let Some(eta) = self.eta {
            check((0.0..=1.0).contains(&eta), "--eta must be in [0, 1]")?;
        }
        check((0.0..=1.0).contains(&self.eta_p), "--eta-p must be in [0, 1]")?;
        let emitters = match self.eta {
            Some(eta) => Emitters::Uniform {
                ions: self.crystal.ions.unwrap_or(1),
                eta,
            },
            None => {
                let seed = if self.crystal.layout.is_some() {
                    0
                } else {
                    seed_or_random(self.seed)
                };
                Emitters::Crystal {
                    crystal: self.crystal.resolve(seed)?,
                }
            }
        };
        Ok(Plan::Predict(PredictPlan {
            emitters,
            model: self.optics.resolve()?,
            eta_p: self.eta_p,
            runs: self.runs,
            k_sigma: self.runs_for,
            output: self.output,
        }))
    }
}

impl SweepCmd {
    pub fn resolve(self) -> anyhow::Result<Plan> {
        let ions = self.ions;
        check(ions.iter().all(|&n| n > 0), "--ions entries must be positive")?;
        check(self.seeds >= 1, "--seeds must be at least 1")?;
        check((0.0..=1.0).contains(&self.eta_p), "--eta-p must be in [0, 1]")?;
        Ok(Plan::Sweep(SweepPlan {
            ions,
            model: self.optics.resolve()?,
            eta_p: self.eta_p,
            spacing_um: self.spacing,
            seed: seed_or_random(self.seed),
            seeds: self.seeds,
            runs: self.runs,
            k_sigma: self.runs_for,
            output: self.output,
        }))
    }
}
