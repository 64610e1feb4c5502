//! Executes a [`Plan`], writing its outputs under one directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::Context;
use clickwit_core::geometry::{crystal_for_size, write_layout_csv};
use clickwit_core::optics::per_ion_efficiencies;
use clickwit_core::optics::EfficiencyVector;
use clickwit_core::simulate::{
    calibrate_rate_per_ion, detection_axis, run_classical_with_tags, run_continuous, run_pulsed, run_pulsed_with_tags,
    ClassicalConfig, ContinuousConfig, PulsedConfig,
};
use clickwit_core::stats::{required_runs_for, variance_d};
use clickwit_core::timetag::{
    read_csv, write_stream, BinMapper, GateSpec, Reducer, Regime, StreamHeader, StreamReader, TagRecord, MAGIC,
};
use clickwit_core::witness::{ensemble_probabilities, ClickProbabilities};
use clickwit_core::{BinCounts, DetectionModel, WitnessReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::plan::*;
use crate::UsageError;

/// Output of one run: file names relative to the output directory and an
/// optional JSON document for stdout.
pub struct Outcome {
    pub artifacts: Vec<String>,
    pub stdout: Option<String>,
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<String> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    let mut out = create(dir, name)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(text)
}

fn write_tags(dir: &Path, name: &str, header: &StreamHeader, records: &[TagRecord]) -> anyhow::Result<()> {
    let mut out = create(dir, name)?;
    write_stream(&mut out, header, records)?;
    out.flush()?;
    Ok(())
}

pub fn execute(plan: &Plan, dir: &Path) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    match plan {
        Plan::Crystal(p) => crystal(p, dir),
        Plan::SimulatePulsed(p) => pulsed(p, dir),
        Plan::SimulateContinuous(p) => continuous(p, dir),
        Plan::SimulateClassical(p) => classical(p, dir),
        Plan::Analyze(p) => analyze(p, dir),
        Plan::Predict(p) => predict(p, dir),
        Plan::Sweep(p) => sweep(p, dir),
    }
}

fn files(names: impl IntoIterator<Item = String>) -> Outcome {
    Outcome {
        artifacts: names.into_iter().collect(),
        stdout: None,
    }
}

fn crystal(p: &CrystalPlan, dir: &Path) -> anyhow::Result<Outcome> {
    let layout = p.crystal.build()?;
    let mut out = create(dir, &p.output)?;
    write_layout_csv(&layout, &mut out)?;
    out.flush()?;
    Ok(files([p.output.clone()]))
}

fn pulsed(p: &PulsedPlan, dir: &Path) -> anyhow::Result<Outcome> {
    let config = PulsedConfig {
        layout: p.crystal.build()?,
        model: p.model,
        eta_p: p.eta_p,
        n_pulses: p.pulses,
        seed: p.seed,
    };
    let mut names = vec![p.counts_output.clone()];
    let counts = match &p.tags_output {
        Some(tags_name) => {
            let (counts, tags) = run_pulsed_with_tags(&config, p.timing)?;
            let header = StreamHeader::new(Regime::Pulsed, 1, p.pulses * p.timing.period_ps);
            write_tags(dir, tags_name, &header, &tags)?;
            names.push(tags_name.clone());
            counts
        }
        None => run_pulsed(&config)?,
    };
    write_json(dir, &p.counts_output, &counts)?;
    Ok(files(names))
}

fn continuous(p: &ContinuousPlan, dir: &Path) -> anyhow::Result<Outcome> {
    let mut config = ContinuousConfig {
        layout: p.crystal.build()?,
        model: p.model,
        rate_per_ion: p.rate_per_ion.unwrap_or(0.0),
        dead_time: p.dead_time_s,
        duration: p.duration_s,
        bin_tau: p.bin_tau_s,
        seed: p.seed,
    };
    if let (None, Some(target)) = (p.rate_per_ion, p.target_rate) {
        config.rate_per_ion = calibrate_rate_per_ion(&config.efficiencies(), &p.model, p.dead_time_s, target)?;
    }
    let records = run_continuous(&config)?;
    let header = config.header();
    write_tags(dir, &p.tags_output, &header, &records)?;
    let mut reducer = Reducer::new(BinMapper::continuous(config.tau_ps(), header.duration_ps)?);
    for &r in &records {
        reducer.push(r)?;
    }
    write_json(dir, &p.counts_output, &reducer.finish())?;
    Ok(files([p.counts_output.clone(), p.tags_output.clone()]))
}

fn classical(p: &ClassicalPlan, dir: &Path) -> anyhow::Result<Outcome> {
    let config = ClassicalConfig {
        kind: p.kind,
        mu: p.mu,
        n_bins: p.bins,
        split_t: p.split_t,
        seed: p.seed,
    };
    let mut names = vec![p.counts_output.clone()];
    let counts = match &p.tags_output {
        Some(tags_name) => {
            let (counts, tags) = run_classical_with_tags(&config, p.timing)?;
            let header = StreamHeader::new(Regime::Pulsed, 1, p.bins * p.timing.period_ps);
            write_tags(dir, tags_name, &header, &tags)?;
            names.push(tags_name.clone());
            counts
        }
        None => clickwit_core::simulate::run_classical(&config)?,
    };
    write_json(dir, &p.counts_output, &counts)?;
    Ok(files(names))
}

fn detect_format(path: &Path) -> anyhow::Result<InputFormat> {
    let mut head = [0u8; 8];
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let n = file.read(&mut head)?;
    Ok(if n == 8 && head == MAGIC {
        InputFormat::Iontag
    } else if head[..n].iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        InputFormat::Counts
    } else {
        InputFormat::Csv
    })
}

impl AnalyzePlan {
    fn mapper(&self, regime: Regime, duration_ps: u64) -> anyhow::Result<BinMapper> {
        Ok(match regime {
            Regime::Continuous => {
                let tau = self
                    .tau_ps
                    .ok_or_else(|| UsageError("continuous streams need --tau-ps".into()))?;
                BinMapper::continuous(tau, duration_ps)?
            }
            Regime::Pulsed => {
                let gate = GateSpec {
                    period_ps: self.period_ps,
                    gate_open_ps: self.gate_open_ps,
                    gate_close_ps: self.gate_close_ps,
                    trim_ps: self.trim_ps,
                };
                gate.validate()?;
                BinMapper::gated(gate, duration_ps / self.period_ps)?
            }
        })
    }
}

fn analyze(p: &AnalyzePlan, dir: &Path) -> anyhow::Result<Outcome> {
    let format = match p.format {
        InputFormat::Auto => detect_format(&p.input)?,
        f => f,
    };
    let open = || -> anyhow::Result<BufReader<File>> {
        let file = File::open(&p.input).with_context(|| format!("opening {}", p.input.display()))?;
        Ok(BufReader::new(file))
    };
    let report = match format {
        InputFormat::Counts => {
            let counts: BinCounts = serde_json::from_reader(open()?).context("parsing bin counts")?;
            counts.validate()?;
            WitnessReport::from_counts(&counts)?
        }
        InputFormat::Iontag => {
            let reader = StreamReader::new(open()?)?;
            let header = *reader.header();
            let mut reducer = Reducer::chunked(p.mapper(header.regime, header.duration_ps)?, p.chunks);
            for rec in reader {
                reducer.push(rec?)?;
            }
            report_from_chunks(reducer.finish_chunks())?
        }
        InputFormat::Csv => {
            let records = read_csv(open()?)?;
            let regime = if p.pulsed { Regime::Pulsed } else { Regime::Continuous };
            let duration = p
                .duration_ps
                .ok_or_else(|| UsageError("CSV input needs --duration-ps".into()))?;
            let mut reducer = Reducer::chunked(p.mapper(regime, duration)?, p.chunks);
            for r in records {
                reducer.push(r)?;
            }
            report_from_chunks(reducer.finish_chunks())?
        }
        InputFormat::Auto => unreachable!("format resolved above"),
    };
    let text = write_json(dir, &p.output, &report)?;
    Ok(Outcome {
        artifacts: vec![p.output.clone()],
        stdout: Some(text),
    })
}

fn report_from_chunks(chunks: Vec<BinCounts>) -> anyhow::Result<WitnessReport> {
    let total: BinCounts = chunks.iter().copied().sum();
    Ok(WitnessReport::from_counts(&total)?.with_chunks(&chunks)?)
}

#[derive(Serialize)]
struct Prediction {
    ions: usize,
    eta_p: f64,
    #[serde(rename = "split_T")]
    split_t: f64,
    d: f64,
    p00: f64,
    p01: f64,
    p02: f64,
    p0: f64,
    pc: f64,
    ps_excl: f64,
    /// Closed-form variance of d for one run.
    var_d_single_run: Option<f64>,
    runs: Option<u64>,
    sigma_d: Option<f64>,
    k_sigma: Option<f64>,
    required_runs: Option<u64>,
}

fn probabilities(etas: &EfficiencyVector, model: &DetectionModel, eta_p: f64) -> anyhow::Result<ClickProbabilities> {
    let mut e = ensemble_probabilities(&etas.scaled(eta_p), model.split_t, model.kappa1, model.kappa2)?;
    if model.dark_prob > 0.0 {
        e = e.with_background(1.0 - model.dark_prob, 1.0 - model.dark_prob);
    }
    Ok(e.probabilities())
}

fn predict(p: &PredictPlan, dir: &Path) -> anyhow::Result<Outcome> {
    let etas = match &p.emitters {
        Emitters::Uniform { ions, eta } => EfficiencyVector::uniform(*eta, *ions),
        Emitters::Crystal { crystal } => per_ion_efficiencies(&p.model, &crystal.build()?, &detection_axis()),
    };
    let probs = probabilities(&etas, &p.model, p.eta_p)?;
    let d = probs.witness();
    let var1 = variance_d(probs.pc, probs.ps_excl, probs.p00, 1).ok();
    let required_runs = p.k_sigma.map(|k| required_runs_for(&probs, d, k)).transpose()?;
    let prediction = Prediction {
        ions: etas.len(),
        eta_p: p.eta_p,
        split_t: p.model.split_t,
        d,
        p00: probs.p00,
        p01: probs.p01,
        p02: probs.p02,
        p0: probs.p0,
        pc: probs.pc,
        ps_excl: probs.ps_excl,
        var_d_single_run: var1,
        runs: p.runs,
        sigma_d: p.runs.zip(var1).map(|(n, v)| (v / n as f64).sqrt()),
        k_sigma: p.k_sigma,
        required_runs,
    };
    let text = write_json(dir, &p.output, &prediction)?;
    Ok(Outcome {
        artifacts: vec![p.output.clone()],
        stdout: Some(text),
    })
}

fn sweep(p: &SweepPlan, dir: &Path) -> anyhow::Result<Outcome> {
    let rows = p
        .ions
        .par_iter()
        .map(|&n| sweep_row(p, n))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut writer = csv::Writer::from_writer(create(dir, &p.output)?);
    let required = format!("n_required_{}sigma", p.k_sigma);
    writer.write_record(["n", "d", "sigma_d", required.as_str()])?;
    let opt = |x: Option<String>| x.unwrap_or_default();
    for (n, d, sigma, runs) in rows {
        writer.write_record([
            n.to_string(),
            format!("{d:e}"),
            opt(sigma.map(|s: f64| format!("{s:e}"))),
            opt(runs.map(|r: u64| r.to_string())),
        ])?;
    }
    writer.flush()?;
    Ok(files([p.output.clone()]))
}

/// Seed-averaged witness for one size, with σ_d and required runs from the
/// averaged probabilities. Lattice crystals are deterministic and drawn once.
fn sweep_row(p: &SweepPlan, n: usize) -> anyhow::Result<(usize, f64, Option<f64>, Option<u64>)> {
    let draws = if n > clickwit_core::geometry::SHELL_MODEL_LIMIT {
        1
    } else {
        p.seeds
    };
    let mut sums = [0.0f64; 4];
    for s in 0..draws {
        let layout = crystal_for_size(n, p.spacing_um, p.seed.wrapping_add(s))?;
        let etas = per_ion_efficiencies(&p.model, &layout, &detection_axis());
        let probs = probabilities(&etas, &p.model, p.eta_p)?;
        for (acc, x) in sums.iter_mut().zip([probs.witness(), probs.p00, probs.p01, probs.p02]) {
            *acc += x;
        }
    }
    let [d, p00, p01, p02] = sums.map(|x| x / draws as f64);
    let mean = ClickProbabilities::from_no_click(p00, p01, p02)?;
    let sigma = variance_d(mean.pc, mean.ps_excl, mean.p00, p.runs).ok().map(f64::sqrt);
    let runs = if d > 0.0 {
        required_runs_for(&mean, d, p.k_sigma).ok()
    } else {
        None
    };
    Ok((n, d, sigma, runs))
}
