//! `cdimap`: synthesize soundings, validate them, fit CDI maps, run rate-selection
//! campaigns and turn their reports into plot data.
//!
//! Every command writes a `*manifest.json` recording the seed, input and output
//! digests. Outputs are never overwritten.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cdi_core::cdimap::{CdiMap, QuantileDataset};
use cdi_core::channel::{fading_samples_from_cfr, validate_sweep, FadingSampleSet, DEFAULT_PEAK_THRESHOLD_DB};
use cdi_core::evaluate::{run_campaign, World};
use cdi_core::io::{
    load_eval_config, load_measurements, load_measurements_lenient, load_report, sha256_hex, summary_text,
    validation_csv, write_measurements, write_new, write_plot_data, write_report, FileDigest, FittedMap,
    MeasurementSet, RunManifest, ScenarioConfig, SeedSource, SweepFormat,
};
use cdi_core::scenario::split_train_test;
use cdi_core::RandomStream;

const MANIFEST: &str = "run_manifest.json";

#[derive(Parser)]
#[command(name = "cdimap", version, about = "CDI maps and epsilon-outage rate selection on synthetic channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one sweep per grid location from a scenario config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing; existing files are never replaced).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check sweeps: CIR peak, implied distance, free-space deviation, pathloss exponent, coherence bandwidth.
    Validate {
        /// Measurement directory.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the per-location validation CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PEAK_THRESHOLD_DB)]
        threshold_db: f64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a CDI map on D randomly chosen locations.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Number of training locations.
        #[arg(long = "train")]
        d_train: usize,
        /// Fitted-map JSON to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a Monte Carlo rate-selection campaign over the measured locations.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        /// Campaign config (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Report directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's repetition count.
        #[arg(long)]
        repetitions: Option<usize>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a campaign summary and write plot-ready CSVs.
    Report {
        /// Report directory written by `evaluate`.
        #[arg(long)]
        input: PathBuf,
        /// Directory for the plot CSVs and summary.txt.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn resolve_seed(cli: Option<u64>, config: Option<u64>) -> (u64, SeedSource) {
    match cli.or(config) {
        Some(s) => (s, SeedSource::Explicit),
        None => (rand::random(), SeedSource::Entropy),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn digests(paths: &[PathBuf], base: &Path) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| FileDigest::of(p, base).map_err(Into::into)).collect()
}

/// Digests of every file in a measurement directory except earlier run manifests.
fn measurement_inputs(dir: &Path) -> Result<Vec<FileDigest>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && path.file_name().is_some_and(|n| n != MANIFEST) {
            files.push(path);
        }
    }
    files.sort();
    digests(&files, dir)
}

fn fading_samples(set: &MeasurementSet) -> Result<Vec<FadingSampleSet>> {
    set.locations
        .iter()
        .zip(&set.sweeps)
        .map(|(l, s)| fading_samples_from_cfr(l.id, s).map_err(Into::into))
        .collect()
}

fn synth(config: &Path, out: &Path, format: Format, seed: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let scenario = ScenarioConfig::parse(&text)?;
    let (seed, source) = resolve_seed(seed, scenario.seed);
    let mut manifest = RunManifest::new("synth", seed, source);
    manifest.config_sha256 = Some(sha256_hex(text.as_bytes()));
    manifest.inputs.push(FileDigest::of(config, out)?);

    let s = scenario.synthesize(seed)?;
    let set = MeasurementSet {
        gamma_tx: Some(s.gamma_tx),
        base_station: Some(s.base_station),
        locations: s.locations,
        sweeps: s.sweeps,
    };
    create_dir(out)?;
    let format = match format {
        Format::Csv => SweepFormat::Csv,
        Format::Binary => SweepFormat::Binary,
    };
    let paths = write_measurements(out, &set, format)?;
    manifest.outputs = digests(&paths, out)?;
    manifest.write(&out.join(MANIFEST))?;
    println!("wrote {} sweeps of {} points to {}", set.sweeps.len(), scenario.sweep.n_points, out.display());
    Ok(())
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Returns the number of corrupt or unanalysable records.
fn validate(input: &Path, out: Option<&Path>, threshold_db: f64, seed: Option<u64>) -> Result<usize> {
    let (seed, source) = resolve_seed(seed, None);
    let mut manifest = RunManifest::new("validate", seed, source);
    let (set, corrupt) = load_measurements_lenient(input)?;
    manifest.inputs = measurement_inputs(input)?;

    let mut rows = Vec::new();
    let mut problems: Vec<String> =
        corrupt.iter().map(|c| format!("location {} ({}): {}", c.location_id, c.file.display(), c.message)).collect();
    for (loc, sweep) in set.locations.iter().zip(&set.sweeps) {
        match validate_sweep(loc, sweep, set.base_station.as_ref(), threshold_db) {
            Ok(v) => rows.push(v),
            Err(e) => problems.push(format!("location {}: {e}", loc.id)),
        }
    }

    println!("{:>8} {:>12} {:>11} {:>11} {:>10} {:>7} {:>10}", "location", "peak_ns", "implied_m", "geometric_m", "fsl_dev_dB", "eta", "Bc_MHz");
    for v in &rows {
        println!(
            "{:>8} {:>12.3} {:>11.3} {:>11} {:>10.2} {:>7.3} {:>10.2}",
            v.location_id,
            v.peak_delay_s * 1e9,
            v.implied_distance_m,
            v.geometric_distance_m.map_or("-".into(), |d| format!("{d:.3}")),
            v.free_space_deviation_db,
            v.eta,
            v.coherence_bandwidth_hz / 1e6
        );
    }
    let mut etas: Vec<f64> = rows.iter().map(|v| v.eta).collect();
    let mut bcs: Vec<f64> = rows.iter().map(|v| v.coherence_bandwidth_hz).collect();
    let mut devs: Vec<f64> = rows.iter().map(|v| v.free_space_deviation_db).collect();
    println!("validated {} of {} records", rows.len(), rows.len() + problems.len());
    if let (Some(eta), Some(bc), Some(dev)) = (median(&mut etas), median(&mut bcs), median(&mut devs)) {
        println!("median eta: {eta:.4}");
        println!("median coherence bandwidth: {:.3} MHz", bc / 1e6);
        println!("median free-space deviation: {dev:.2} dB");
    }
    if !problems.is_empty() {
        println!("corrupt records ({}):", problems.len());
        for p in &problems {
            println!("  {p}");
        }
    }

    if let Some(path) = out {
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        create_dir(base)?;
        write_new(path, &validation_csv(&rows))?;
        manifest.outputs.push(FileDigest::of(path, base)?);
        manifest.write(&sidecar(path))?;
    }
    Ok(problems.len())
}

/// `<file>.manifest.json` next to a single-file output.
fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn fit(input: &Path, epsilon: f64, d_train: usize, out: &Path, seed: Option<u64>) -> Result<()> {
    let (seed, source) = resolve_seed(seed, None);
    let mut manifest = RunManifest::new("fit", seed, source);
    let set = load_measurements(input)?;
    manifest.inputs = measurement_inputs(input)?;
    let samples = fading_samples(&set)?;

    let (train, test) = split_train_test(&set.locations, d_train, &mut RandomStream::new(seed).derive("split", 0))?;
    let train_samples: Vec<FadingSampleSet> =
        train.iter().map(|l| samples.iter().find(|s| s.location_id() == l.id).cloned().unwrap()).collect();
    let data = QuantileDataset::from_samples(&train, &train_samples, epsilon)?;
    let map = CdiMap::fit(&data, &Default::default())?;
    let mut fitted = FittedMap::from_map(&map);
    fitted.held_out = test.iter().map(|l| l.id).collect();

    let base = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    create_dir(base)?;
    fitted.save(out)?;
    manifest.outputs.push(FileDigest::of(out, base)?);
    manifest.write(&sidecar(out))?;
    let hp = map.hyperparameters();
    println!(
        "fitted on {d_train} locations: mean {:.4}, signal variance {:.4}, length scale {:.3} m, noise variance {:.5}",
        hp.mean_const, hp.signal_variance, hp.length_scale, hp.noise_variance
    );
    Ok(())
}

fn evaluate(input: &Path, config: &Path, out: &Path, repetitions: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut cfg = load_eval_config(config)?;
    let (seed, source) = resolve_seed(seed, Some(cfg.seed));
    cfg.seed = seed;
    if let Some(l) = repetitions {
        cfg.repetitions = l;
    }
    let mut manifest = RunManifest::new("evaluate", seed, source);
    manifest.config_sha256 = Some(cdi_core::io::sha256_file(config)?);
    let set = load_measurements(input)?;
    manifest.inputs = measurement_inputs(input)?;
    manifest.inputs.push(FileDigest::of(config, out)?);
    if let Some(g) = set.gamma_tx {
        if (g - cfg.gamma_tx).abs() > 1e-9 * g {
            log::warn!("campaign gamma_tx {} differs from the measurements' {g}", cfg.gamma_tx);
        }
    }

    let world = World::new(set.locations.clone(), fading_samples(&set)?)?;
    let report = run_campaign(&world, &cfg, &RandomStream::new(seed))?;
    create_dir(out)?;
    let paths = write_report(out, &report)?;
    manifest.outputs = digests(&paths, out)?;
    manifest.write(&out.join(MANIFEST))?;
    print!("{}", summary_text(&report));
    Ok(())
}

fn report(input: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let (seed, source) = resolve_seed(seed, None);
    let mut manifest = RunManifest::new("report", seed, source);
    let report = load_report(input)?;
    manifest.inputs = digests(&[input.join(cdi_core::io::REPORT_FILE), input.join(cdi_core::io::RECORDS_FILE)], input)?;
    create_dir(out)?;
    let text = summary_text(&report);
    let summary = out.join("summary.txt");
    if summary.exists() {
        bail!("{} already exists", summary.display());
    }
    let mut paths = write_plot_data(out, &report)?;
    write_new(&summary, text.as_bytes())?;
    paths.push(summary);
    manifest.outputs = digests(&paths, out)?;
    manifest.write(&out.join(MANIFEST))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out, format, seed } => synth(&config, &out, format, seed),
        Command::Validate { input, out, threshold_db, seed } => {
            match validate(&input, out.as_deref(), threshold_db, seed) {
                Ok(0) => Ok(()),
                Ok(n) => Err(anyhow::anyhow!("{n} corrupt record(s)")),
                Err(e) => Err(e),
            }
        }
        Command::Fit { input, epsilon, d_train, out, seed } => fit(&input, epsilon, d_train, &out, seed),
        Command::Evaluate { input, config, out, repetitions, seed } => evaluate(&input, &config, &out, repetitions, seed),
        Command::Report { input, out, seed } => report(&input, &out, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
