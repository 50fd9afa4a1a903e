//! Command-line front end.
//!
//! Every subcommand also reads `--config <file.toml>`: a flat table whose
//! keys are flag names (`rank = 40`, `hold-total = true`, `n-grid = [5, 10]`).
//! Flags given on the command line win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stp_core::preprocess::SegmentationSpec;
use stp_core::synth::{
    gen_decaying_transient, gen_linear_map, gen_rank_limited, gen_traveling_wave, DecayingTransientSpec,
    LinearMapKind, LinearMapSpec, RankLimitedSpec, TravelingWaveSpec,
};
use stp_core::types::{Ensemble, HorizonSpec, WeightVector};

use crate::io::{self, DataFile};
use crate::pipeline::{self, Axis, SweepSettings, SweepSource};

#[derive(Debug, Parser)]
#[command(name = "stp", version, about = "Space-time POD forecasting from ensembles of trajectories")]
pub struct Cli {
    /// TOML file of flag values; command-line flags take precedence
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ensemble or series
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Fit a model to training data
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Forecast every episode of an ensemble from its hindcast
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Score a model on a test ensemble
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Vary one of n, r or k and record the error curve for each value
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    RankLimited,
    TravelingWave,
    LinearMap,
    DecayingTransient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    Random,
    Zero,
    Persistence,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Output file
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Number of episodes
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Hindcast steps [default: 15, or 30 for decaying-transient]
    #[arg(long)]
    pub n: Option<usize>,
    /// Forecast steps [default: 20, or 29 for decaying-transient]
    #[arg(long)]
    pub m: Option<usize>,
    /// Grid points per snapshot [default: 4; 64 for traveling-wave and decaying-transient]
    #[arg(long)]
    pub p: Option<usize>,
    /// Rank of the rank-limited generator
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Snapshots in a traveling-wave series
    #[arg(long, default_value_t = 16000)]
    pub len: usize,
    /// Traveling-wave noise amplitude
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    /// Traveling-wave phase drift per snapshot
    #[arg(long, default_value_t = 0.25)]
    pub phase_drift: f64,
    #[arg(long, value_enum, default_value_t = MapKind::Random)]
    pub map: MapKind,
    /// Scale of a random linear map
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    /// Decaying-transient perturbation amplitude
    #[arg(long, default_value_t = 0.3)]
    pub perturbation: f64,
    /// Decaying-transient decay rate
    #[arg(long, default_value_t = 1.0)]
    pub decay: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training ensemble, series file or CSV series
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Model output file
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Number of modes
    #[arg(long, default_value_t = 100)]
    pub rank: usize,
    /// Hindcast steps [default: 15 for series, the file's value for ensembles]
    #[arg(long)]
    pub n: Option<usize>,
    /// Forecast steps [default: 20 for series, the file's value for ensembles]
    #[arg(long)]
    pub m: Option<usize>,
    /// Episode stride when segmenting a series
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Training fraction when segmenting a series
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Grid-point weights, one value per point
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
    /// Spectrum CSV [default: <out>.spectrum.csv]
    #[arg(long, value_name = "PATH")]
    pub spectrum: Option<PathBuf>,
    /// Where to write the test episodes cut from a series
    #[arg(long, value_name = "PATH")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Ensemble whose hindcasts are forecast
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Predicted trajectories, written as an ensemble
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Expansion coefficients CSV
    #[arg(long, value_name = "PATH")]
    pub coefficients: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Test ensemble
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Error CSV
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Grid {
    /// Hindcast lengths to sweep
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Ranks to sweep
    #[arg(long, value_delimiter = ',')]
    pub r_grid: Option<Vec<usize>>,
    /// Training-set sizes to sweep
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Series file, CSV series, or training ensemble
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Test ensemble (required with ensemble data)
    #[arg(long, value_name = "PATH")]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub grid: Grid,
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub rank: usize,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// In n sweeps keep n + m fixed instead of m
    #[arg(long)]
    pub hold_total: bool,
    #[arg(long, value_name = "PATH")]
    pub weights: Option<PathBuf>,
    /// Sweep CSV
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Per-lead minimum CSV for n sweeps [default: <out>.minima.csv]
    #[arg(long, value_name = "PATH")]
    pub minima_out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command, and
/// returns the process exit code. Failures print one JSON line to stderr.
pub fn main_with_args(args: impl IntoIterator<Item = OsString>) -> i32 {
    let args: Vec<OsString> = args.into_iter().collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            eprintln!("{}", error_line("usage", first.trim_start_matches("error: ")));
            let _ = e.print();
            return 2;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}

fn report(e: &anyhow::Error) -> i32 {
    eprintln!("{}", error_line(error_kind(e), &format!("{e:#}")));
    1
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

/// Snake-case name of the innermost typed error, `other` if there is none.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<stp_core::Error>() {
            return variant_name(core);
        }
        if let Some(fmt) = cause.downcast_ref::<io::FormatError>() {
            return match fmt {
                io::FormatError::Core(core) => variant_name(core),
                io::FormatError::Io(_) => "io",
                io::FormatError::BadMagic => "bad_magic",
                io::FormatError::Version { .. } => "version_mismatch",
                io::FormatError::WrongType { .. } => "wrong_file_type",
                io::FormatError::Header(_) => "malformed_header",
                io::FormatError::Truncated { .. } => "truncated",
                io::FormatError::SizeMismatch { .. } => "size_mismatch",
                io::FormatError::Checksum { .. } => "checksum_mismatch",
                io::FormatError::Csv { .. } => "csv",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
    }
    "other"
}

fn variant_name(e: &stp_core::Error) -> &'static str {
    use stp_core::Error::*;
    match e {
        InvalidHorizon(_) => "invalid_horizon",
        DimensionMismatch { .. } => "dimension_mismatch",
        EmptyEnsemble => "empty_ensemble",
        InconsistentTimes { .. } => "inconsistent_times",
        NonMonotoneTimes { .. } => "non_monotone_times",
        InvalidWeights(_) => "invalid_weights",
        AlreadyCentered => "already_centered",
        NotCentered => "not_centered",
        WrongKind { .. } => "wrong_kind",
        SeriesTooShort { .. } => "series_too_short",
        InvalidSegmentation(_) => "invalid_segmentation",
        RankOutOfRange { .. } => "rank_out_of_range",
        DegenerateData => "degenerate_data",
        ZeroEigenvalue { .. } => "zero_eigenvalue",
        NotSquare { .. } => "not_square",
        NotSymmetric { .. } => "not_symmetric",
        NoConvergence(_) => "no_convergence",
        NonFinite(_) => "non_finite",
        MissingMean => "missing_mean",
        MeanMismatch => "mean_mismatch",
        InvalidParameter(_) => "invalid_parameter",
        InvariantViolation(_) => "invariant_violation",
    }
}

/// Replaces `--config <path>` with the flags stored in the file, placed
/// right after the subcommand so that later command-line flags override them.
pub fn expand_config(mut args: Vec<OsString>) -> anyhow::Result<Vec<OsString>> {
    let mut path = None;
    let mut i = 1;
    while i < args.len() {
        let arg = args[i].to_string_lossy().into_owned();
        if arg == "--config" {
            let value = args.get(i + 1).context("--config needs a file path")?.clone();
            path = Some(PathBuf::from(value));
            args.drain(i..i + 2);
        } else if let Some(value) = arg.strip_prefix("--config=") {
            path = Some(PathBuf::from(value));
            args.remove(i);
        } else {
            i += 1;
        }
    }
    let Some(path) = path else { return Ok(args) };
    let text = fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    let mut flags = Vec::new();
    for (key, value) in table {
        let flag = format!("--{}", key.replace('_', "-"));
        let rendered = match value {
            toml::Value::Boolean(true) => {
                flags.push(OsString::from(flag));
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s,
            toml::Value::Integer(n) => n.to_string(),
            toml::Value::Float(x) => x.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(n) => Ok(n.to_string()),
                    toml::Value::Float(x) => Ok(x.to_string()),
                    other => Err(anyhow::anyhow!("config key {key:?}: unsupported list item {other}")),
                })
                .collect::<anyhow::Result<Vec<_>>>()?
                .join(","),
            other => bail!("config key {key:?}: unsupported value {other}"),
        };
        flags.push(OsString::from(flag));
        flags.push(OsString::from(rendered));
    }
    let at = 2.min(args.len());
    args.splice(at..at, flags);
    Ok(args)
}

pub fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let transient = a.kind == SynthKind::DecayingTransient;
    let n = a.n.unwrap_or(if transient { 30 } else { 15 });
    let m = a.m.unwrap_or(if transient { 29 } else { 20 });
    let p = a.p.unwrap_or(match a.kind {
        SynthKind::RankLimited | SynthKind::LinearMap => 4,
        SynthKind::TravelingWave | SynthKind::DecayingTransient => 64,
    });
    let provenance = format!("synth {:?} seed={}", a.kind, a.seed);
    if a.kind == SynthKind::TravelingWave {
        let mut spec = TravelingWaveSpec::convective(p, a.len, a.seed);
        spec.noise = a.noise;
        spec.phase_diffusion = a.phase_drift;
        let series = gen_traveling_wave(&spec)?;
        io::save_series(&series, &a.out, Some(&provenance))?;
        return Ok(());
    }
    let horizon = HorizonSpec::new(n, m, p)?;
    let ensemble = match a.kind {
        SynthKind::RankLimited => {
            gen_rank_limited(&RankLimitedSpec {
                k: a.k,
                horizon,
                rank: a.rank,
                seed: a.seed,
            })?
            .ensemble
        }
        SynthKind::LinearMap => {
            let map = match a.map {
                MapKind::Random => LinearMapKind::Random { gain: a.gain },
                MapKind::Zero => LinearMapKind::Zero,
                MapKind::Persistence => LinearMapKind::Persistence,
            };
            gen_linear_map(&LinearMapSpec {
                k: a.k,
                horizon,
                map,
                seed: a.seed,
            })?
            .ensemble
        }
        SynthKind::DecayingTransient => gen_decaying_transient(&DecayingTransientSpec {
            k: a.k,
            horizon,
            perturbation: a.perturbation,
            decay: a.decay,
            seed: a.seed,
        })?,
        SynthKind::TravelingWave => unreachable!(),
    };
    io::save_ensemble(&ensemble, &a.out, Some(&provenance))?;
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<DataFile> {
    io::load_data(path).with_context(|| format!("loading {}", path.display()))
}

fn load_ensemble(path: &Path) -> anyhow::Result<Ensemble> {
    io::load_ensemble(path).with_context(|| format!("loading {}", path.display()))
}

fn weights(path: Option<&Path>, p: usize) -> anyhow::Result<WeightVector> {
    match path {
        None => Ok(WeightVector::uniform(p)),
        Some(path) => {
            let w = io::read_weights(path).with_context(|| format!("loading {}", path.display()))?;
            if w.len() != p {
                bail!("weight file has {} values for {p} grid points", w.len());
            }
            Ok(w)
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fit(a: FitArgs) -> anyhow::Result<()> {
    let prepared = match load(&a.data)? {
        DataFile::Series(series) => {
            let spec = SegmentationSpec::new(a.n.unwrap_or(15), a.m.unwrap_or(20), a.stride, a.split)?;
            pipeline::prepare_series(series, &spec)?
        }
        DataFile::Ensemble(ensemble) => {
            let h = ensemble.horizon();
            let (n, m) = (a.n.unwrap_or(h.n()), a.m.unwrap_or(h.m()));
            let ensemble = if (n, m) == (h.n(), h.m()) {
                ensemble
            } else {
                pipeline::rewindow(&ensemble, n, m)?
            };
            pipeline::prepare_ensemble(ensemble)?
        }
    };
    let w = weights(a.weights.as_deref(), prepared.train.horizon().p())?;
    let (model, spectrum) = pipeline::fit_model(&prepared.train, a.rank, &w, prepared.mean)?;
    io::save_model(&model, &a.out)?;
    let spectrum_path = a.spectrum.unwrap_or_else(|| with_suffix(&a.out, ".spectrum.csv"));
    io::export_spectrum_csv(&spectrum, &spectrum_path)?;
    if let Some(path) = a.test_out {
        let test = prepared.test.context("the series leaves no test episodes")?;
        io::save_ensemble(&test, &path, Some("test split"))?;
    }
    println!(
        "fitted {} modes ({} requested) on {} episodes",
        model.rank(),
        model.requested_rank(),
        model.k_train()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> anyhow::Result<()> {
    let model = io::load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let data = load_ensemble(&a.data)?;
    let raw = !data.is_centered();
    let mut predictions = model.predict_ensemble(&data)?;
    let h = model.horizon();
    if raw {
        let mean = model.mean().context("raw input needs a model with a stored mean")?;
        for p in &mut predictions {
            p.add_mean(mean, h)?;
        }
    }
    let flat: Vec<f64> = predictions.iter().flat_map(|p| p.trajectory()).collect();
    let out = Ensemble::from_flat(flat, h, data.kind(), !raw, None)?;
    io::save_ensemble(&out, &a.out, Some("predictions"))?;
    if let Some(path) = a.coefficients {
        io::export_coefficients_csv(&predictions, &path)?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let model = io::load_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let test = load_ensemble(&a.data)?;
    let report = pipeline::evaluate(&model, test)?;
    io::export_error_csv(&report, &a.out)?;
    if report.std.is_none() {
        eprintln!("warning: a single test episode gives no standard deviation");
    }
    println!(
        "hindcast mean error {:.6e}, forecast mean error {:.6e}",
        report.hindcast_mean(),
        report.forecast_mean()
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let (axis, grid) = match (&a.grid.n_grid, &a.grid.r_grid, &a.grid.k_grid) {
        (Some(g), None, None) => (Axis::Hindcast, g.clone()),
        (None, Some(g), None) => (Axis::Rank, g.clone()),
        (None, None, Some(g)) => (Axis::Ensemble, g.clone()),
        _ => bail!("give exactly one of --n-grid, --r-grid, --k-grid"),
    };
    let source = match load(&a.data)? {
        DataFile::Series(series) => SweepSource::Series {
            series,
            stride: a.stride,
            split_fraction: a.split,
        },
        DataFile::Ensemble(train) => {
            let test = a.test.as_deref().context("--test is required with ensemble data")?;
            SweepSource::Ensembles {
                train,
                test: load_ensemble(test)?,
            }
        }
    };
    let p = match &source {
        SweepSource::Series { series, .. } => series.p(),
        SweepSource::Ensembles { train, .. } => train.horizon().p(),
    };
    let (n, m) = match &source {
        SweepSource::Ensembles { train, .. } if a.hold_total => (a.n, train.horizon().steps().saturating_sub(a.n)),
        _ => (a.n, a.m),
    };
    let settings = SweepSettings {
        n,
        m,
        r: a.rank,
        weights: Some(weights(a.weights.as_deref(), p)?),
        hold_total: a.hold_total,
    };
    let result = pipeline::run_sweep(&source, &settings, axis, &grid)?;
    fs::write(&a.out, sweep_csv(&result))?;
    if axis == Axis::Hindcast {
        let path = a.minima_out.unwrap_or_else(|| with_suffix(&a.out, ".minima.csv"));
        let mut out = String::from("lead,min_mean,argmin_n\n");
        for min in result.lead_minima() {
            out.push_str(&format!("{},{},{}\n", min.lead, io::fmt_f64(min.error), min.n));
        }
        fs::write(path, out)?;
    }
    Ok(())
}

/// One row per grid value and step: `value, n, m, k_train, rank, index, lead,
/// mean, std`. `lead` counts forecast steps from 1 and is not positive in
/// the hindcast; `std` is empty for a single test episode.
pub fn sweep_csv(sweep: &pipeline::Sweep) -> String {
    let mut out = format!("# axis={}\nvalue,n,m,k_train,rank,index,lead,mean,std\n", sweep.axis.name());
    for p in &sweep.points {
        for i in 0..p.report.steps() {
            let std = p.report.std.as_ref().map(|s| io::fmt_f64(s[i])).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.value,
                p.n,
                p.m,
                p.k_train,
                p.rank,
                i,
                i as i64 - p.n as i64 + 1,
                io::fmt_f64(p.report.mean[i]),
                std
            ));
        }
    }
    out
}
