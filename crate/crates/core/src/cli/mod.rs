//! Command-line front end.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::baselines::{hpss_separate, wavelet_impulse_separate};
use crate::config::GlobalConfig;
use crate::curation::{curate_backgrounds_dir, filter_impulses_dir, list_wavs};
use crate::error::Error;
use crate::filtering::{separate_oracle, SeparationMode};
use crate::metrics::{compare_methods, evaluate_run, EvalReport, MethodRun, Metric, RunInfo, StatRow};
use crate::signal::{read_wav, write_audio_f32};
use crate::synthesis::{
    build_dataset, load_corpus_manifest, read_index, scene_name, Corpora, DatasetOptions, LabelMap, Split,
};
use crate::SCHEMA_VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

#[derive(Debug, Parser)]
#[command(name = "impsep", version = VERSION, about = "Impulsive/stationary sound separation toolkit")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Master seed; overrides `scene.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Remove impulses from background recordings.
    CurateBackgrounds {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-file JSON report (default: <out>/curation_report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Keep only genuinely impulsive events.
    FilterImpulses {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rejection list (default: <out>/rejected.json).
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Synthesize a scene dataset with ground-truth stems.
    GenScenes {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Ignore corpus manifests and use generated sources only.
        #[arg(long)]
        synthetic_only: bool,
        #[arg(long, default_value = "train")]
        split: Split,
    },
    /// Separate mixtures into impulsive and stationary tracks.
    Separate(SeparateArgs),
    /// Score separation outputs against a dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Estimate directory, optionally as NAME=DIR; the first is the
        /// reference of the significance table.
        #[arg(long = "est", required = true)]
        estimates: Vec<String>,
        /// Report JSON; a CSV with the same stem is written alongside.
        #[arg(long)]
        out: PathBuf,
    },
    /// Significance table between two evaluation reports.
    Stats {
        a: PathBuf,
        b: PathBuf,
        /// Method of `a` compared against methods of `b` it does not share
        /// (default: the first method of `a`).
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hpss,
    Wavelet,
    OracleErb,
    OracleDf,
    OracleTwoStage,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Hpss => "hpss",
            Method::Wavelet => "wavelet",
            Method::OracleErb => "oracle-erb",
            Method::OracleDf => "oracle-df",
            Method::OracleTwoStage => "oracle-two-stage",
        }
    }

    fn oracle_mode(self) -> Option<SeparationMode> {
        match self {
            Method::OracleErb => Some(SeparationMode::ErbOnly),
            Method::OracleDf => Some(SeparationMode::DfOnly),
            Method::OracleTwoStage => Some(SeparationMode::TwoStage),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// A dataset directory, a directory of WAVs or a single WAV.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset directory holding `impulsive/` and `stationary/` stems.
    #[arg(long)]
    pub stems: Option<PathBuf>,
    /// Wavelet: stationary track is the input minus the impulsive track.
    #[arg(long)]
    pub consistent_split: bool,
    /// HPSS separation margin.
    #[arg(long)]
    pub margin: Option<f64>,
    /// Name recorded in the run metadata (default: the method).
    #[arg(long)]
    pub name: Option<String>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidInput(_)
            | Error::InvalidConfig(_)
            | Error::Toml(_)
            | Error::InconsistentStems { .. }
            | Error::Packing(_) => EXIT_USAGE,
            Error::Io { .. } | Error::Wav { .. } | Error::Json(_) => EXIT_IO,
            Error::SingularSystem { .. } | Error::UndefinedReference => EXIT_INTERNAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<(), CliError>;

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn load_config(cli: &Cli) -> std::result::Result<GlobalConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => GlobalConfig::from_path(path)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?,
        None => GlobalConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scene.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> CliResult {
    let cfg = load_config(&cli)?;
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be positive"));
        }
        // Fails only if a pool already exists, as in tests running in-process.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("global thread pool already initialised");
        }
    }
    match cli.command {
        Command::CurateBackgrounds { input, out, report } => {
            let report = report.unwrap_or_else(|| out.join("curation_report.json"));
            let reports = curate_backgrounds_dir(&input, &out, &report, &cfg.curation)?;
            let kept = reports.iter().filter(|r| r.rejected.is_none()).count();
            println!("curated {kept} of {} backgrounds; report {}", reports.len(), report.display());
            Ok(())
        }
        Command::FilterImpulses { input, out, rejects } => {
            let rejects = rejects.unwrap_or_else(|| out.join("rejected.json"));
            let s = filter_impulses_dir(&input, &out, &rejects, &cfg.impulsiveness)?;
            println!("accepted {}, rejected {}", s.accepted.len(), s.rejected.len());
            Ok(())
        }
        Command::GenScenes {
            count,
            out,
            synthetic_only,
            split,
        } => gen_scenes(&cfg, count, &out, synthetic_only, split),
        Command::Separate(args) => separate(&cfg, &args),
        Command::Evaluate { dataset, estimates, out } => evaluate(&cfg, &dataset, &estimates, &out),
        Command::Stats { a, b, reference, out } => stats(&cfg, &a, &b, reference.as_deref(), out.as_deref()),
    }
}

fn gen_scenes(cfg: &GlobalConfig, count: usize, out: &Path, synthetic_only: bool, split: Split) -> CliResult {
    let labels = match &cfg.paths.labels {
        Some(p) => LabelMap::from_path(p).map_err(|e| CliError::usage(format!("labels {}: {e}", p.display())))?,
        None => LabelMap::default(),
    };
    let mut corpora = Corpora::default();
    if !synthetic_only {
        if let Some(p) = &cfg.paths.backgrounds {
            corpora.backgrounds = load_corpus_manifest(p)?;
        }
        if let Some(p) = &cfg.paths.impulses {
            corpora.impulses = load_corpus_manifest(p)?;
        }
    }
    let opts = DatasetOptions {
        count,
        split,
        synthetic_only,
    };
    let t0 = Instant::now();
    let entries = build_dataset(&cfg.scene, &labels, &corpora, &opts, out)?;
    println!(
        "wrote {} scenes to {} in {:.1} s",
        entries.len(),
        out.display(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}

/// A mixture to separate and, for oracle methods, where its stems live.
struct Job {
    scene: String,
    mixture: PathBuf,
}

fn collect_jobs(input: &Path) -> std::result::Result<Vec<Job>, CliError> {
    if input.is_file() {
        let scene = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::usage(format!("bad input path {}", input.display())))?;
        return Ok(vec![Job {
            scene,
            mixture: input.to_path_buf(),
        }]);
    }
    let index = input.join("index.jsonl");
    if index.is_file() {
        return Ok(read_index(&index)?
            .into_iter()
            .map(|e| Job {
                scene: scene_name(e.id),
                mixture: input.join(e.mixture),
            })
            .collect());
    }
    if !input.is_dir() {
        return Err(CliError {
            code: EXIT_IO,
            message: format!("input {} does not exist", input.display()),
        });
    }
    Ok(list_wavs(input)?
        .into_iter()
        .map(|p| Job {
            scene: p.file_stem().unwrap_or_default().to_string_lossy().into_owned(),
            mixture: p,
        })
        .collect())
}

fn separate(cfg: &GlobalConfig, args: &SeparateArgs) -> CliResult {
    let mode = args.method.oracle_mode();
    if mode.is_some() && args.stems.is_none() {
        return Err(CliError::usage(format!("{} needs --stems", args.method.name())));
    }
    let mut hpss = cfg.hpss;
    if let Some(m) = args.margin {
        hpss.margin = m;
    }
    hpss.validate()?;
    let mut wavelet = cfg.wavelet;
    wavelet.consistent_split |= args.consistent_split;
    wavelet.validate()?;

    let jobs = collect_jobs(&args.input)?;
    let run_one = |job: &Job| -> crate::Result<f64> {
        let mix = read_wav(&job.mixture)?;
        let t0 = Instant::now();
        let (imp, sta) = match (args.method, mode) {
            (Method::Hpss, _) => hpss_separate(&mix, &hpss, &cfg.stft)?,
            (Method::Wavelet, _) => wavelet_impulse_separate(&mix, &wavelet)?,
            (_, Some(mode)) => {
                let stems = args.stems.as_deref().expect("checked above");
                let si = read_wav(stems.join("impulsive").join(format!("{}.wav", job.scene)))?;
                let ss = read_wav(stems.join("stationary").join(format!("{}.wav", job.scene)))?;
                separate_oracle(&mix, &si, &ss, &cfg.two_stage, mode, &cfg.stft)?
            }
            _ => unreachable!("every method is either a baseline or an oracle"),
        };
        let elapsed = t0.elapsed().as_secs_f64();
        write_audio_f32(args.out.join("impulsive").join(format!("{}.wav", job.scene)), &imp)?;
        write_audio_f32(args.out.join("stationary").join(format!("{}.wav", job.scene)), &sta)?;
        Ok(elapsed)
    };
    let times: Vec<f64> = jobs
        .par_iter()
        .map(|job| {
            let t = run_one(job)?;
            println!("{}\t{:.1} ms", job.scene, t * 1000.0);
            Ok(t)
        })
        .collect::<crate::Result<_>>()?;
    let perfect = match args.method {
        Method::Hpss => true,
        Method::Wavelet => wavelet.consistent_split,
        _ => false,
    };
    let params = match args.method {
        Method::Hpss => serde_json::to_value(hpss),
        Method::Wavelet => serde_json::to_value(wavelet),
        _ => serde_json::to_value(cfg.two_stage),
    }
    .map_err(Error::from)?;
    RunInfo {
        schema_version: SCHEMA_VERSION,
        method: args.name.clone().unwrap_or_else(|| args.method.name().to_string()),
        perfect_reconstruction: perfect,
        params,
    }
    .write(&args.out)?;
    let total: f64 = times.iter().sum();
    println!(
        "separated {} files with {} in {:.2} s of processing",
        times.len(),
        args.method.name(),
        total
    );
    Ok(())
}

fn parse_estimate(spec: &str) -> crate::Result<MethodRun> {
    match spec.split_once('=') {
        Some((name, dir)) if !name.is_empty() => MethodRun::from_dir(Some(name), Path::new(dir)),
        _ => MethodRun::from_dir(None, Path::new(spec)),
    }
}

fn evaluate(cfg: &GlobalConfig, dataset: &Path, estimates: &[String], out: &Path) -> CliResult {
    let index = read_index(&dataset.join("index.jsonl"))?;
    let methods: Vec<MethodRun> = estimates
        .iter()
        .map(|s| parse_estimate(s))
        .collect::<crate::Result<_>>()?;
    let report = evaluate_run(dataset, &index, &methods, &cfg.evaluation)?;
    report.write_json(out)?;
    let csv = out.with_extension("csv");
    report.write_csv(&csv)?;
    for a in &report.aggregates {
        println!(
            "{:<20} {:<15} n={:<5} mean {:>8.2} dB  median {:>8.2} dB",
            a.method, a.metric, a.count, a.mean, a.median
        );
    }
    if !report.skipped.is_empty() {
        println!("skipped {} scene estimate(s)", report.skipped.len());
    }
    if report.rows.is_empty() {
        return Err(CliError {
            code: EXIT_IO,
            message: format!("no estimates could be scored; report written to {}", out.display()),
        });
    }
    Ok(())
}

fn stats(cfg: &GlobalConfig, a: &Path, b: &Path, reference: Option<&str>, out: Option<&Path>) -> CliResult {
    let ra = EvalReport::from_path(a)?;
    let rb = EvalReport::from_path(b)?;
    let (sa, sb) = (ra.scenes(), rb.scenes());
    if sa != sb {
        let only_a: Vec<&String> = sa.difference(&sb).collect();
        let only_b: Vec<&String> = sb.difference(&sa).collect();
        return Err(CliError::usage(format!(
            "reports cover different scenes; only in {}: {only_a:?}; only in {}: {only_b:?}",
            a.display(),
            b.display()
        )));
    }
    let reference = match reference {
        Some(r) if ra.methods.iter().any(|m| m.name == r) => r.to_string(),
        Some(r) => return Err(CliError::usage(format!("method {r} not in {}", a.display()))),
        None => ra
            .methods
            .first()
            .map(|m| m.name.clone())
            .ok_or_else(|| CliError::usage(format!("{} has no methods", a.display())))?,
    };
    let names_a: BTreeSet<&str> = ra.methods.iter().map(|m| m.name.as_str()).collect();
    let pairs: Vec<(String, String)> = rb
        .methods
        .iter()
        .map(|m| {
            let left = if names_a.contains(m.name.as_str()) {
                m.name.clone()
            } else {
                reference.clone()
            };
            (left, m.name.clone())
        })
        .collect();
    let rows = compare_methods(&ra, &rb, &pairs, &cfg.evaluation.wilcoxon)?;
    print_table(&pairs, &rows);
    if let Some(out) = out {
        crate::util::write_json_pretty(out, &rows)?;
    }
    Ok(())
}

fn print_table(pairs: &[(String, String)], rows: &[StatRow]) {
    print!("{:<36}", "comparison");
    for m in Metric::ALL {
        print!(" {:>15}", m.name());
    }
    println!();
    for (a, b) in pairs {
        print!("{:<36}", format!("{a} vs {b}"));
        for m in Metric::ALL {
            match rows
                .iter()
                .find(|r| &r.reference == a && &r.method == b && r.metric == m)
            {
                Some(r) => print!(" {:>15.3e}", r.corrected_p),
                None => print!(" {:>15}", "--"),
            }
        }
        println!();
    }
}
