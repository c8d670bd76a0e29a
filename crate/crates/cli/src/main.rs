//! `spindlefca`: command-line front end for the spindle pattern miner.
//!
//! Exit codes: 0 on success, 2 for input errors (bad files, bad flags),
//! 3 when a capacity limit such as the concept cap is hit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spindle_fca::context::{read_labels, write_labels, NumericContext};
use spindle_fca::pipeline::{self, write_files, PipelineConfig, CONTEXT_CSV};
use spindle_fca::signal::{read_annotations, Recording, Segment};
use spindle_fca::synthetic::{generate, SyntheticConfig};
use spindle_fca::{BoundPolicy, Error, FormalContext, Result, StabilityMethod};

const SEGMENTS_JSON: &str = "segments.json";
const FEATURES_CSV: &str = "features.csv";
const SELECTION_JSON: &str = "selection.json";

#[derive(Parser)]
#[command(
    name = "spindlefca",
    version,
    about = "Mine stable interval patterns from annotated EEG spindles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut annotated segments out of a recording → segments.json
    Extract {
        #[command(flatten)]
        opts: Opts,
    },
    /// Compute per-segment features → features.csv
    Features {
        #[arg(long)]
        segments: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Select attributes of a feature table → context.csv, selection.json
    Context {
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Build the pattern lattice, score and filter it → report.json, patterns.csv, scores.json
    Mine {
        #[arg(long)]
        context: PathBuf,
        /// Read a binary formal context (cells 1/x or 0/empty) instead of a numeric one
        #[arg(long)]
        binary: bool,
        #[command(flatten)]
        opts: Opts,
    },
    /// All stages in one go
    Pipeline {
        #[command(flatten)]
        opts: Opts,
    },
    /// Write the seeded two-cluster fixture: recording.csv, annotations.json, labels.csv
    Synth {
        #[arg(long, default_value_t = SyntheticConfig::default().seed)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StabilityArg {
    ExactDp,
    Bounds,
    BruteForce,
}

impl From<StabilityArg> for StabilityMethod {
    fn from(a: StabilityArg) -> Self {
        match a {
            StabilityArg::ExactDp => StabilityMethod::LatticeDp,
            StabilityArg::Bounds => StabilityMethod::Bounds,
            StabilityArg::BruteForce => StabilityMethod::BruteForce,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Upper,
    Lower,
    Mid,
}

impl From<PolicyArg> for BoundPolicy {
    fn from(a: PolicyArg) -> Self {
        match a {
            PolicyArg::Upper => BoundPolicy::Upper,
            PolicyArg::Lower => BoundPolicy::Lower,
            PolicyArg::Mid => BoundPolicy::Mid,
        }
    }
}

/// Settings shared by the stage commands. Values from `--config` are read
/// first; flags given on the command line win.
#[derive(Args)]
struct Opts {
    /// JSON pipeline config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    recording: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// CSV of id,class used for information-gain ranking
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Sample rate in Hz; overrides the recording's time column
    #[arg(long = "fs")]
    sample_rate: Option<f64>,
    #[arg(long)]
    min_support: Option<f64>,
    #[arg(long)]
    min_lstab: Option<f64>,
    #[arg(long, value_enum)]
    stability: Option<StabilityArg>,
    #[arg(long, value_enum)]
    bound_policy: Option<PolicyArg>,
    #[arg(long)]
    corr_threshold: Option<f64>,
    #[arg(long)]
    ig_bins: Option<usize>,
    #[arg(long)]
    ig_top_k: Option<usize>,
    /// Remove the segment mean before spectral features
    #[arg(long)]
    detrend: bool,
    #[arg(long)]
    concept_cap: Option<usize>,
    /// Cut every channel, not just the annotated one
    #[arg(long)]
    all_channels: bool,
    /// Also write the lattice cover relation as lattice.dot
    #[arg(long)]
    dot: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Opts {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::from_json_file(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(
            recording,
            annotations,
            labels,
            sample_rate,
            min_support,
            min_lstab,
            corr_threshold,
            ig_bins,
            concept_cap
        );
        if let Some(k) = self.ig_top_k {
            c.ig_top_k = Some(k);
        }
        if let Some(s) = self.stability {
            c.stability = s.into();
        }
        if let Some(p) = self.bound_policy {
            c.bound_policy = p.into();
        }
        if let Some(out) = &self.output {
            c.output_dir = Some(out.clone());
        }
        c.detrend |= self.detrend;
        c.all_channels |= self.all_channels;
        c.dot |= self.dot;
        c.validate()?;
        Ok(c)
    }
}

fn output_dir(c: &PipelineConfig) -> Result<&Path> {
    c.output_dir
        .as_deref()
        .ok_or_else(|| Error::input("no output directory: pass --output or set output_dir in the config"))
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::input(format!("missing --{flag}")))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::input(e.to_string()))
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract { opts } => {
            let c = opts.resolve()?;
            let rec = Recording::read_csv(required(&c.recording, "recording")?, c.sample_rate)
                .map_err(|e| e.in_stage("load"))?;
            let anns = read_annotations(required(&c.annotations, "annotations")?).map_err(|e| e.in_stage("load"))?;
            let segments = pipeline::extract(&rec, &anns, c.all_channels)?;
            report_written(&write_files(output_dir(&c)?, &[(SEGMENTS_JSON, to_json(&segments)?)])?);
        }
        Command::Features { segments, opts } => {
            let c = opts.resolve()?;
            let text = std::fs::read_to_string(&segments).map_err(|e| Error::io(&segments, e))?;
            let segs: Vec<Segment> =
                serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", segments.display())))?;
            let ctx = pipeline::features(&segs, &c.features())?;
            let csv = csv_string(|b| ctx.write_csv(b))?;
            report_written(&write_files(output_dir(&c)?, &[(FEATURES_CSV, csv)])?);
        }
        Command::Context { features, opts } => {
            let c = opts.resolve()?;
            let ctx = NumericContext::read_csv(&features).map_err(|e| e.in_stage("load"))?;
            let labels = c
                .labels
                .as_ref()
                .map(read_labels)
                .transpose()
                .map_err(|e| e.in_stage("load"))?;
            let (selected, report) = pipeline::select(&ctx, labels.as_ref(), &c.selection())?;
            let csv = csv_string(|b| selected.write_csv(b))?;
            report_written(&write_files(
                output_dir(&c)?,
                &[(CONTEXT_CSV, csv), (SELECTION_JSON, to_json(&report)?)],
            )?);
        }
        Command::Mine { context, binary, opts } => {
            let c = opts.resolve()?;
            let dir = output_dir(&c)?;
            let paths = if binary {
                let ctx = FormalContext::read_csv(&context).map_err(|e| e.in_stage("load"))?;
                let (report, mined) = pipeline::mine_binary(&ctx, &c)?;
                pipeline::export_report(&report, &mined, dir, c.dot)?
            } else {
                let ctx = NumericContext::read_csv(&context).map_err(|e| e.in_stage("load"))?;
                let (report, mined) = pipeline::mine_numeric(&ctx, &c)?;
                pipeline::export_report(&report, &mined, dir, c.dot)?
            };
            report_written(&paths);
        }
        Command::Pipeline { opts } => {
            let c = opts.resolve()?;
            let dir = output_dir(&c)?.to_path_buf();
            let out = pipeline::run_pipeline(&c)?;
            let paths = pipeline::export_pipeline(&out, &dir, c.dot)?;
            println!(
                "{} patterns from {} concepts over {} objects",
                out.report.counts.patterns, out.report.counts.concepts, out.report.counts.objects
            );
            report_written(&paths);
        }
        Command::Synth { seed, output } => {
            let fx = generate(&SyntheticConfig {
                seed,
                ..SyntheticConfig::default()
            })?;
            let files = [
                ("recording.csv", csv_string(|b| fx.recording.write_csv(b))?),
                ("annotations.json", to_json(&fx.annotations)?),
                ("labels.csv", csv_string(|b| write_labels(&fx.labels, b))?),
            ];
            report_written(&write_files(&output, &files)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_capacity() { 3 } else { 2 })
        }
    }
}
