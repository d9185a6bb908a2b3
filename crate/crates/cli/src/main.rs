use std::path::PathBuf;
use std::process::ExitCode;

use chambers::error::{Error, Result};
use chambers::graph::{ErrorPolicy, TimeFormat};
use chambers::pipeline::{Outcome, Pipeline, PipelineConfig, Stage, Target};
use chambers::spectral::{Imputation, VectorChoice};
use clap::{Parser, ValueEnum};

/// Detects ideological echo chambers in temporal retweet networks.
///
/// Settings are read from the config file, then the CHAMBERS_OUTPUT and
/// CHAMBERS_THREADS environment variables, then the flags below.
#[derive(Debug, Parser)]
#[command(name = "chambers", version)]
struct Cli {
    /// Stage to run.
    #[arg(value_enum)]
    stage: StageArg,

    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,

    /// Edge list; repeat for several files.
    #[arg(short, long)]
    input: Vec<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,

    /// Start of week 0 (Unix seconds or ISO-8601).
    #[arg(long)]
    epoch: Option<String>,
    #[arg(long)]
    week_days: Option<u32>,
    #[arg(long, value_enum)]
    time_format: Option<TimeFormatArg>,
    /// Skip malformed records instead of failing.
    #[arg(long)]
    skip_malformed: bool,
    #[arg(long)]
    delimiter: Option<char>,

    /// High-impact users per week.
    #[arg(short = 'n', long = "top")]
    n: Option<usize>,
    /// Leading users kept by persistence.
    #[arg(short = 'm', long = "leaders")]
    m: Option<usize>,
    #[arg(long)]
    extend_ties: bool,

    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    min_peak_height: Option<f64>,
    #[arg(long)]
    min_valley_depth: Option<f64>,
    #[arg(long)]
    histogram_bins: Option<usize>,

    /// Label-reshuffle realisations.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed of the reshuffle null.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_enum)]
    vector: Option<VectorArg>,
    /// Minimum group share for `--vector auto`.
    #[arg(long, default_value_t = 0.1)]
    min_fraction: f64,
    /// Eigenvector index for `--vector index`.
    #[arg(long, default_value_t = 2)]
    vector_index: usize,
    #[arg(long, value_enum)]
    imputation: Option<ImputationArg>,

    /// Ideology score threshold.
    #[arg(long)]
    eta: Option<f64>,
    /// Build echo chambers from every active leader, not only the weekly high-impact ones.
    #[arg(long)]
    all_leaders: bool,

    #[arg(long)]
    synth_seed: Option<u64>,
    #[arg(long)]
    synth_weeks: Option<u32>,
    #[arg(long)]
    synth_mixing: Option<f64>,
    #[arg(long)]
    synth_survival: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Synth,
    Ingest,
    Leaders,
    Chambers,
    Overlap,
    Null,
    Cluster,
    Polarize,
    Echo,
    Augment,
    Flow,
    Report,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TimeFormatArg {
    Timestamp,
    Week,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VectorArg {
    Third,
    Auto,
    Index,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ImputationArg {
    Zero,
    PairMean,
}

impl StageArg {
    fn target(self) -> Target {
        let stage = match self {
            StageArg::All => return Target::All,
            StageArg::Synth => Stage::Synth,
            StageArg::Ingest => Stage::Ingest,
            StageArg::Leaders => Stage::Leaders,
            StageArg::Chambers => Stage::Chambers,
            StageArg::Overlap => Stage::Overlap,
            StageArg::Null => Stage::Null,
            StageArg::Cluster => Stage::Cluster,
            StageArg::Polarize => Stage::Polarize,
            StageArg::Echo => Stage::Echo,
            StageArg::Augment => Stage::Augment,
            StageArg::Flow => Stage::Flow,
            StageArg::Report => Stage::Report,
        };
        Target::Stage(stage)
    }
}

impl Cli {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        cfg.apply_env()?;
        if !self.input.is_empty() {
            cfg.input = self.input.clone();
        }
        set(&mut cfg.output, self.output.clone());
        set(&mut cfg.threads, self.threads);
        set(&mut cfg.ingest.epoch, self.epoch.clone());
        set(&mut cfg.ingest.week_days, self.week_days);
        set(
            &mut cfg.ingest.time_format,
            self.time_format.map(|t| match t {
                TimeFormatArg::Timestamp => TimeFormat::Timestamp,
                TimeFormatArg::Week => TimeFormat::Week,
            }),
        );
        if self.skip_malformed {
            cfg.ingest.on_error = ErrorPolicy::Skip;
        }
        set(&mut cfg.ingest.delimiter, self.delimiter);
        set(&mut cfg.leaders.n, self.n);
        set(&mut cfg.leaders.m, self.m);
        cfg.leaders.extend_ties |= self.extend_ties;
        set(&mut cfg.overlap.grid_points, self.grid_points);
        set(&mut cfg.overlap.min_peak_height, self.min_peak_height);
        set(&mut cfg.overlap.min_valley_depth, self.min_valley_depth);
        set(&mut cfg.overlap.histogram_bins, self.histogram_bins);
        set(&mut cfg.null.reps, self.reps);
        set(&mut cfg.null.seed, self.seed);
        set(
            &mut cfg.cluster.vector,
            self.vector.map(|v| match v {
                VectorArg::Third => VectorChoice::Third,
                VectorArg::Auto => VectorChoice::Auto {
                    min_fraction: self.min_fraction,
                },
                VectorArg::Index => VectorChoice::Index {
                    index: self.vector_index,
                },
            }),
        );
        set(
            &mut cfg.cluster.imputation,
            self.imputation.map(|i| match i {
                ImputationArg::Zero => Imputation::Zero,
                ImputationArg::PairMean => Imputation::PairMean,
            }),
        );
        set(&mut cfg.echo.eta, self.eta);
        cfg.echo.all_leaders |= self.all_leaders;
        set(&mut cfg.synth.seed, self.synth_seed);
        set(&mut cfg.synth.weeks, self.synth_weeks);
        set(&mut cfg.synth.mixing, self.synth_mixing);
        set(&mut cfg.synth.survival, self.synth_survival);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let pipeline = Pipeline::new(cfg)?;
    for (stage, outcome) in pipeline.run(cli.stage.target())? {
        let what = match outcome {
            Outcome::Ran => "done",
            Outcome::Cached => "up to date",
        };
        println!("{stage}: {what} ({})", pipeline.stage_dir(stage).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            if matches!(e, Error::MissingUpstream { .. } | Error::StaleArtifact { .. }) {
                eprintln!("hint: rerun the named stage, or `chambers all` to rebuild everything");
            }
            ExitCode::from(code as u8)
        }
    }
}
