use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use myoaudit::audit::FdrFamily;
use myoaudit::config::{ConfigError, PipelineConfig};
use myoaudit::pipeline::{Pipeline, PipelineError, Stage, StageStatus};

/// sEMG feature extraction and demographic-sensitivity auditing.
#[derive(Debug, Parser)]
#[command(name = "myoaudit", version, about)]
struct Cli {
    /// TOML or JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for imputation, cross-validation and synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and load the dataset (or generate the synthetic one).
    Ingest,
    /// Generate a synthetic population under <out>/synth_data.
    Synth(SynthArgs),
    /// Apply the exclusion rule and impute missing demographics.
    Impute,
    /// Compute the 147-feature matrix.
    Extract,
    /// Fit one mixed model per feature.
    Fit,
    /// FDR correction, dual threshold and feature ranking.
    Audit,
    /// Sparse PLS, Q2 cross-validation and the clustered image map.
    Pls,
    /// Write the four figures and their CSVs.
    Report,
    /// Every stage from ingest to report.
    Run,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    gestures: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    trial_length: Option<usize>,
    /// Plant the default Sex amplitude and fat low-pass effects.
    #[arg(long)]
    planted: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Joint,
    PerDemographic,
}

/// Flags that override single config fields.
#[derive(Debug, Args)]
struct Overrides {
    /// Dataset manifest.json.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    window_fraction: Option<f64>,
    #[arg(long, global = true)]
    zc_threshold: Option<f64>,
    #[arg(long, global = true)]
    ssc_threshold: Option<f64>,
    /// Willison amplitude threshold in mV.
    #[arg(long, global = true)]
    wam_threshold: Option<f64>,
    #[arg(long, global = true)]
    hfd_kmax: Option<usize>,
    #[arg(long, global = true)]
    mice_iter: Option<usize>,
    /// Deterministic MICE without residual noise.
    #[arg(long, global = true)]
    no_noise: bool,
    #[arg(long, global = true, value_enum)]
    fdr_family: Option<FamilyArg>,
    #[arg(long, global = true)]
    p_threshold: Option<f64>,
    #[arg(long, global = true)]
    eta2_threshold: Option<f64>,
    #[arg(long, global = true)]
    keep_x: Option<usize>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    #[arg(long, global = true)]
    components: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
            cfg.synth = None;
        }
        if let Some(v) = self.window_fraction {
            cfg.window_fraction = v;
        }
        if let Some(v) = self.zc_threshold {
            cfg.features.zc_threshold = v;
        }
        if let Some(v) = self.ssc_threshold {
            cfg.features.ssc_threshold = v;
        }
        if let Some(v) = self.wam_threshold {
            cfg.features.wam_threshold = v;
        }
        if let Some(v) = self.hfd_kmax {
            cfg.features.hfd_kmax = v;
        }
        if let Some(v) = self.mice_iter {
            cfg.mice.n_iter = v;
        }
        if self.no_noise {
            cfg.mice.noise = false;
        }
        if let Some(f) = self.fdr_family {
            cfg.audit.fdr_family = match f {
                FamilyArg::Joint => FdrFamily::Joint,
                FamilyArg::PerDemographic => FdrFamily::PerDemographic,
            };
        }
        if let Some(v) = self.p_threshold {
            cfg.audit.p_threshold = v;
        }
        if let Some(v) = self.eta2_threshold {
            cfg.audit.eta2_threshold = v;
        }
        if let Some(v) = self.keep_x {
            cfg.spls.keep_x = v;
        }
        if let Some(v) = self.folds {
            cfg.spls.folds = v;
        }
        if let Some(v) = self.components {
            cfg.spls.n_components = v;
        }
    }
}

fn build_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_path(path)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Command::Synth(args) = &cli.command {
        let mut spec = cfg.synth.take().unwrap_or_default();
        spec.n_subjects = args.subjects.unwrap_or(spec.n_subjects);
        spec.n_gestures = args.gestures.unwrap_or(spec.n_gestures);
        spec.n_channels = args.channels.unwrap_or(spec.n_channels);
        spec.trial_length = args.trial_length.unwrap_or(spec.trial_length);
        if args.planted {
            spec = spec.with_planted(0.25, 0.2);
        }
        cfg.synth = Some(spec);
        cfg.dataset = None;
    }
    Ok(cfg)
}

fn target(cmd: &Command) -> Stage {
    match cmd {
        Command::Ingest | Command::Synth(_) => Stage::Ingest,
        Command::Impute => Stage::Impute,
        Command::Extract => Stage::Extract,
        Command::Fit => Stage::Fit,
        Command::Audit => Stage::Audit,
        Command::Pls => Stage::Spls,
        Command::Report | Command::Run => Stage::Report,
    }
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = build_config(cli)?;
    let mut pipeline = Pipeline::new(cfg)?;
    let outcomes = pipeline.run_until(target(&cli.command))?;
    for o in &outcomes {
        println!("{:<8} {:<6} {:>7.2}s", o.stage.name(), o.status.to_string(), o.seconds);
    }
    let cached = outcomes.iter().filter(|o| o.status == StageStatus::Cached).count();
    println!(
        "{} stage(s), {cached} cached; outputs in {} (config {})",
        outcomes.len(),
        pipeline.out_dir().display(),
        pipeline.config_hash()
    );
    if let Command::Synth(_) = cli.command {
        println!("dataset manifest: {}", pipeline.manifest_path().display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use myoaudit::synth::SynthSpec;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn synth_flags_build_a_synthetic_config() {
        let cli = Cli::parse_from(["myoaudit", "--seed", "4", "synth", "--subjects", "9", "--planted"]);
        let cfg = build_config(&cli).unwrap();
        let spec = cfg.synth.unwrap();
        assert_eq!(spec.n_subjects, 9);
        assert_eq!(spec.effects.len(), 2);
        assert_eq!(cfg.seed, Some(4));
        assert!(cfg.dataset.is_none());
        assert_eq!(SynthSpec::default().n_gestures, spec.n_gestures);
    }

    #[test]
    fn overrides_reach_the_config() {
        let cli = Cli::parse_from([
            "myoaudit", "--dataset", "m.json", "--keep-x", "20", "--fdr-family", "per-demographic", "--no-noise", "run",
        ]);
        let cfg = build_config(&cli).unwrap();
        assert_eq!(cfg.dataset, Some(PathBuf::from("m.json")));
        assert_eq!(cfg.spls.keep_x, 20);
        assert_eq!(cfg.audit.fdr_family, FdrFamily::PerDemographic);
        assert!(!cfg.mice.noise);
    }
}
