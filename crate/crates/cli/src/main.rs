//! `stainfuse` command-line driver.
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stainfuse::evaluation::{evaluate_cohort, read_cohort_predictions, write_report_csv, ReportRow, ReportTable};
use stainfuse::pipeline::{self, PipelineConfig};
use stainfuse::Real;

#[derive(Debug, Parser)]
#[command(name = "stainfuse", version, about = "Multi-stain slide classification pipeline")]
struct Cli {
    /// Pipeline config (JSON). Defaults are used when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output root, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic cohorts under the data root.
    Synth,
    /// Write tile manifests for every slide.
    Tessellate,
    /// Train scorers, select thresholds and write fusion configs.
    Train,
    /// Score the tiles of every evaluated slide.
    Score,
    /// Aggregate tile scores into slide scores with CIs.
    Aggregate,
    /// Fuse slide scores under every fusion mode.
    Fuse,
    /// Evaluate a predictions CSV, or the fused outputs of earlier stages.
    Evaluate {
        /// `slide_id,score,label` CSV to evaluate on its own.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Cohort id for the report; defaults to the file stem.
        #[arg(long)]
        cohort_id: Option<String>,
        /// Bootstrap replicates, overriding the config.
        #[arg(long)]
        n_boot: Option<usize>,
        /// Where to write the report CSV for a standalone evaluation.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every stage after synthesis.
    Run {
        /// Generate the synthetic cohorts first.
        #[arg(long)]
        synth: bool,
    },
}

enum Failure {
    Config(String),
    Pipeline(stainfuse::Error),
}

impl From<stainfuse::Error> for Failure {
    fn from(e: stainfuse::Error) -> Self {
        Failure::Pipeline(e)
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut config = match &cli.config {
        Some(path) => {
            if !path.is_file() {
                return Err(Failure::Config(format!("config file not found: {}", path.display())));
            }
            PipelineConfig::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_root = out.clone();
    }
    config.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(config)
}

fn evaluate_file(
    config: &PipelineConfig,
    path: &Path,
    cohort_id: Option<&str>,
    n_boot: Option<usize>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Failure::Config(format!("{name}: {e}")))?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let cohort_id = cohort_id.unwrap_or(&stem);
    let cohort = read_cohort_predictions::<Real, _>(std::io::BufReader::new(file), &name, cohort_id)?;
    let mut bootstrap = config.cohort_bootstrap();
    if let Some(n) = n_boot {
        bootstrap.n_boot = n;
    }
    let result = evaluate_cohort(&cohort, &bootstrap)?;
    let row = ReportRow::from_result(&stem, &result);
    let mut table = ReportTable::new();
    table.insert(row.clone());
    print!("{}", table.to_text());
    if let Some(out) = output {
        let file = std::fs::File::create(out).map_err(|e| stainfuse::Error::Io {
            path: out.to_path_buf(),
            source: e,
        })?;
        write_report_csv(file, &[&row])?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Failure::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let load_cohorts = || pipeline::data::load_cohorts(&config);
    match &cli.command {
        Command::Synth => {
            let manifests = pipeline::synthesize(&config)?;
            for m in manifests {
                println!("{}: {} slides", m.cohort_id, m.entries.len());
            }
        }
        Command::Tessellate => {
            for (cohort, tiles) in pipeline::tessellate_cohorts(&config)? {
                println!("{cohort}: {} tiles", tiles.len());
            }
        }
        Command::Train => {
            let set = pipeline::train_stage(&config, &load_cohorts()?)?;
            for p in &set.thresholds.fusion_params {
                println!(
                    "{}: threshold {:.4}, validation AUROC {:.4}",
                    p.model_id, p.threshold, p.validation_auroc
                );
            }
        }
        Command::Score => {
            let cohorts = load_cohorts()?;
            let models = pipeline::load_model_set(&config)?;
            for (id, scores) in pipeline::score_stage(&config, &cohorts, &models)? {
                println!("{id}: {} tile scores", scores.len());
            }
        }
        Command::Aggregate => {
            let cohorts = load_cohorts()?;
            let scores = pipeline::load_tile_scores(&config, &cohorts)?;
            for (id, preds) in pipeline::aggregate_stage(&config, &cohorts, &scores)? {
                println!("{id}: {} slide predictions", preds.len());
            }
        }
        Command::Fuse => {
            let cohorts = load_cohorts()?;
            let models = pipeline::load_model_set(&config)?;
            let singles = pipeline::load_slide_predictions(&config, &cohorts)?;
            for (id, preds) in pipeline::fuse_stage(&config, &models, &singles)? {
                println!("{id}: {} fused predictions", preds.len());
            }
        }
        Command::Evaluate {
            predictions: Some(path),
            cohort_id,
            n_boot,
            output,
        } => evaluate_file(&config, path, cohort_id.as_deref(), *n_boot, output.as_deref())?,
        Command::Evaluate { predictions: None, .. } => {
            let cohorts = load_cohorts()?;
            let singles = pipeline::load_slide_predictions(&config, &cohorts)?;
            let fused = pipeline::load_fused_predictions(&config, &cohorts)?;
            let report = pipeline::evaluate_stage(&config, &singles, &fused)?;
            print!("{}", report.table.to_text());
        }
        Command::Run { synth } => {
            if *synth {
                pipeline::synthesize(&config)?;
            }
            let summary = pipeline::run(&config)?;
            print!("{}", summary.report.table.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
