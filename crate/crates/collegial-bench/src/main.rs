//! Thin command-line front end over the library: reproducible runs,
//! scoring, agreement statistics, reports, and corpus debugging helpers.

use std::io::Read;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use collegial_bench::dataset::DatasetConfig;
use collegial_bench::engine::types::EngineConfig;
use collegial_bench::evaluation::{
    pairwise_mean_kappa, quality_rates, read_annotations, render_report, Criterion, ReportFormat,
};
use collegial_bench::runner::{
    self, cmd_run, cmd_score, format_transcript, load_file_config, FileConfig, Method, RunConfig,
};
use collegial_bench::term_parser::extract_prison_term_months;
use collegial_bench::BackendConfig;

#[derive(Parser)]
#[command(
    name = "collegial-bench",
    version,
    about = "Multi-agent collegial bench simulation and scoring harness for prison term prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method over a dataset into a resumable run directory.
    Run(Box<RunArgs>),
    /// Recompute metrics for a finished run directory.
    Score {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value_t = 300)]
        max_diff: u32,
    },
    /// Inter-rater agreement and quality rates from an annotation file.
    Kappa {
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Render the comparison grid over one or more run directories.
    Report {
        run_dirs: Vec<PathBuf>,
        #[arg(long, default_value = "table")]
        format: String,
    },
    /// Replay one case against a scripted-responses file.
    Replay {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_rounds: u32,
        #[arg(long, default_value_t = 3)]
        bench_size: usize,
    },
    /// Check a dataset file and print per-line diagnostics.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 2000)]
        max_fact_chars: usize,
    },
    /// Read text on stdin and print the extracted prison term in months.
    Parse,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// standard | cot | ls | bench
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_diff: Option<u32>,
    #[arg(long)]
    max_failure_pct: Option<f64>,
    #[arg(long)]
    bench_size: Option<usize>,
    #[arg(long)]
    max_rounds: Option<u32>,
    #[arg(long)]
    parse_retries: Option<u32>,
    #[arg(long)]
    memory: bool,
    #[arg(long)]
    max_fact_chars: Option<usize>,
    /// Skip bad dataset records instead of aborting.
    #[arg(long)]
    skip_bad_records: bool,
    #[arg(long)]
    base_url: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    /// Agent pool file (JSON lines: id, role, persona, focus).
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Scripted-responses file; replaces the live backend.
    #[arg(long)]
    script: Option<PathBuf>,
}

fn build_run_config(args: RunArgs) -> anyhow::Result<RunConfig> {
    let file: FileConfig = match &args.config {
        Some(path) => load_file_config(path).context("loading config file")?,
        None => FileConfig::default(),
    };
    let dataset = args
        .dataset
        .or(file.dataset)
        .context("a dataset path is required (--dataset or config file)")?;
    let method = match args.method {
        Some(method) => method,
        None => file
            .method
            .as_deref()
            .context("a method is required (--method or config file)")?
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))?,
    };
    let model = args
        .model
        .or(file.model)
        .context("a model name is required")?;
    let out_dir = args
        .out
        .or(file.out_dir)
        .context("an output directory is required")?;

    let mut config = RunConfig::new(dataset, method, model, out_dir);
    config.workers = args.workers.or(file.workers).unwrap_or(1);
    config.limit = args.limit.or(file.limit);
    if let Some(max_diff) = args.max_diff.or(file.max_diff) {
        config.max_diff = max_diff;
    }
    if let Some(pct) = args.max_failure_pct.or(file.max_failure_pct) {
        config.max_failure_pct = pct;
    }
    config.engine_config = EngineConfig {
        bench_size: args.bench_size.or(file.bench_size).unwrap_or(3),
        max_rounds: args.max_rounds.or(file.max_rounds).unwrap_or(3),
        parse_retries: args.parse_retries.or(file.parse_retries).unwrap_or(1),
        seed: args.seed.or(file.seed).unwrap_or(0),
        memory_enabled: args.memory || file.memory_enabled.unwrap_or(false),
        ..EngineConfig::default()
    };
    config.dataset_config = DatasetConfig {
        max_fact_chars: args.max_fact_chars.or(file.max_fact_chars).unwrap_or(2000),
        reject_missing_fields: !args.skip_bad_records && file.reject_missing_fields.unwrap_or(true),
        ..DatasetConfig::default()
    };
    config.backend_config = BackendConfig {
        base_url: args
            .base_url
            .or(file.base_url)
            .unwrap_or_else(|| BackendConfig::default().base_url),
        api_key_env_var: args
            .api_key_env
            .or(file.api_key_env)
            .unwrap_or_else(|| BackendConfig::default().api_key_env_var),
        ..BackendConfig::default()
    };
    config.pool = args.pool.or(file.pool);
    config.templates_dir = args.templates.or(file.templates_dir);
    config.script = args.script.or(file.script);
    Ok(config)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    std::process::exit(match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    });
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let config = build_run_config(*args)?;
            let outcome = cmd_run(&config)?;
            println!(
                "{}/{} cases completed ({} failed, {} resumed), mean performance {:.2}%",
                outcome.completed,
                outcome.total,
                outcome.failed,
                outcome.skipped_resume,
                outcome.summary.mean_performance_pct
            );
            Ok(if outcome.within_failure_budget { 0 } else { 1 })
        }
        Command::Score { run_dir, max_diff } => {
            let summary = cmd_score(&run_dir, max_diff)?;
            println!(
                "{} {}: mean performance {:.2}% over {} cases ({} unparsed)",
                summary.model,
                summary.method,
                summary.mean_performance_pct,
                summary.cases,
                summary.unparsed
            );
            Ok(0)
        }
        Command::Kappa { annotations } => {
            let annotations = read_annotations(&annotations)?;
            for criterion in Criterion::ALL {
                let kappa = pairwise_mean_kappa(&annotations, criterion)?;
                println!("{} pairwise kappa: {kappa:.4}", criterion.name());
            }
            for (criterion, rate) in quality_rates(&annotations)? {
                println!("{criterion} rate: {rate:.1}%");
            }
            Ok(0)
        }
        Command::Report { run_dirs, format } => {
            anyhow::ensure!(
                !run_dirs.is_empty(),
                "at least one run directory is required"
            );
            let format = match format.as_str() {
                "table" => ReportFormat::TableText,
                "csv" => ReportFormat::Delimited,
                other => anyhow::bail!("unknown format {other:?} (expected table|csv)"),
            };
            let summaries = runner::read_summaries(&run_dirs)?;
            print!("{}", render_report(&summaries, format)?);
            Ok(0)
        }
        Command::Replay {
            script,
            case,
            pool,
            seed,
            max_rounds,
            bench_size,
        } => {
            let engine_config = EngineConfig {
                seed,
                max_rounds,
                bench_size,
                ..EngineConfig::default()
            };
            let transcript = runner::cmd_replay(
                &script,
                &case,
                pool.as_deref(),
                engine_config,
                &DatasetConfig::default(),
            )?;
            print!("{}", format_transcript(&transcript));
            Ok(0)
        }
        Command::Validate {
            dataset,
            max_fact_chars,
        } => {
            let config = DatasetConfig {
                max_fact_chars,
                reject_missing_fields: true,
                ..DatasetConfig::default()
            };
            let report = collegial_bench::dataset::validate_lines(&dataset, &config)?;
            let mut bad = 0usize;
            for (line, problem) in &report {
                match problem {
                    None => println!("line {line}: ok"),
                    Some(reason) => {
                        bad += 1;
                        println!("{reason}");
                    }
                }
            }
            println!("{} records checked, {} bad", report.len(), bad);
            Ok(if bad == 0 { 0 } else { 1 })
        }
        Command::Parse => {
            let mut text = String::new();
            std::io::stdin().read_to_string(&mut text)?;
            match extract_prison_term_months(&text) {
                Some(months) => println!("{months}"),
                None => println!("none"),
            }
            Ok(0)
        }
    }
}
