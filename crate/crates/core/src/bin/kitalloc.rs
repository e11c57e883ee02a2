use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use kitalloc::config::load_config;
use kitalloc::model::Encoder;
use kitalloc::pooling::{effective_budget, expected_tests_per_person, PoolingStrategy};
use kitalloc::sim::{compare_strategies, emit_report, run_simulation_full, ReportFormat};
use kitalloc::strategy::StrategyKind;

#[derive(Parser)]
#[command(name = "kitalloc", version, about = "Budgeted test-kit allocation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation from a config file and emit the report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report file; the summary always prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Write the final risk model checkpoint here.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Run several strategies against paired realizations.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated strategy names.
        #[arg(long)]
        strategies: String,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the comparison table as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected-cost analytics for pooled testing.
    PoolAnalyze {
        /// Prevalence among tested individuals.
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 5)]
        size: usize,
        #[arg(long, default_value = "dorfman")]
        strategy: String,
        /// Kit budget to translate into testable people.
        #[arg(long, default_value_t = 100)]
        kits: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> kitalloc::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            format,
            model_out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let format = ReportFormat::parse(&format)?;
            let run = run_simulation_full(&cfg)?;
            print_summary(&run.report.summary);
            if let Some(path) = out {
                emit_report(&run.report, format, &path)?;
                println!("report written to {}", path.display());
            }
            if let Some(path) = model_out {
                let enc = Encoder::for_table(&cfg.load_table()?);
                run.final_model.save_checkpoint(&path, &enc.feature_names())?;
                println!("model checkpoint written to {}", path.display());
            }
            Ok(())
        }
        Command::Compare {
            config,
            strategies,
            replicates,
            seed,
            out,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let kinds: Vec<StrategyKind> = strategies
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(StrategyKind::parse)
                .collect::<kitalloc::Result<_>>()?;
            let table = compare_strategies(&cfg, &kinds, replicates)?;
            println!("{table}");
            if let Some(path) = out {
                std::fs::write(
                    &path,
                    serde_json::to_string_pretty(&table).expect("table serializes"),
                )?;
                println!("comparison written to {}", path.display());
            }
            Ok(())
        }
        Command::PoolAnalyze {
            p,
            size,
            strategy,
            kits,
        } => {
            let strategy = PoolingStrategy::parse(&strategy)?;
            let per_person = expected_tests_per_person(size, p, strategy)?;
            let people = effective_budget(kits, size, p, strategy)?;
            println!("pooling strategy:        {}", strategy.name());
            println!("pool size:               {size}");
            println!("prevalence:              {p}");
            println!("expected tests/person:   {per_person:.4}");
            println!("expected tests/pool:     {:.4}", per_person * size as f64);
            println!("{kits} kits cover about: {people} people");
            Ok(())
        }
    }
}

fn print_summary(summary: &kitalloc::sim::Summary) {
    println!("strategy:            {} ({})", summary.strategy, summary.mode);
    println!("days:                {}", summary.days);
    println!(
        "kits used/budgeted:  {}/{}",
        summary.total_kits_used, summary.total_kits_budgeted
    );
    println!(
        "positives found:     {}/{} (recall {:.4})",
        summary.total_positives_found,
        summary.total_positives_present,
        summary.final_detection_recall
    );
    println!("positives per kit:   {:.4}", summary.positives_per_kit);
    match summary.mean_tv_divergence {
        Some(tv) => println!("mean tv divergence:  {tv:.4}"),
        None => println!("mean tv divergence:  n/a"),
    }
    println!("probe log-loss:      {:.4}", summary.final_probe_log_loss);
    match summary.final_probe_auc {
        Some(auc) => println!("probe auc:           {auc:.4}"),
        None => println!("probe auc:           n/a"),
    }
    if let Some(tests) = summary.total_pooling_tests {
        println!("pooled tests used:   {tests}");
    }
}
