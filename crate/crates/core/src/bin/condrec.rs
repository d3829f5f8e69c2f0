//! Command-line orchestrator for the condensation toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use condrec::commands::{self, CliError, EvalVariant};
use condrec::config::PipelineConfig;
use condrec::datamodel::DatasetStats;
use condrec::synth::SyntheticBenchmarkSpec;

#[derive(Parser)]
#[command(name = "condrec", version, about = "Training-free dataset condensation for content-based recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (flat key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set condense.k=16 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed (overrides seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write JSON versions of the reports.
    #[arg(long, global = true)]
    json: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let mut overrides: Vec<(String, String)> = Vec::new();
        for pair in &self.set {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("--set expects KEY=VALUE, got {pair:?}"))
            })?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(out) = &self.out {
            overrides.push(("output.dir".into(), out.display().to_string()));
        }
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        config.apply_overrides(&overrides)?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and print its statistics.
    Ingest {
        /// Items file.
        items: PathBuf,
        /// Behaviors file.
        behaviors: PathBuf,
    },
    /// Generate the planted-structure synthetic benchmark.
    GenSynthetic {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 8)]
        groups: usize,
        #[arg(long, default_value_t = 50)]
        users_per_group: usize,
        #[arg(long, default_value_t = 40)]
        items_per_topic: usize,
        #[arg(long, default_value_t = 30)]
        vocab_per_topic: usize,
        #[arg(long, default_value_t = 8)]
        history_min: usize,
        #[arg(long, default_value_t = 16)]
        history_max: usize,
        #[arg(long, default_value_t = 30)]
        impressions_per_user: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_rate: f64,
    },
    /// Evolve the condensation prompt and write the trace.
    Evolve {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the user encoder, run condensation, and write the artifacts.
    Condense {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the recommender on the train split and save the parameters.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train on a variant of the train split and evaluate on the test split.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        /// original | condensed | random | majority
        #[arg(long)]
        variant: String,
    },
    /// Aggregate the per-variant reports into one Quality table.
    Compare {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the pipeline per alpha value and tabulate Quality.
    SweepAlpha {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated alpha values.
        #[arg(long, default_value = "0,0.2,0.4,0.6,0.8,1.0")]
        alphas: String,
    },
    /// Run the pipeline per cluster count K and tabulate Quality.
    SweepK {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated K values.
        #[arg(long, default_value = "4,8,16")]
        ks: String,
    },
}

fn print_stats(stats: &DatasetStats) {
    println!("items\t{}", stats.n_items);
    println!("users\t{}", stats.n_users);
    println!("avg_tokens_per_item\t{:.2}", stats.avg_tokens_per_item);
    println!("avg_history_len\t{:.2}", stats.avg_history_len);
    println!("positives\t{}", stats.n_pos);
    println!("negatives\t{}", stats.n_neg);
    println!("density\t{:.4}%", stats.density * 100.0);
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|e| CliError::Validation(format!("bad {what} value {v:?}: {e}")))
        })
        .collect()
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Ingest { items, behaviors } => {
            let stats = commands::cmd_ingest(&items, &behaviors)?;
            print_stats(&stats);
        }
        Command::GenSynthetic {
            config,
            groups,
            users_per_group,
            items_per_topic,
            vocab_per_topic,
            history_min,
            history_max,
            impressions_per_user,
            noise_rate,
        } => {
            let config = config.resolve()?;
            let spec = SyntheticBenchmarkSpec {
                groups,
                users_per_group,
                items_per_topic,
                vocab_per_topic,
                history_len: (history_min, history_max),
                impressions_per_user,
                noise_rate,
                seed: config.seed,
            };
            let stats = commands::cmd_gen_synthetic(&spec, &config)?;
            println!("wrote {}", config.output_dir.join("items.tsv").display());
            println!("wrote {}", config.output_dir.join("behaviors.tsv").display());
            print_stats(&stats);
        }
        Command::Evolve { config } => {
            let config = config.resolve()?;
            let summary = commands::cmd_evolve(&config)?;
            println!(
                "evolved {} generations; final prompt {} (score {:.4})",
                summary.winner_paths.len(),
                summary.final_prompt_path.display(),
                summary.final_score
            );
            println!("trace {}", summary.trace_path.display());
        }
        Command::Condense { config } => {
            let json = config.json;
            let config = config.resolve()?;
            let summary = commands::cmd_condense(&config, json)?;
            println!(
                "condensed to {} synthetic users, {} items ({} condensation failures)",
                summary.synthetic_users, summary.condensed_items, summary.content_failures
            );
            println!(
                "size: items {:.1}% users {:.1}% overall {:.1}%",
                summary.size_report.item_ratio * 100.0,
                summary.size_report.user_ratio * 100.0,
                summary.size_report.overall_ratio * 100.0
            );
        }
        Command::Train { config } => {
            let config = config.resolve()?;
            let summary = commands::cmd_train(&config)?;
            println!(
                "trained: final loss {:.6}; params {}",
                summary.epoch_losses.last().unwrap(),
                summary.params_path.display()
            );
        }
        Command::Eval { config, variant } => {
            let json = config.json;
            let config = config.resolve()?;
            let variant = EvalVariant::parse(&variant)?;
            let report = commands::cmd_eval(&config, variant, json)?;
            print!("{}", report.to_tsv());
        }
        Command::Compare { config } => {
            let json = config.json;
            let config = config.resolve()?;
            let rows = commands::cmd_compare(&config, json)?;
            for (name, report) in rows {
                println!("{name}\tquality {:.2}%", report.quality_pct.unwrap());
            }
        }
        Command::SweepAlpha { config, alphas } => {
            let json = config.json;
            let config = config.resolve()?;
            let alphas: Vec<f64> = parse_list(&alphas, "alpha")?;
            let rows = commands::cmd_sweep_alpha(&config, &alphas, json)?;
            for row in rows {
                println!("alpha {}\tquality {:.2}%", row.value, row.quality_pct);
            }
        }
        Command::SweepK { config, ks } => {
            let json = config.json;
            let config = config.resolve()?;
            let ks: Vec<usize> = parse_list(&ks, "K")?;
            let rows = commands::cmd_sweep_k(&config, &ks, json)?;
            for row in rows {
                println!("K {}\tquality {:.2}%", row.value, row.quality_pct);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
