//! `ecosim` command-line driver.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use ecosim::ecosystem::{compare_migration, run_simulation};
use ecosim::evolution::{brute_force_oracle, NoUsage};
use ecosim::instance::{parse_pool_spec, parse_request_spec};
use ecosim::metrics;
use ecosim::model::AgentId;
use ecosim::{SimConfig, SimError};

const OUTPUTS: [&str; 3] = ["events.jsonl", "metrics.csv", "summary.json"];

#[derive(Parser)]
#[command(name = "ecosim", version, about = "Habitat network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write events.jsonl, metrics.csv and summary.json.
    Run {
        /// Flat `key = value` configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        rounds: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `ecosystem.migration_enabled`; `--migration-enabled=false`
        /// isolates every habitat.
        #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
        migration_enabled: Option<bool>,
        /// Replace existing outputs in the output directory.
        #[arg(long)]
        force: bool,
    },
    /// Exhaustively search a small instance and print the optimum as JSON.
    Oracle {
        /// Agents separated by `;`, tokens by `,`, e.g. `0,1;2;3`.
        #[arg(long)]
        pool: String,
        /// Request tokens, e.g. `0,2`.
        #[arg(long)]
        request: String,
        #[arg(long, default_value_t = 4)]
        l_bound: usize,
        /// Configuration supplying the fitness parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run every seed with migration on and off and report paired means.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated seeds or inclusive ranges, e.g. `1..20` or `1,4,9`.
        #[arg(long)]
        seeds: String,
        #[arg(long, default_value_t = 50)]
        warmup: u64,
        #[arg(long, default_value_t = 150)]
        rounds: u64,
    },
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn load_config(path: Option<&Path>) -> Result<SimConfig, Failure> {
    match path {
        Some(p) => SimConfig::load(p).map_err(|e| match e {
            SimError::Io(io) => io_err(p, io),
            other => Failure::Usage(format!("{}: {other}", p.display())),
        }),
        None => Ok(SimConfig::default()),
    }
}

fn threads() -> Result<usize, Failure> {
    match std::env::var("ECOSIM_THREADS") {
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Failure::Usage(format!("ECOSIM_THREADS: {v:?} is not a positive integer"))),
        },
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("--seeds: cannot parse {spec:?}"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(seeds)
}

fn cmd_run(
    config: Option<PathBuf>,
    seed: u64,
    rounds: u64,
    out: PathBuf,
    migration_enabled: Option<bool>,
    force: bool,
) -> Result<(), Failure> {
    let mut cfg = load_config(config.as_deref())?;
    if let Some(m) = migration_enabled {
        cfg.ecosystem.migration_enabled = m;
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let threads = threads()?;

    if !force {
        if let Some(existing) = OUTPUTS.iter().map(|f| out.join(f)).find(|p| p.exists()) {
            return Err(Failure::Io(format!(
                "{} already exists; pass --force to overwrite",
                existing.display()
            )));
        }
    }
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let eco = run_simulation(&cfg, seed, rounds, threads)?;

    let events = out.join(OUTPUTS[0]);
    std::fs::write(&events, eco.events_jsonl()).map_err(|e| io_err(&events, e))?;
    let csv = out.join(OUTPUTS[1]);
    metrics::export_csv(&eco.metrics, &csv).map_err(|e| io_err(&csv, e))?;
    let summary = json!({
        "seed": seed,
        "rounds": rounds,
        "final_metrics": eco.metrics.last(),
        "registered_agents": eco.registry.records.len(),
        "executed_total": eco.history.iter().filter(|r| r.executed).count(),
        "config": cfg,
    });
    let path = out.join(OUTPUTS[2]);
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn cmd_oracle(pool: &str, request: &str, l_bound: usize, config: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config.as_deref())?;
    let alphabet = cfg.workload.alphabet_size;
    let descriptions = parse_pool_spec(pool, alphabet).map_err(|e| Failure::Usage(format!("--pool: {e}")))?;
    let request = parse_request_spec(request, alphabet).map_err(|e| Failure::Usage(format!("--request: {e}")))?;
    let agents: Vec<AgentId> = descriptions.keys().copied().collect();
    let result = brute_force_oracle(&agents, &request, &descriptions, &NoUsage, &cfg.ga, l_bound)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let out = json!({
        "fitness": result.fitness,
        "sequence": result.sequence.agents.iter().map(|a| a.0).collect::<Vec<_>>(),
        "l_bound": l_bound,
        "parsimony": cfg.ga.parsimony,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_compare(config: Option<PathBuf>, seeds: &str, warmup: u64, rounds: u64) -> Result<(), Failure> {
    let cfg = load_config(config.as_deref())?;
    let seeds = parse_seeds(seeds)?;
    if seeds.len() < 2 {
        return Err(Failure::Usage("--seeds: at least two seeds are required".into()));
    }
    if warmup >= rounds {
        return Err(Failure::Usage("--warmup must be smaller than --rounds".into()));
    }
    let report = compare_migration(&cfg, &seeds, warmup, rounds)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            rounds,
            out,
            migration_enabled,
            force,
        } => cmd_run(config, seed, rounds, out, migration_enabled, force),
        Command::Oracle {
            pool,
            request,
            l_bound,
            config,
        } => cmd_oracle(&pool, &request, l_bound, config),
        Command::Compare {
            config,
            seeds,
            warmup,
            rounds,
        } => cmd_compare(config, &seeds, warmup, rounds),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
