use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proxkit::problems::KINDS;
use proxkit_bench::config::SOLVERS;
use proxkit_bench::{run_experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "proxkit", version, about = "Seeded experiments for proximal point methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its CSV bundle.
    Run {
        /// Path of the experiment config.
        #[arg(required_unless_present_any = ["list_problems", "list_solvers"])]
        config: Option<PathBuf>,
        /// Output directory (overrides `run.out`; default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Print problem kinds and exit.
        #[arg(long)]
        list_problems: bool,
        /// Print solver names and exit.
        #[arg(long)]
        list_solvers: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, out, jobs, list_problems, list_solvers } = Cli::parse().command;
    if list_problems || list_solvers {
        if list_problems {
            KINDS.iter().for_each(|k| println!("{k}"));
        }
        if list_solvers {
            SOLVERS.iter().for_each(|(name, about)| println!("{name:16}{about}"));
        }
        return ExitCode::SUCCESS;
    }
    let Some(path) = config else {
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}:{e}", path.display());
            return ExitCode::from(2);
        }
    };
    let offset = match std::env::var("PROXKIT_SEED_OFFSET") {
        Err(_) => 0,
        Ok(v) => match v.trim().parse::<u64>() {
            Ok(o) => o,
            Err(_) => {
                eprintln!("error: PROXKIT_SEED_OFFSET must be a nonnegative integer, got `{v}`");
                return ExitCode::from(2);
            }
        },
    };
    let dir = out.or(cfg.run.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let output = run_experiment(&cfg, &text, jobs, offset);
    if let Err(e) = output.write_to(&dir) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(1);
    }
    for o in &output.outcomes {
        match &o.result {
            Ok(r) => println!("{} seed {}: {} entries, converged = {}", o.arm, o.seed, r.len(), r.converged),
            Err(e) => eprintln!("{} seed {} failed: {e}", o.arm, o.seed),
        }
    }
    if let Some(r) = output.ratio {
        println!("work ratio (baseline / solver): {r:.3}");
    }
    println!("wrote {} files to {}", output.files.len(), dir.display());
    if output.failed {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}
