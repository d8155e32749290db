use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mnegoti::artifacts::{replication_dir, summary_table, trace};
use mnegoti::{read_event_log, read_scenario, run_replications, write_replications};

#[derive(Parser)]
#[command(name = "mnegoti", version, about = "Multilateral negotiation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario document
    Validate { scenario: PathBuf },
    /// Run replications of a scenario and write their artifacts
    Run {
        scenario: PathBuf,
        /// Base seed; defaults to the scenario's seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long, env = "MNEGOTI_OUT", default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario's final tick
        #[arg(long)]
        ticks: Option<u64>,
    },
    /// Print a per-tick trace of an event log
    Inspect { event_log: PathBuf },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), mnegoti::Error> {
    match command {
        Command::Validate { scenario } => {
            let s = read_scenario(&scenario)?;
            println!(
                "{}: valid ({} agents, {} rooms, {} ticks)",
                scenario.display(),
                s.agent_count(),
                s.rooms.len(),
                s.ticks
            );
        }
        Command::Run { scenario, seed, replications, out, ticks } => {
            let mut s = read_scenario(&scenario)?;
            if let Some(t) = ticks {
                s = s.with_ticks(t);
            }
            let base = seed.unwrap_or(s.seed);
            let runs = run_replications(&s, base, replications)?;
            write_replications(&out, &runs)?;
            for (r, run) in runs.iter().enumerate() {
                println!("replication {r} (seed {}) -> {}", run.seed, replication_dir(&out, r).display());
                print!("{}", summary_table(&run.summary));
            }
        }
        Command::Inspect { event_log } => print!("{}", trace(&read_event_log(&event_log)?)),
    }
    Ok(())
}
