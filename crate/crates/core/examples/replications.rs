//! Run seeded replications of the bundled scenario and write their artifacts.

use std::path::PathBuf;

use mnegoti::artifacts::{summary_from_events, summary_table};
use mnegoti::{parse_scenario, run_replications, write_replications};

fn main() -> Result<(), mnegoti::Error> {
    let scenario = parse_scenario(include_str!("../scenarios/protection_strategies.json"))?;
    let runs = run_replications(&scenario, scenario.seed, 3)?;

    let out = std::env::var_os("MNEGOTI_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mnegoti_replications"));
    let dirs = write_replications(&out, &runs)?;

    for (run, dir) in runs.iter().zip(&dirs) {
        println!("seed {} -> {} ({} events)", run.seed, dir.display(), run.events.len());
        print!("{}", summary_table(&run.summary));
        assert_eq!(summary_from_events(&run.events), run.summary);
    }

    let agreements = runs.iter().flat_map(|r| &r.summary).filter(|row| row.status == "agreed").count();
    let sessions: usize = runs.iter().map(|r| r.summary.len()).sum();
    println!("{agreements} of {sessions} sessions reached agreement");
    Ok(())
}
