//! Drive a simulation tick by tick and watch agents react to a room opening.

use mnegoti::artifacts::describe;
use mnegoti::schedule::{ActionKind, Offset, Query, Reaction, StateLabel, Trigger, WatcherRule};
use mnegoti::{parse_scenario, ObjectKind, Simulation};

const SCENARIO: &str = r#"{
  "version": 1, "seed": 5, "ticks": 4,
  "criteria": [{ "id": 0, "name": "cost", "direction": "cost" }, { "id": 1, "name": "quality" }],
  "issues": [
    { "id": 0, "name": "cheap", "scores": [0.1, 0.3] },
    { "id": 1, "name": "premium", "scores": [0.9, 0.9] }
  ],
  "groups": [
    { "id": 0, "name": "buyers", "bounds": [[0.5, 0.9], [0.1, 0.5]], "members": 3 },
    { "id": 1, "name": "observers", "bounds": [[0.5, 0.5], [0.5, 0.5]], "members": 1 }
  ],
  "rooms": [{ "id": 0, "sessions": [{ "open_at": 1, "agenda": {
    "issues": [0, 1], "admission": { "conditions": { "groups": [0] } }, "protocol": 0 } }] }],
  "protocols": [{ "id": 0, "kind": "monotonic_concession", "max_rounds": 3 }],
  "watchers": []
}"#;

fn main() -> Result<(), mnegoti::Error> {
    let scenario = parse_scenario(SCENARIO)?;
    let mut sim = Simulation::new(&scenario, scenario.seed)?;

    // Same rule the scenario loader installs by default, spelled out.
    let rule = WatcherRule {
        watcher: Query::kind(ObjectKind::Agent),
        watchee: Query::kind(ObjectKind::MeetingRoom).in_state(StateLabel::Open),
        trigger: Trigger::All(vec![Trigger::WatcherAvailable, Trigger::Admissible]),
        reaction: Reaction { action: ActionKind::AgentScan, offset: Offset::SameTick, priority: 0 },
    };
    sim.scheduler_mut().register_watcher(rule)?;

    let mut shown = 0;
    while !sim.is_finished() {
        let report = sim.step()?;
        println!("tick {}: {} actions", report.tick, report.executed.len());
        for record in &sim.world().log()[shown..] {
            println!("  [{:>8}] {}", record.priority, describe(&record.event));
        }
        shown = sim.world().log().len();
    }
    Ok(())
}
