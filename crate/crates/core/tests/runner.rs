mod common;

use std::fs;

use common::scenario_path;
use mnegoti::artifacts::{summary_csv, summary_from_events, EVENTS_FILE, POPULATION_FILE, SUMMARY_FILE, SUMMARY_HEADER};
use mnegoti::{
    parse_scenario, read_event_log, read_scenario, run_replications, write_replications, Error, Event, Simulation,
};
use mnegoti::scenario::ScenarioError;

#[test]
fn summary_is_recomputable_from_written_log() {
    let scenario = read_scenario(scenario_path("protection_strategies.json")).unwrap();
    let runs = run_replications(&scenario, 42, 2).unwrap();
    let out = tempfile::tempdir().unwrap();
    let dirs = write_replications(out.path(), &runs).unwrap();
    for (run, dir) in runs.iter().zip(&dirs) {
        let events = read_event_log(dir.join(EVENTS_FILE)).unwrap();
        assert_eq!(events, run.events);
        let rebuilt = summary_from_events(&events);
        assert_eq!(rebuilt, run.summary);
        assert_eq!(fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap(), summary_csv(&rebuilt));
    }
}

#[test]
fn replication_seeds_follow_base_plus_offset() {
    let scenario = read_scenario(scenario_path("supply_chain.json")).unwrap();
    let runs = run_replications(&scenario, 100, 3).unwrap();
    assert_eq!(runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![100, 101, 102]);
}

#[test]
fn replications_are_isolated() {
    let scenario = read_scenario(scenario_path("supply_chain.json")).unwrap();
    let batch = run_replications(&scenario, 5, 4).unwrap();
    for (r, run) in batch.iter().enumerate() {
        let alone = Simulation::new(&scenario, 5 + r as u64).unwrap().run().unwrap();
        assert_eq!(&alone, run);
    }
}

#[test]
fn degenerate_bounds_give_identical_outcomes() {
    let scenario = read_scenario(scenario_path("degenerate_bounds.json")).unwrap();
    let single = Simulation::new(&scenario, 0).unwrap().run().unwrap();
    for run in run_replications(&scenario, 1000, 5).unwrap() {
        assert_eq!(run.summary, single.summary);
        assert_eq!(run.events, single.events);
        assert_eq!(run.population, single.population);
    }
}

#[test]
fn artifact_files_have_fixed_headers() {
    let scenario = read_scenario(scenario_path("concurrent_rooms.json")).unwrap();
    let runs = run_replications(&scenario, 1, 1).unwrap();
    let out = tempfile::tempdir().unwrap();
    let dir = &write_replications(out.path(), &runs).unwrap()[0];
    let summary = fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    assert_eq!(summary.lines().count(), 4);
    let population = fs::read_to_string(dir.join(POPULATION_FILE)).unwrap();
    assert_eq!(population.lines().next(), Some("agent_id,group_id,weight_0,weight_1"));
    assert_eq!(population.lines().count(), 1 + scenario.agent_count());
}

#[test]
fn event_log_preserves_execution_order() {
    let scenario = read_scenario(scenario_path("protection_strategies.json")).unwrap();
    let run = Simulation::new(&scenario, 42).unwrap().run().unwrap();
    for pair in run.events.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert!(a.tick < b.tick || (a.tick == b.tick && a.priority >= b.priority), "{a:?} then {b:?}");
    }
    assert!(matches!(run.events.last().unwrap().event, Event::Report { .. }));
}

#[test]
fn attendees_satisfy_admission_and_never_double_book() {
    let scenario = read_scenario(scenario_path("protection_strategies.json")).unwrap();
    for seed in 0..20 {
        let mut sim = Simulation::new(&scenario, seed).unwrap();
        while !sim.is_finished() {
            sim.step().unwrap();
            let world = sim.world();
            let mut seen = std::collections::BTreeSet::new();
            for room in &world.rooms {
                for agent in room.attendees() {
                    assert!(seen.insert(agent), "agent {agent} in two rooms");
                    if room.session().is_none() {
                        assert!(room.check_admission(&world.agents[agent], &world.issues).unwrap());
                    }
                }
            }
        }
    }
}

#[test]
fn forced_close_interrupts_the_session() {
    let text = r#"{
      "version": 1, "seed": 1, "ticks": 10,
      "criteria": [{ "id": 0, "name": "x" }, { "id": 1, "name": "y" }],
      "issues": [
        { "id": 0, "name": "a", "scores": [1.0, 0.0] },
        { "id": 1, "name": "b", "scores": [0.0, 1.0] },
        { "id": 2, "name": "c", "scores": [0.5, 0.5] }
      ],
      "groups": [
        { "id": 0, "name": "xs", "bounds": [[1.0, 1.0], [0.0, 0.0]], "members": 1 },
        { "id": 1, "name": "ys", "bounds": [[0.0, 0.0], [1.0, 1.0]], "members": 1 }
      ],
      "rooms": [{ "id": 0, "sessions": [{ "open_at": 1, "close_at": CLOSE, "agenda": {
        "issues": [0, 1, 2], "admission": { "conditions": {} }, "protocol": 0 } }] }],
      "protocols": [{ "id": 0, "kind": "mediated_single_text", "max_rounds": 5 }]
    }"#;
    let run_with = |close: &str| {
        let scenario = parse_scenario(&text.replace("CLOSE", close)).unwrap();
        Simulation::new(&scenario, 1).unwrap().run().unwrap()
    };

    let before_start = run_with("2");
    assert_eq!(before_start.summary.len(), 1);
    assert_eq!((before_start.summary[0].status.as_str(), before_start.summary[0].rounds), ("interrupted", 0));

    let mid_session = run_with("3");
    assert_eq!((mid_session.summary[0].status.as_str(), mid_session.summary[0].rounds), ("interrupted", 1));
    assert_eq!(mid_session.summary[0].welfare, 0.0);

    let unforced = run_with("9");
    assert_eq!(unforced.summary[0].status, "agreed");
    assert!(unforced.events.iter().any(|r| matches!(r.event, Event::Skipped { .. })));
}

#[test]
fn invalid_scenarios_name_the_offending_path() {
    let text = fs::read_to_string(scenario_path("supply_chain.json")).unwrap();
    let bad_bounds = text.replace("[[0.6, 1.0], [0.1, 0.4], [0.1, 0.3]]", "[[0.6, 0.4], [0.1, 0.4], [0.1, 0.3]]");
    match parse_scenario(&bad_bounds) {
        Err(ScenarioError::Validation(e)) => {
            assert_eq!(e.path, "groups[0].bounds[0]");
            assert!(e.message.contains("lower > upper"), "{e}");
        }
        other => panic!("expected validation error, got {other:?}"),
    }
    let bad_issue = text.replacen(r#""issues": [0, 1, 2, 3]"#, r#""issues": [0, 9]"#, 1);
    assert!(matches!(parse_scenario(&bad_issue), Err(ScenarioError::Validation(_))));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let scenario = read_scenario(scenario_path("degenerate_bounds.json")).unwrap();
    let runs = run_replications(&scenario, 0, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    assert!(matches!(write_replications(&blocker, &runs), Err(Error::Io { .. })));
}

#[test]
fn canonical_form_round_trips() {
    for name in ["protection_strategies.json", "supply_chain.json", "concurrent_rooms.json", "degenerate_bounds.json"] {
        let scenario = read_scenario(scenario_path(name)).unwrap();
        assert_eq!(parse_scenario(&scenario.to_json()).unwrap(), scenario, "{name}");
    }
}
