//! Open a room, admit agents by condition, negotiate and close.

use mnegoti::model::AgentState;
use mnegoti::protocol::ProtocolKind;
use mnegoti::room::{Admission, Agenda, SessionStart};
use mnegoti::{Agent, Issue, MeetingRoom, ProtocolConfig, StrategyConfig};

fn agent(id: usize, group_id: usize, weights: [f64; 2]) -> Agent {
    Agent { id, group_id, raw_prefs: weights.to_vec(), weights: weights.to_vec(), state: AgentState::Idle }
}

fn main() -> Result<(), mnegoti::Error> {
    let issues = vec![
        Issue { id: 0, name: "north_route".into(), scores: vec![0.9, 0.2] },
        Issue { id: 1, name: "south_route".into(), scores: vec![0.3, 0.8] },
        Issue { id: 2, name: "split".into(), scores: vec![0.6, 0.6] },
    ];
    let mut agents = vec![
        agent(0, 0, [0.8, 0.2]),
        agent(1, 0, [0.7, 0.3]),
        agent(2, 1, [0.2, 0.8]),
        agent(3, 2, [0.5, 0.5]),
    ];

    let mut room = MeetingRoom::new(0, 0.0);
    let agenda = Agenda {
        issue_ids: vec![0, 1, 2],
        admission: Admission::Conditions { groups: Some(vec![0, 1]), theta_in: Some(0.5) },
        protocol_id: 0,
        deadline_rounds: 4,
    };
    room.open(agenda, 1)?;
    for a in agents.iter_mut() {
        let admitted = room.enter(a, &issues).unwrap_or(false);
        println!("agent {} (group {}) admitted: {admitted}", a.id, a.group_id);
    }

    let protocol = ProtocolConfig::new(ProtocolKind::MonotonicConcession, 4);
    let start = room.start_session(&mut agents, &issues, protocol, |_| StrategyConfig::time_dependent(2.0), 2)?;
    assert_eq!(start, SessionStart::Started);

    let mut tick = 2;
    while room.session().is_some_and(|s| s.is_active()) {
        for block in room.advance(1, tick)? {
            println!("round {} at tick {tick}: {} transcript entries", block.round, block.events.len());
        }
        tick += 1;
    }
    let record = room.close(&mut agents, tick)?;
    println!(
        "closed with {} on issue {:?} after {} rounds; utilities {:.3?}",
        record.outcome.status.label(),
        record.outcome.agreed_issue,
        record.outcome.rounds_used,
        record.outcome.utilities
    );
    println!("room state {:?}, history length {}", room.state(), room.history().len());
    Ok(())
}
