//! On-disk outputs of a run: `events.log`, `summary.csv` and
//! `population.csv` per replication.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::engine::{Event, EventRecord, RunArtifacts, SummaryRow};
use crate::model::Agent;
use crate::protocol::{Proposer, TranscriptEvent};
use crate::Error;

pub const EVENTS_FILE: &str = "events.log";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const POPULATION_FILE: &str = "population.csv";
pub const SUMMARY_HEADER: &str = "room_id,session,status,issue_id,rounds,welfare,min_utility,nash_product";

pub fn replication_dir(out: &Path, replication: usize) -> PathBuf {
    out.join(format!("replication_{replication}"))
}

/// One JSON record per line.
pub fn event_log(events: &[EventRecord]) -> String {
    let mut text = String::new();
    for record in events {
        text.push_str(&serde_json::to_string(record).expect("event records serialize"));
        text.push('\n');
    }
    text
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut text = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let issue = r.issue_id.map(|i| i.to_string()).unwrap_or_default();
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.room_id, r.session, r.status, issue, r.rounds, r.welfare, r.min_utility, r.nash_product
        )
        .unwrap();
    }
    text
}

pub fn population_csv(agents: &[Agent]) -> String {
    let k = agents.first().map_or(0, |a| a.weights.len());
    let mut text = String::from("agent_id,group_id");
    for c in 0..k {
        write!(text, ",weight_{c}").unwrap();
    }
    text.push('\n');
    for a in agents {
        write!(text, "{},{}", a.id, a.group_id).unwrap();
        for w in &a.weights {
            write!(text, ",{w}").unwrap();
        }
        text.push('\n');
    }
    text
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Writes one replication's artifacts into `dir`, creating it if needed.
pub fn write_replication(dir: &Path, run: &RunArtifacts) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join(EVENTS_FILE), &event_log(&run.events))?;
    write_file(&dir.join(SUMMARY_FILE), &summary_csv(&run.summary))?;
    write_file(&dir.join(POPULATION_FILE), &population_csv(&run.population))
}

/// Writes `runs[r]` to `<out>/replication_<r>/`; returns the directories.
pub fn write_replications(out: &Path, runs: &[RunArtifacts]) -> Result<Vec<PathBuf>, Error> {
    runs.iter()
        .enumerate()
        .map(|(r, run)| {
            let dir = replication_dir(out, r);
            write_replication(&dir, run).map(|()| dir)
        })
        .collect()
}

pub fn parse_event_log(text: &str, origin: &str) -> Result<Vec<EventRecord>, Error> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::EventLog {
                path: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_event_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>, Error> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_event_log(&text, &path.display().to_string())
}

/// Rebuilds the summary table from the `session_closed` records of a log.
pub fn summary_from_events(events: &[EventRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = events
        .iter()
        .filter_map(|r| match &r.event {
            Event::SessionClosed {
                room,
                session,
                status,
                issue,
                rounds,
                welfare,
                min_utility,
                nash_product,
                ..
            } => Some(SummaryRow {
                room_id: *room,
                session: *session,
                status: status.clone(),
                issue_id: *issue,
                rounds: *rounds,
                welfare: *welfare,
                min_utility: *min_utility,
                nash_product: *nash_product,
            }),
            _ => None,
        })
        .collect();
    rows.sort_by_key(|r| (r.room_id, r.session));
    rows
}

fn proposer(p: &Proposer) -> String {
    match p {
        Proposer::Agent(a) => format!("agent {a}"),
        Proposer::Mediator => "mediator".to_string(),
    }
}

fn describe_entry(entry: &TranscriptEvent) -> String {
    match entry {
        TranscriptEvent::Offer(offer) => format!("{} offers issue {}", proposer(&offer.proposer), offer.issue_id),
        TranscriptEvent::Response { agent, issue_id, accept } => {
            let verb = if *accept { "accepts" } else { "rejects" };
            format!("agent {agent} {verb} issue {issue_id}")
        }
        TranscriptEvent::AcceptableSet { agent, issue_ids } => format!("agent {agent} would accept {issue_ids:?}"),
        TranscriptEvent::Bid { agent, issue_id } => format!("agent {agent} bids for issue {issue_id}"),
        TranscriptEvent::Eliminated { issue_id } => format!("issue {issue_id} eliminated"),
    }
}

/// One human-readable line for an event.
pub fn describe(event: &Event) -> String {
    match event {
        Event::RoomOpened { room, plan, issues, protocol, deadline } => {
            format!("room {room} opens (plan {plan}) on issues {issues:?} under {protocol:?}, deadline {deadline}")
        }
        Event::Invited { room, agent } => format!("room {room} invites agent {agent}"),
        Event::WatcherFired { rule, watcher, watchee, action, at_tick, at_priority } => format!(
            "rule {rule}: {watcher} reacts to {watchee} with {action:?} at tick {at_tick} priority {at_priority}"
        ),
        Event::AgentEntered { agent, room, utility } => {
            format!("agent {agent} enters room {room} (best utility {utility:.4})")
        }
        Event::SessionStarted { room, session, participants } => {
            format!("room {room} session {session} starts with agents {participants:?}")
        }
        Event::Transcript { room, session, round, entry } => {
            format!("room {room} session {session} round {round}: {}", describe_entry(entry))
        }
        Event::SessionClosed { room, session, status, issue, rounds, welfare, .. } => {
            let issue = issue.map_or("-".to_string(), |i| i.to_string());
            format!("room {room} session {session} closes: {status}, issue {issue}, {rounds} rounds, welfare {welfare:.4}")
        }
        Event::Skipped { action, target, reason } => format!("{action:?} on {target} skipped: {reason}"),
        Event::Report { open_rooms, active_sessions, completed_sessions, agreements } => format!(
            "report: {open_rooms} open rooms, {active_sessions} active sessions, {completed_sessions} sessions done, {agreements} agreements"
        ),
    }
}

/// Per-tick trace of an event log.
pub fn trace(events: &[EventRecord]) -> String {
    let mut text = String::new();
    let mut tick = None;
    for record in events {
        if tick != Some(record.tick) {
            tick = Some(record.tick);
            writeln!(text, "tick {}", record.tick).unwrap();
        }
        writeln!(text, "  [{:>8}] {}", record.priority, describe(&record.event)).unwrap();
    }
    text
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut text = format!(
        "{:>4} {:>7} {:<13} {:>5} {:>6} {:>8} {:>8} {:>8}\n",
        "room", "session", "status", "issue", "rounds", "welfare", "min_u", "nash"
    );
    for r in rows {
        let issue = r.issue_id.map_or("-".to_string(), |i| i.to_string());
        writeln!(
            text,
            "{:>4} {:>7} {:<13} {:>5} {:>6} {:>8.4} {:>8.4} {:>8.4}",
            r.room_id, r.session, r.status, issue, r.rounds, r.welfare, r.min_utility, r.nash_product
        )
        .unwrap();
    }
    text
}
