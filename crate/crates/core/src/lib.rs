//! Agent-based simulation of multilateral negotiation.
//!
//! Agents belong to groups whose preference weights are sampled from bounded
//! distributions. They watch meeting rooms, enter the ones that admit them
//! and negotiate over a room's agenda of issues under a chosen protocol.
//! A tick scheduler with watcher rules drives everything; runs are fully
//! determined by the scenario and a seed.
//!
//! ```
//! use mnegoti::{parse_scenario, Simulation};
//!
//! let scenario = parse_scenario(include_str!("../scenarios/protection_strategies.json")).unwrap();
//! let run = Simulation::new(&scenario, 42).unwrap().run().unwrap();
//! assert!(!run.summary.is_empty());
//! ```

pub mod artifacts;
pub mod context;
pub mod engine;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod room;
pub mod scenario;
pub mod schedule;

use thiserror::Error;

pub use artifacts::{read_event_log, write_replication, write_replications};
pub use context::{Context, EdgeLabel, ObjectKey, ObjectKind};
pub use engine::{run_replications, Event, EventRecord, RunArtifacts, Simulation, SummaryRow, World};
pub use metrics::{metrics, OutcomeMetrics};
pub use model::{Agent, AgentGroup, AgentState, Criterion, Direction, Distribution, Issue, PreferenceBounds};
pub use protocol::{
    NegotiationOutcome, NegotiationSession, ProtocolConfig, ProtocolKind, SessionStatus, StrategyConfig,
    StrategyKind,
};
pub use room::{Admission, Agenda, MeetingRoom, RoomState};
pub use scenario::{load_scenario, parse_scenario, read_scenario, Scenario, ScenarioDoc};
pub use schedule::{Scheduler, ScheduledAction, Tick};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Context(#[from] context::ContextError),
    #[error(transparent)]
    Schedule(#[from] schedule::ScheduleError),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error(transparent)]
    Room(#[from] room::RoomError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    EventLog { path: String, line: usize, message: String },
}
