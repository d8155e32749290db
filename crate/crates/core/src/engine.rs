//! The simulation loop: a [`World`] of agents and rooms driven by the tick
//! [`Scheduler`].
//!
//! Priority bands within a tick, highest first:
//!
//! ```text
//! RoomClose          PRIORITY_CLOSE
//! NegotiationRound   PRIORITY_ROUND - room_id * ROOM_BAND_STRIDE
//! RoomOpen           PRIORITY_OPEN
//!   RoomInvite / watcher reactions   one band below the action that caused them
//! Report             PRIORITY_REPORT
//! ```
//!
//! Rounds run before openings so that agents released by a finished session
//! can join a room opening in the same tick. Each room's rounds have their
//! own band, which makes concurrent sessions advance in ascending room order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::context::{Context, ObjectKey, ObjectKind};
use crate::metrics::metrics;
use crate::model::{Agent, AgentId, AgentState, Issue, IssueId, RoomId};
use crate::protocol::{ProtocolKind, RoundBlock, TranscriptEvent};
use crate::room::{max_agenda_utility, MeetingRoom, RoomState, SessionRecord, SessionStart};
use crate::scenario::{ProtocolSpec, RoomPlan, Scenario};
use crate::schedule::{
    ActionHandler, ActionKind, FiredReaction, Observable, Priority, RunStatus, ScheduleError,
    ScheduledAction, Scheduler, StateLabel, Tick, TickReport,
};
use crate::Error;

pub const PRIORITY_CLOSE: Priority = 3_000_000;
pub const PRIORITY_ROUND: Priority = 2_000_000;
pub const ROOM_BAND_STRIDE: Priority = 100;
pub const PRIORITY_OPEN: Priority = 500_000;
pub const PRIORITY_REPORT: Priority = -1_000_000;

pub fn round_priority(room: RoomId) -> Priority {
    PRIORITY_ROUND - room as Priority * ROOM_BAND_STRIDE
}

pub fn agent_label(state: AgentState) -> StateLabel {
    match state {
        AgentState::Idle => StateLabel::Idle,
        AgentState::Watching => StateLabel::Watching,
        AgentState::InRoom(_) => StateLabel::InRoom,
        AgentState::Negotiating(_) => StateLabel::Negotiating,
    }
}

/// One entry of the run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub tick: Tick,
    pub priority: Priority,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    RoomOpened {
        room: RoomId,
        plan: usize,
        issues: Vec<IssueId>,
        protocol: ProtocolKind,
        deadline: u32,
    },
    Invited {
        room: RoomId,
        agent: AgentId,
    },
    WatcherFired {
        rule: usize,
        watcher: ObjectKey,
        watchee: ObjectKey,
        action: ActionKind,
        at_tick: Tick,
        at_priority: Priority,
    },
    AgentEntered {
        agent: AgentId,
        room: RoomId,
        utility: f64,
    },
    SessionStarted {
        room: RoomId,
        session: usize,
        participants: Vec<AgentId>,
    },
    Transcript {
        room: RoomId,
        session: usize,
        round: u32,
        entry: TranscriptEvent,
    },
    SessionClosed {
        room: RoomId,
        session: usize,
        status: String,
        issue: Option<IssueId>,
        rounds: u32,
        participants: Vec<AgentId>,
        utilities: Vec<f64>,
        welfare: f64,
        min_utility: f64,
        nash_product: f64,
        ticks_spanned: u64,
    },
    Skipped {
        action: ActionKind,
        target: ObjectKey,
        reason: String,
    },
    Report {
        open_rooms: usize,
        active_sessions: usize,
        completed_sessions: usize,
        agreements: usize,
    },
}

/// Agents, rooms and the population context, plus the event log.
#[derive(Debug, Clone)]
pub struct World {
    pub issues: Vec<Issue>,
    pub agents: Vec<Agent>,
    pub rooms: Vec<MeetingRoom>,
    pub context: Context,
    plans: Vec<RoomPlan>,
    protocols: Vec<ProtocolSpec>,
    active_plan: Vec<Option<usize>>,
    log: Vec<EventRecord>,
    cursor: (Tick, Priority),
}

impl World {
    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    fn emit(&mut self, event: Event) {
        let (tick, priority) = self.cursor;
        self.log.push(EventRecord { tick, priority, event });
    }

    fn emit_fired(&mut self, fired: Vec<FiredReaction>) {
        for f in fired {
            self.emit(Event::WatcherFired {
                rule: f.rule_id,
                watcher: f.watcher,
                watchee: f.watchee,
                action: f.action.kind,
                at_tick: f.action.start,
                at_priority: f.action.priority,
            });
        }
    }

    fn skip(&mut self, action: &ScheduledAction, reason: impl Into<String>) {
        self.emit(Event::Skipped {
            action: action.kind,
            target: action.target,
            reason: reason.into(),
        });
    }

    fn set_agent_state(&mut self, sched: &mut Scheduler, agent: AgentId, old: AgentState) -> Result<(), Error> {
        let new = self.agents[agent].state;
        let fired = sched.notify_state_change(&*self, ObjectKey::agent(agent), agent_label(old), agent_label(new))?;
        self.emit_fired(fired);
        Ok(())
    }

    fn room_changed(&mut self, sched: &mut Scheduler, room: RoomId, old: RoomState) -> Result<(), Error> {
        let new = self.rooms[room].state();
        let fired = sched.notify_state_change(&*self, ObjectKey::room(room), old.label(), new.label())?;
        self.emit_fired(fired);
        Ok(())
    }

    fn agent_states(&self, ids: &[AgentId]) -> Vec<(AgentId, AgentState)> {
        ids.iter().map(|&id| (id, self.agents[id].state)).collect()
    }

    fn notify_agents(&mut self, sched: &mut Scheduler, before: Vec<(AgentId, AgentState)>) -> Result<(), Error> {
        for (id, old) in before {
            self.set_agent_state(sched, id, old)?;
        }
        Ok(())
    }

    fn record_closed(&mut self, room: RoomId, session: usize, record: &SessionRecord) {
        let m = metrics(&record.outcome);
        self.emit(Event::SessionClosed {
            room,
            session,
            status: record.outcome.status.label().to_string(),
            issue: record.outcome.agreed_issue,
            rounds: record.outcome.rounds_used,
            participants: record.outcome.participants.clone(),
            utilities: record.outcome.utilities.clone(),
            welfare: m.social_welfare,
            min_utility: m.min_utility,
            nash_product: m.nash_product,
            ticks_spanned: record.outcome.ticks_spanned,
        });
    }

    fn open_room(&mut self, action: &ScheduledAction, sched: &mut Scheduler) -> Result<(), Error> {
        let room = action.target.id;
        let plan = action.param.expect("room openings carry a plan index");
        if self.rooms[room].state() != RoomState::Closed {
            self.skip(action, "room is not closed");
            return Ok(());
        }
        let agenda = self.plans[room].sessions[plan].agenda.clone();
        let protocol = self.protocols[agenda.protocol_id].config.kind;
        let (issues, deadline) = (agenda.issue_ids.clone(), agenda.deadline_rounds);
        let invitees = self.rooms[room].open(agenda, sched.now())?;
        self.active_plan[room] = Some(plan);
        self.emit(Event::RoomOpened {
            room,
            plan,
            issues,
            protocol,
            deadline,
        });
        let below = action.priority.saturating_sub(1);
        if !invitees.is_empty() {
            sched.schedule(ScheduledAction::new(ActionKind::RoomInvite, action.target, sched.now(), below).with_param(plan))?;
        }
        self.room_changed(sched, room, RoomState::Closed)?;
        sched.schedule(
            ScheduledAction::new(ActionKind::NegotiationRound, action.target, sched.now() + 1, round_priority(room))
                .with_param(plan),
        )?;
        Ok(())
    }

    fn invite(&mut self, action: &ScheduledAction, sched: &mut Scheduler) -> Result<(), Error> {
        let room = action.target.id;
        if self.rooms[room].state() != RoomState::Open || self.active_plan[room] != action.param {
            self.skip(action, "room is not open");
            return Ok(());
        }
        let mut invitees = match &self.rooms[room].agenda().expect("open room has an agenda").admission {
            crate::room::Admission::Invitations(list) => list.clone(),
            crate::room::Admission::Conditions { .. } => Vec::new(),
        };
        invitees.sort_unstable();
        invitees.dedup();
        let below = action.priority.saturating_sub(1);
        for agent in invitees {
            self.emit(Event::Invited { room, agent });
            let old = self.agents[agent].state;
            if old == AgentState::Idle {
                self.agents[agent].state = AgentState::Watching;
                self.set_agent_state(sched, agent, old)?;
            }
            sched.schedule(
                ScheduledAction::new(ActionKind::AgentScan, ObjectKey::agent(agent), sched.now(), below)
                    .caused_by(action.target),
            )?;
        }
        Ok(())
    }

    /// Best admissible open room for `agent`: highest own best-utility over
    /// the agenda, lowest room id on ties.
    pub fn best_room(&self, agent: AgentId) -> Result<Option<(RoomId, f64)>, Error> {
        let a = &self.agents[agent];
        let mut best: Option<(RoomId, f64)> = None;
        for room in &self.rooms {
            if room.state() != RoomState::Open || !room.admits(a, &self.issues)? {
                continue;
            }
            let agenda = room.agenda().expect("open room has an agenda");
            let u = max_agenda_utility(a, &agenda.issue_ids, &self.issues)?;
            if best.is_none_or(|(_, bu)| u > bu) {
                best = Some((room.id, u));
            }
        }
        Ok(best)
    }

    fn scan(&mut self, action: &ScheduledAction, sched: &mut Scheduler) -> Result<(), Error> {
        let agent = action.target.id;
        let old = self.agents[agent].state;
        if !old.is_available() {
            self.skip(action, "agent is busy");
            return Ok(());
        }
        let Some((room, utility)) = self.best_room(agent)? else {
            self.skip(action, "no admissible open room");
            return Ok(());
        };
        let (rooms, agents, issues) = (&mut self.rooms, &mut self.agents, &self.issues);
        if rooms[room].enter(&mut agents[agent], issues)? {
            self.emit(Event::AgentEntered { agent, room, utility });
            self.set_agent_state(sched, agent, old)?;
        }
        Ok(())
    }

    fn negotiation_round(&mut self, action: &ScheduledAction, sched: &mut Scheduler) -> Result<(), Error> {
        let room = action.target.id;
        if self.active_plan[room] != action.param {
            self.skip(action, "session plan is no longer active");
            return Ok(());
        }
        let tick = sched.now();
        let session = self.rooms[room].history().len();
        match self.rooms[room].state() {
            RoomState::Closed => {
                self.skip(action, "room is closed");
                return Ok(());
            }
            RoomState::Open => {
                let attendees: Vec<AgentId> = self.rooms[room].attendees().collect();
                let before = self.agent_states(&attendees);
                let protocol_id = self.rooms[room].agenda().expect("open room has an agenda").protocol_id;
                let spec = self.protocols[protocol_id].clone();
                let (rooms, agents, issues) = (&mut self.rooms, &mut self.agents, &self.issues);
                let start = rooms[room].start_session(agents, issues, spec.config, |a| spec.strategy_for(a.group_id), tick)?;
                match start {
                    SessionStart::NoQuorum(record) => {
                        self.active_plan[room] = None;
                        self.record_closed(room, session, &record);
                        self.room_changed(sched, room, RoomState::Open)?;
                        self.notify_agents(sched, before)?;
                        return Ok(());
                    }
                    SessionStart::Started => {
                        self.emit(Event::SessionStarted {
                            room,
                            session,
                            participants: attendees,
                        });
                        self.room_changed(sched, room, RoomState::Open)?;
                        self.notify_agents(sched, before)?;
                    }
                }
            }
            RoomState::InSession => {}
        }

        let rounds = self.rooms[room]
            .session()
            .expect("in-session room has a session")
            .protocol()
            .rounds_per_tick;
        let blocks = self.rooms[room].advance(rounds, tick)?;
        self.emit_blocks(room, session, blocks);

        let active = self.rooms[room].session().is_some_and(|s| s.is_active());
        if active {
            sched.schedule(
                ScheduledAction::new(ActionKind::NegotiationRound, action.target, tick + 1, action.priority)
                    .with_param(action.param.expect("rounds carry a plan index")),
            )?;
        } else {
            self.close_room(room, session, sched)?;
        }
        Ok(())
    }

    fn emit_blocks(&mut self, room: RoomId, session: usize, blocks: Vec<RoundBlock>) {
        for block in blocks {
            for entry in block.events {
                self.emit(Event::Transcript {
                    room,
                    session,
                    round: block.round,
                    entry,
                });
            }
        }
    }

    fn close_room(&mut self, room: RoomId, session: usize, sched: &mut Scheduler) -> Result<(), Error> {
        let attendees: Vec<AgentId> = self.rooms[room].attendees().collect();
        let before = self.agent_states(&attendees);
        let old = self.rooms[room].state();
        let record = self.rooms[room].close(&mut self.agents, sched.now())?.clone();
        self.active_plan[room] = None;
        self.record_closed(room, session, &record);
        self.room_changed(sched, room, old)?;
        self.notify_agents(sched, before)
    }

    fn force_close(&mut self, action: &ScheduledAction, sched: &mut Scheduler) -> Result<(), Error> {
        let room = action.target.id;
        if self.rooms[room].state() == RoomState::Closed || self.active_plan[room] != action.param {
            self.skip(action, "session already finished");
            return Ok(());
        }
        let session = self.rooms[room].history().len();
        self.close_room(room, session, sched)
    }

    fn report(&mut self) {
        let open_rooms = self.rooms.iter().filter(|r| r.state() == RoomState::Open).count();
        let active_sessions = self.rooms.iter().filter(|r| r.state() == RoomState::InSession).count();
        let records = self.rooms.iter().flat_map(|r| r.history());
        let (completed_sessions, agreements) = records.fold((0, 0), |(n, a), rec| {
            (n + 1, a + usize::from(rec.outcome.agreed_issue.is_some()))
        });
        self.emit(Event::Report {
            open_rooms,
            active_sessions,
            completed_sessions,
            agreements,
        });
    }
}

impl Observable for World {
    fn objects(&self, kind: ObjectKind) -> Vec<ObjectKey> {
        let mut keys = self.context.query(|k| k.kind == kind);
        keys.sort();
        keys
    }

    fn state_label(&self, key: ObjectKey) -> Option<StateLabel> {
        match key.kind {
            ObjectKind::Agent => self.agents.get(key.id).map(|a| agent_label(a.state)),
            ObjectKind::MeetingRoom => self.rooms.get(key.id).map(|r| r.state().label()),
        }
    }

    fn group_of(&self, agent: usize) -> Option<usize> {
        self.agents.get(agent).map(|a| a.group_id)
    }

    fn admissible(&self, agent: usize, room: usize) -> bool {
        match (self.agents.get(agent), self.rooms.get(room)) {
            (Some(a), Some(r)) => r.check_admission(a, &self.issues).unwrap_or(false),
            _ => false,
        }
    }
}

impl ActionHandler for World {
    type Error = Error;

    fn execute(&mut self, action: &ScheduledAction, sched: &mut Scheduler) -> Result<(), Error> {
        self.cursor = (sched.now(), action.priority);
        match action.kind {
            ActionKind::RoomOpen => self.open_room(action, sched),
            ActionKind::RoomInvite => self.invite(action, sched),
            ActionKind::AgentScan => self.scan(action, sched),
            ActionKind::NegotiationRound => self.negotiation_round(action, sched),
            ActionKind::RoomClose => self.force_close(action, sched),
            ActionKind::Report => {
                self.report();
                Ok(())
            }
        }
    }
}

/// One summary row per completed session.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub room_id: RoomId,
    pub session: usize,
    pub status: String,
    pub issue_id: Option<IssueId>,
    pub rounds: u32,
    pub welfare: f64,
    pub min_utility: f64,
    pub nash_product: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub seed: u64,
    pub events: Vec<EventRecord>,
    pub summary: Vec<SummaryRow>,
    /// Agents as sampled at the start of the run.
    pub population: Vec<Agent>,
}

/// A single replication: one world and its scheduler.
#[derive(Debug, Clone)]
pub struct Simulation {
    seed: u64,
    world: World,
    scheduler: Scheduler,
    population: Vec<Agent>,
}

impl Simulation {
    /// Samples the population and schedules every planned room opening.
    /// Groups are sampled in declaration order, agents in id order.
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, Error> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agents = Vec::with_capacity(scenario.agent_count());
        for group in &scenario.groups {
            let next = agents.len();
            agents.extend(group.spawn_members(&mut rng, next));
        }
        let context = scenario.build_context()?;
        let rooms = scenario
            .rooms
            .iter()
            .map(|r| MeetingRoom::new(r.id, scenario.theta_in))
            .collect();

        let mut scheduler = Scheduler::new();
        for rule in &scenario.watchers {
            scheduler.register_watcher(rule.clone())?;
        }
        for plan in &scenario.rooms {
            let key = ObjectKey::room(plan.id);
            for (index, session) in plan.sessions.iter().enumerate() {
                scheduler.schedule(
                    ScheduledAction::new(ActionKind::RoomOpen, key, session.open_at, PRIORITY_OPEN).with_param(index),
                )?;
                if let Some(close_at) = session.close_at {
                    scheduler.schedule(
                        ScheduledAction::new(ActionKind::RoomClose, key, close_at, PRIORITY_CLOSE).with_param(index),
                    )?;
                }
            }
        }
        scheduler.schedule(ScheduledAction::new(
            ActionKind::Report,
            ObjectKey::room(0),
            scenario.ticks,
            PRIORITY_REPORT,
        ))?;
        scheduler.stop(Some(scenario.ticks));

        Ok(Self {
            seed,
            population: agents.clone(),
            world: World {
                issues: scenario.issues.clone(),
                agents,
                rooms,
                context,
                plans: scenario.rooms.clone(),
                protocols: scenario.protocols.clone(),
                active_plan: vec![None; scenario.rooms.len()],
                log: Vec::new(),
                cursor: (0, 0),
            },
            scheduler,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn scheduler(&self) -> &Scheduler {
        &self.scheduler
    }

    pub fn scheduler_mut(&mut self) -> &mut Scheduler {
        &mut self.scheduler
    }

    pub fn is_finished(&self) -> bool {
        self.scheduler.status() == RunStatus::Stopped
    }

    pub fn step(&mut self) -> Result<TickReport, Error> {
        self.scheduler.step(&mut self.world)
    }

    /// Runs to the scenario's final tick.
    pub fn run(mut self) -> Result<RunArtifacts, Error> {
        while self.scheduler.status() == RunStatus::Running {
            self.step()?;
        }
        if self.scheduler.status() == RunStatus::Paused {
            return Err(ScheduleError::Paused.into());
        }
        Ok(self.into_artifacts())
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for room in &self.world.rooms {
            for (session, record) in room.history().iter().enumerate() {
                let m = metrics(&record.outcome);
                rows.push(SummaryRow {
                    room_id: room.id,
                    session,
                    status: record.outcome.status.label().to_string(),
                    issue_id: record.outcome.agreed_issue,
                    rounds: record.outcome.rounds_used,
                    welfare: m.social_welfare,
                    min_utility: m.min_utility,
                    nash_product: m.nash_product,
                });
            }
        }
        rows
    }

    pub fn into_artifacts(self) -> RunArtifacts {
        RunArtifacts {
            seed: self.seed,
            summary: self.summary(),
            events: self.world.log,
            population: self.population,
        }
    }
}

/// Runs `replications` independent simulations seeded `base_seed + r`.
pub fn run_replications(scenario: &Scenario, base_seed: u64, replications: usize) -> Result<Vec<RunArtifacts>, Error> {
    (0..replications as u64)
        .map(|r| Simulation::new(scenario, base_seed.wrapping_add(r))?.run())
        .collect()
}
