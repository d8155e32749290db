//! Meeting rooms: opening with an agenda, admission, sessions and history.
//!
//! A room cycles `Closed -> Open -> InSession -> Closed`, or `Open -> Closed`
//! when it is shut before a session starts. Each completed opening appends a
//! [`SessionRecord`] to the room's history, which survives reopening.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Agent, AgentId, AgentState, GroupId, Issue, IssueId, ModelError, RoomId};
use crate::protocol::{
    FailureReason, NegotiationOutcome, NegotiationSession, Participant, ProtocolConfig, ProtocolError,
    RoundBlock, StrategyConfig,
};
use crate::schedule::{StateLabel, Tick};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoomError {
    #[error("room {room}: cannot {action} while {from:?}")]
    InvalidTransition {
        room: RoomId,
        from: RoomState,
        action: &'static str,
    },
    #[error("room {0} is not open")]
    RoomClosed(RoomId),
    #[error("agent {agent} is not admitted to room {room}")]
    AdmissionDenied { agent: AgentId, room: RoomId },
    #[error("agent {agent} is busy in room {room}")]
    Busy { agent: AgentId, room: RoomId },
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("unknown issue {0}")]
    UnknownIssue(IssueId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoomState {
    Closed,
    Open,
    InSession,
}

impl RoomState {
    pub fn label(self) -> StateLabel {
        match self {
            RoomState::Closed => StateLabel::Closed,
            RoomState::Open => StateLabel::Open,
            RoomState::InSession => StateLabel::InSession,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    /// Agents from `groups` (any group when absent) whose best utility over
    /// the agenda reaches `theta_in`.
    Conditions {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        groups: Option<Vec<GroupId>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta_in: Option<f64>,
    },
    Invitations(Vec<AgentId>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agenda {
    /// Strictly ascending, non-empty.
    pub issue_ids: Vec<IssueId>,
    pub admission: Admission,
    pub protocol_id: usize,
    pub deadline_rounds: u32,
}

impl Agenda {
    /// Interest threshold of a conditions agenda; `default` fills an unset
    /// value.
    pub fn theta_in(&self, default: f64) -> f64 {
        match self.admission {
            Admission::Conditions { theta_in, .. } => theta_in.unwrap_or(default),
            Admission::Invitations(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub opened_at: Tick,
    pub closed_at: Tick,
    pub agenda: Agenda,
    pub attendees: Vec<AgentId>,
    pub outcome: NegotiationOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionStart {
    Started,
    /// Fewer than two attendees; the room closed with this record.
    NoQuorum(Box<SessionRecord>),
}

/// Best utility `agent` draws from any issue in `issue_ids`.
pub fn max_agenda_utility(agent: &Agent, issue_ids: &[IssueId], issues: &[Issue]) -> Result<f64, RoomError> {
    let mut best = f64::NEG_INFINITY;
    for &id in issue_ids {
        let issue = issues.get(id).ok_or(RoomError::UnknownIssue(id))?;
        best = best.max(agent.evaluate(issue)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeetingRoom {
    pub id: RoomId,
    state: RoomState,
    agenda: Option<Agenda>,
    attendees: BTreeSet<AgentId>,
    history: Vec<SessionRecord>,
    opened_at: Option<Tick>,
    session: Option<NegotiationSession>,
    default_theta_in: f64,
}

impl MeetingRoom {
    /// `default_theta_in` applies to conditions agendas without their own
    /// threshold.
    pub fn new(id: RoomId, default_theta_in: f64) -> Self {
        Self {
            id,
            state: RoomState::Closed,
            agenda: None,
            attendees: BTreeSet::new(),
            history: Vec::new(),
            opened_at: None,
            session: None,
            default_theta_in,
        }
    }

    pub fn state(&self) -> RoomState {
        self.state
    }

    pub fn agenda(&self) -> Option<&Agenda> {
        self.agenda.as_ref()
    }

    pub fn attendees(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.attendees.iter().copied()
    }

    pub fn attendee_count(&self) -> usize {
        self.attendees.len()
    }

    pub fn history(&self) -> &[SessionRecord] {
        &self.history
    }

    pub fn session(&self) -> Option<&NegotiationSession> {
        self.session.as_ref()
    }

    fn invalid(&self, action: &'static str) -> RoomError {
        RoomError::InvalidTransition {
            room: self.id,
            from: self.state,
            action,
        }
    }

    /// Installs `agenda` and opens the room. Returns the agents to invite,
    /// ascending; empty for conditions agendas.
    pub fn open(&mut self, agenda: Agenda, tick: Tick) -> Result<Vec<AgentId>, RoomError> {
        if self.state != RoomState::Closed {
            return Err(self.invalid("open"));
        }
        let invitees = match &agenda.admission {
            Admission::Invitations(list) => {
                let set: BTreeSet<AgentId> = list.iter().copied().collect();
                set.into_iter().collect()
            }
            Admission::Conditions { .. } => Vec::new(),
        };
        self.agenda = Some(agenda);
        self.state = RoomState::Open;
        self.opened_at = Some(tick);
        Ok(invitees)
    }

    /// Admission policy of the installed agenda, regardless of room state.
    pub fn admits(&self, agent: &Agent, issues: &[Issue]) -> Result<bool, RoomError> {
        let Some(agenda) = &self.agenda else {
            return Ok(false);
        };
        match &agenda.admission {
            Admission::Invitations(list) => Ok(list.contains(&agent.id)),
            Admission::Conditions { groups, .. } => {
                if groups.as_ref().is_some_and(|g| !g.contains(&agent.group_id)) {
                    return Ok(false);
                }
                let best = max_agenda_utility(agent, &agenda.issue_ids, issues)?;
                Ok(best >= agenda.theta_in(self.default_theta_in))
            }
        }
    }

    pub fn check_admission(&self, agent: &Agent, issues: &[Issue]) -> Result<bool, RoomError> {
        if self.state != RoomState::Open {
            return Err(RoomError::RoomClosed(self.id));
        }
        self.admits(agent, issues)
    }

    /// Adds `agent` as an attendee. Returns `false` when it was already
    /// attending.
    pub fn enter(&mut self, agent: &mut Agent, issues: &[Issue]) -> Result<bool, RoomError> {
        if self.state != RoomState::Open {
            return Err(RoomError::RoomClosed(self.id));
        }
        match agent.state {
            AgentState::InRoom(room) if room == self.id => return Ok(false),
            AgentState::InRoom(room) | AgentState::Negotiating(room) => {
                return Err(RoomError::Busy { agent: agent.id, room })
            }
            AgentState::Idle | AgentState::Watching => {}
        }
        if !self.admits(agent, issues)? {
            return Err(RoomError::AdmissionDenied {
                agent: agent.id,
                room: self.id,
            });
        }
        self.attendees.insert(agent.id);
        agent.state = AgentState::InRoom(self.id);
        Ok(true)
    }

    /// Starts negotiating over the attendees, or closes the room with a
    /// no-quorum record when fewer than two are present.
    pub fn start_session(
        &mut self,
        agents: &mut [Agent],
        issues: &[Issue],
        protocol: ProtocolConfig,
        strategy_for: impl Fn(&Agent) -> StrategyConfig,
        tick: Tick,
    ) -> Result<SessionStart, RoomError> {
        if self.state != RoomState::Open {
            return Err(self.invalid("start a session"));
        }
        let attendees: Vec<AgentId> = self.attendees.iter().copied().collect();
        if attendees.len() < 2 {
            let outcome = NegotiationOutcome::without_session(FailureReason::NoQuorum, attendees);
            let record = self.finish(agents, outcome, tick)?.clone();
            return Ok(SessionStart::NoQuorum(Box::new(record)));
        }
        let agenda = self.agenda.clone().expect("open room has an agenda");
        let agenda_issues = agenda
            .issue_ids
            .iter()
            .map(|&id| issues.get(id).ok_or(RoomError::UnknownIssue(id)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut participants = Vec::with_capacity(attendees.len());
        for &id in &attendees {
            let agent = agents.get(id).ok_or(RoomError::UnknownAgent(id))?;
            participants.push(Participant::from_agent(agent, &agenda_issues, strategy_for(agent))?);
        }
        let session = NegotiationSession::new(
            self.id,
            agenda.issue_ids.clone(),
            participants,
            protocol,
            agenda.deadline_rounds,
            tick,
        )?;
        for &id in &attendees {
            agents[id].state = AgentState::Negotiating(self.id);
        }
        self.session = Some(session);
        self.state = RoomState::InSession;
        Ok(SessionStart::Started)
    }

    /// Runs up to `rounds` protocol rounds, stopping early on termination.
    pub fn advance(&mut self, rounds: u32, tick: Tick) -> Result<Vec<RoundBlock>, RoomError> {
        if self.state != RoomState::InSession {
            return Err(self.invalid("advance a session"));
        }
        let session = self.session.as_mut().expect("in-session room has a session");
        let mut blocks = Vec::new();
        for _ in 0..rounds {
            if !session.is_active() {
                break;
            }
            blocks.push(session.run_round(tick)?.clone());
        }
        Ok(blocks)
    }

    /// Closes the room, recording the session outcome. An active session is
    /// interrupted; a room closed before its session started records an
    /// interrupted outcome.
    pub fn close(&mut self, agents: &mut [Agent], tick: Tick) -> Result<&SessionRecord, RoomError> {
        let outcome = match (self.state, self.session.as_mut()) {
            (RoomState::Closed, _) => return Err(self.invalid("close")),
            (_, Some(session)) => {
                session.interrupt();
                session.outcome()?
            }
            (_, None) => NegotiationOutcome::without_session(
                FailureReason::Interrupted,
                self.attendees.iter().copied().collect(),
            ),
        };
        self.finish(agents, outcome, tick)
    }

    fn finish(
        &mut self,
        agents: &mut [Agent],
        outcome: NegotiationOutcome,
        tick: Tick,
    ) -> Result<&SessionRecord, RoomError> {
        let attendees: Vec<AgentId> = std::mem::take(&mut self.attendees).into_iter().collect();
        for &id in &attendees {
            let agent = agents.get_mut(id).ok_or(RoomError::UnknownAgent(id))?;
            agent.state = AgentState::Idle;
        }
        let record = SessionRecord {
            opened_at: self.opened_at.take().unwrap_or(tick),
            closed_at: tick,
            agenda: self.agenda.take().expect("non-closed room has an agenda"),
            attendees,
            outcome,
        };
        self.session = None;
        self.state = RoomState::Closed;
        self.history.push(record);
        Ok(self.history.last().expect("record just pushed"))
    }
}
