//! Multilateral negotiation protocols and agent strategies.
//!
//! A [`NegotiationSession`] runs one protocol over a fixed agenda of discrete
//! issues. Participant utilities are precomputed per agenda issue, so a
//! session is a pure state machine over `(utilities, strategies, protocol)`.
//!
//! All tie-breaks resolve to the lowest issue id and participants always act
//! in ascending agent id order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Agent, AgentId, Issue, IssueId, ModelError, RoomId};
use crate::schedule::Tick;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("round {round} is outside 1..={max}")]
    RoundOutOfRange { round: u32, max: u32 },
    #[error("session is not active")]
    NotActive,
    #[error("session has not terminated")]
    NotTerminated,
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    /// Concedes from the best to the worst agenda utility over the deadline;
    /// `beta < 1` concedes late, `beta > 1` early.
    TimeDependent { beta: f64 },
    /// Moves toward the issues other participants proposed last round.
    TradeOff,
    /// Always bids the best surviving issue.
    TopBid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySource {
    /// Loaded from the scenario file.
    #[default]
    Static,
    /// Built-in default.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    #[serde(flatten)]
    pub kind: StrategyKind,
    #[serde(default)]
    pub source: StrategySource,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::TimeDependent { beta: 1.0 },
            source: StrategySource::Fixed,
        }
    }
}

impl StrategyConfig {
    pub fn time_dependent(beta: f64) -> Self {
        Self {
            kind: StrategyKind::TimeDependent { beta },
            source: StrategySource::Static,
        }
    }

    pub fn trade_off() -> Self {
        Self {
            kind: StrategyKind::TradeOff,
            source: StrategySource::Static,
        }
    }

    pub fn top_bid() -> Self {
        Self {
            kind: StrategyKind::TopBid,
            source: StrategySource::Static,
        }
    }

    /// Concession exponent; strategies without one concede linearly.
    pub fn beta(&self) -> f64 {
        match self.kind {
            StrategyKind::TimeDependent { beta } => beta,
            _ => 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match self.kind {
            StrategyKind::TimeDependent { beta } if !(beta > 0.0 && beta.is_finite()) => Err(
                ProtocolError::InvalidConfig(format!("beta must be > 0, got {beta}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    MediatedSingleText,
    MonotonicConcession,
    EliminationBidding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub max_rounds: u32,
    #[serde(default = "one")]
    pub rounds_per_tick: u32,
}

fn one() -> u32 {
    1
}

impl ProtocolConfig {
    pub fn new(kind: ProtocolKind, max_rounds: u32) -> Self {
        Self {
            kind,
            max_rounds,
            rounds_per_tick: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.max_rounds == 0 {
            return Err(ProtocolError::InvalidConfig("max_rounds must be >= 1".into()));
        }
        if self.rounds_per_tick == 0 {
            return Err(ProtocolError::InvalidConfig("rounds_per_tick must be >= 1".into()));
        }
        Ok(())
    }
}

/// Minimum acceptable utility at round `t` of `deadline`:
/// `u_max - (u_max - u_min) * ((t - 1) / (deadline - 1))^(1 / beta)`.
///
/// The endpoints are returned exactly: `u_max` at `t = 1`, `u_min` at
/// `t = deadline` (which wins when `deadline = 1`).
pub fn concession_threshold(
    u_max: f64,
    u_min: f64,
    t: u32,
    deadline: u32,
    beta: f64,
) -> Result<f64, ProtocolError> {
    if t < 1 || t > deadline {
        return Err(ProtocolError::RoundOutOfRange { round: t, max: deadline });
    }
    if t == deadline {
        return Ok(u_min);
    }
    if t == 1 {
        return Ok(u_max);
    }
    let progress = f64::from(t - 1) / f64::from(deadline - 1);
    Ok(u_max - (u_max - u_min) * progress.powf(1.0 / beta))
}

/// Agenda positions whose utility reaches `threshold`, ascending.
pub fn acceptable_set(utilities: &[f64], threshold: f64) -> Vec<usize> {
    utilities
        .iter()
        .enumerate()
        .filter(|(_, &u)| u >= threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Index of the largest value among `candidates`, first one on ties.
fn argmax_by(candidates: impl IntoIterator<Item = usize>, value: impl Fn(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in candidates {
        let v = value(c);
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((c, v));
        }
    }
    best.map(|(c, _)| c)
}

/// Strategy-driven proposal over agenda positions.
///
/// `acceptable` is the proposer's acceptable set, `others_last_round` the
/// positions other participants proposed in the previous round (empty in
/// round 1), and `eliminated` marks positions no longer available.
pub fn choose_offer(
    strategy: &StrategyConfig,
    utilities: &[f64],
    acceptable: &[usize],
    others_last_round: &[usize],
    eliminated: &[bool],
) -> usize {
    let alive = |i: &usize| !eliminated.get(*i).copied().unwrap_or(false);
    let own_best = || {
        argmax_by((0..utilities.len()).filter(alive), |i| utilities[i]).unwrap_or(0)
    };
    match strategy.kind {
        StrategyKind::TopBid => own_best(),
        StrategyKind::TimeDependent { .. } => {
            argmax_by(acceptable.iter().copied().filter(alive), |i| utilities[i])
                .unwrap_or_else(own_best)
        }
        StrategyKind::TradeOff => {
            if others_last_round.is_empty() {
                return own_best();
            }
            let count = |i: usize| others_last_round.iter().filter(|&&p| p == i).count();
            let mut best: Option<usize> = None;
            for i in acceptable.iter().copied().filter(alive) {
                best = match best {
                    None => Some(i),
                    Some(b) => {
                        let better = count(i) > count(b)
                            || (count(i) == count(b) && utilities[i] > utilities[b]);
                        Some(if better { i } else { b })
                    }
                };
            }
            best.unwrap_or_else(own_best)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "by", content = "agent")]
pub enum Proposer {
    Agent(AgentId),
    Mediator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offer {
    pub proposer: Proposer,
    pub issue_id: IssueId,
    pub round: u32,
    pub tick: Tick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Offer(Offer),
    Response { agent: AgentId, issue_id: IssueId, accept: bool },
    AcceptableSet { agent: AgentId, issue_ids: Vec<IssueId> },
    Bid { agent: AgentId, issue_id: IssueId },
    Eliminated { issue_id: IssueId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundBlock {
    pub round: u32,
    pub tick: Tick,
    pub events: Vec<TranscriptEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    NoAgreement,
    NoQuorum,
    Interrupted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum SessionStatus {
    Active,
    Agreed(IssueId),
    Failed(FailureReason),
}

impl SessionStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SessionStatus::Active => "active",
            SessionStatus::Agreed(_) => "agreed",
            SessionStatus::Failed(FailureReason::NoAgreement) => "no_agreement",
            SessionStatus::Failed(FailureReason::NoQuorum) => "no_quorum",
            SessionStatus::Failed(FailureReason::Interrupted) => "interrupted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub agent: AgentId,
    /// Utility of each agenda issue, aligned with the session agenda.
    pub utilities: Vec<f64>,
    pub strategy: StrategyConfig,
}

impl Participant {
    pub fn new(agent: AgentId, utilities: Vec<f64>, strategy: StrategyConfig) -> Self {
        Self {
            agent,
            utilities,
            strategy,
        }
    }

    pub fn from_agent(agent: &Agent, agenda: &[&Issue], strategy: StrategyConfig) -> Result<Self, ModelError> {
        Ok(Self::new(agent.id, agent.utilities(agenda.iter().copied())?, strategy))
    }

    pub fn u_max(&self) -> f64 {
        self.utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn u_min(&self) -> f64 {
        self.utilities.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn threshold(&self, t: u32, deadline: u32) -> Result<f64, ProtocolError> {
        concession_threshold(self.u_max(), self.u_min(), t, deadline, self.strategy.beta())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationOutcome {
    pub status: SessionStatus,
    pub agreed_issue: Option<IssueId>,
    pub rounds_used: u32,
    pub participants: Vec<AgentId>,
    /// Utility of the agreed issue per participant; zero on disagreement.
    pub utilities: Vec<f64>,
    pub ticks_spanned: u64,
}

impl NegotiationOutcome {
    /// Outcome of a session that never started.
    pub fn without_session(reason: FailureReason, participants: Vec<AgentId>) -> Self {
        let utilities = vec![0.0; participants.len()];
        Self {
            status: SessionStatus::Failed(reason),
            agreed_issue: None,
            rounds_used: 0,
            participants,
            utilities,
            ticks_spanned: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationSession {
    room_id: RoomId,
    agenda: Vec<IssueId>,
    participants: Vec<Participant>,
    protocol: ProtocolConfig,
    deadline: u32,
    round: u32,
    transcript: Vec<RoundBlock>,
    status: SessionStatus,
    /// Rejected candidates (single-text) or eliminated issues (bidding).
    struck: Vec<bool>,
    started_at: Tick,
    last_tick: Option<Tick>,
}

impl NegotiationSession {
    /// `agenda` must be sorted ascending and every participant must carry
    /// one utility per agenda issue. Participants are sorted by agent id.
    pub fn new(
        room_id: RoomId,
        agenda: Vec<IssueId>,
        mut participants: Vec<Participant>,
        protocol: ProtocolConfig,
        deadline: u32,
        started_at: Tick,
    ) -> Result<Self, ProtocolError> {
        protocol.validate()?;
        if deadline == 0 {
            return Err(ProtocolError::InvalidConfig("deadline must be >= 1 round".into()));
        }
        if agenda.is_empty() {
            return Err(ProtocolError::InvalidConfig("agenda is empty".into()));
        }
        if agenda.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProtocolError::InvalidConfig("agenda must be strictly ascending".into()));
        }
        for p in &participants {
            p.strategy.validate()?;
            if p.utilities.len() != agenda.len() {
                return Err(ModelError::DimensionMismatch {
                    expected: agenda.len(),
                    actual: p.utilities.len(),
                }
                .into());
            }
        }
        participants.sort_by_key(|p| p.agent);
        let struck = vec![false; agenda.len()];
        Ok(Self {
            room_id,
            agenda,
            participants,
            protocol,
            deadline,
            round: 0,
            transcript: Vec::new(),
            status: SessionStatus::Active,
            struck,
            started_at,
            last_tick: None,
        })
    }

    pub fn room_id(&self) -> RoomId {
        self.room_id
    }

    pub fn agenda(&self) -> &[IssueId] {
        &self.agenda
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn protocol(&self) -> ProtocolConfig {
        self.protocol
    }

    pub fn deadline(&self) -> u32 {
        self.deadline
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    pub fn transcript(&self) -> &[RoundBlock] {
        &self.transcript
    }

    fn welfare(&self, pos: usize) -> f64 {
        self.participants.iter().map(|p| p.utilities[pos]).sum()
    }

    fn agree(&mut self, pos: usize) {
        self.status = SessionStatus::Agreed(self.agenda[pos]);
    }

    /// Proposal of participant `index` for the upcoming round.
    pub fn propose(&self, index: usize, tick: Tick) -> Result<Offer, ProtocolError> {
        if !self.is_active() {
            return Err(ProtocolError::NotActive);
        }
        let t = self.round + 1;
        let p = &self.participants[index];
        let threshold = p.threshold(t, self.deadline)?;
        let acceptable = acceptable_set(&p.utilities, threshold);
        let others: Vec<usize> = self
            .transcript
            .last()
            .map(|block| {
                block
                    .events
                    .iter()
                    .filter_map(|e| match e {
                        TranscriptEvent::Offer(Offer {
                            proposer: Proposer::Agent(a),
                            issue_id,
                            ..
                        }) if *a != p.agent => self.agenda.binary_search(issue_id).ok(),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        let pos = choose_offer(&p.strategy, &p.utilities, &acceptable, &others, &self.struck);
        Ok(Offer {
            proposer: Proposer::Agent(p.agent),
            issue_id: self.agenda[pos],
            round: t,
            tick,
        })
    }

    /// Advances the session by one protocol round.
    pub fn run_round(&mut self, tick: Tick) -> Result<&RoundBlock, ProtocolError> {
        if !self.is_active() {
            return Err(ProtocolError::NotActive);
        }
        let t = self.round + 1;
        if t > self.deadline {
            return Err(ProtocolError::RoundOutOfRange { round: t, max: self.deadline });
        }
        let events = match self.protocol.kind {
            ProtocolKind::MediatedSingleText => self.mediated_round(t, tick)?,
            ProtocolKind::MonotonicConcession => self.concession_round(t, tick)?,
            ProtocolKind::EliminationBidding => self.bidding_round(t),
        };
        self.round = t;
        self.last_tick = Some(tick);
        self.transcript.push(RoundBlock { round: t, tick, events });
        Ok(self.transcript.last().expect("block just pushed"))
    }

    fn mediated_round(&mut self, t: u32, tick: Tick) -> Result<Vec<TranscriptEvent>, ProtocolError> {
        let open: Vec<usize> = (0..self.agenda.len()).filter(|&i| !self.struck[i]).collect();
        let Some(candidate) = argmax_by(open, |i| self.welfare(i)) else {
            self.status = SessionStatus::Failed(FailureReason::NoAgreement);
            return Ok(Vec::new());
        };
        let issue_id = self.agenda[candidate];
        let mut events = vec![TranscriptEvent::Offer(Offer {
            proposer: Proposer::Mediator,
            issue_id,
            round: t,
            tick,
        })];
        let mut unanimous = true;
        for p in &self.participants {
            let accept = p.utilities[candidate] >= p.threshold(t, self.deadline)?;
            unanimous &= accept;
            events.push(TranscriptEvent::Response {
                agent: p.agent,
                issue_id,
                accept,
            });
        }
        if unanimous {
            self.agree(candidate);
        } else {
            self.struck[candidate] = true;
            if t == self.deadline || self.struck.iter().all(|&s| s) {
                self.status = SessionStatus::Failed(FailureReason::NoAgreement);
            }
        }
        Ok(events)
    }

    fn concession_round(&mut self, t: u32, tick: Tick) -> Result<Vec<TranscriptEvent>, ProtocolError> {
        let mut events = Vec::with_capacity(self.participants.len() * 2);
        let mut in_all = vec![true; self.agenda.len()];
        let mut offers = Vec::with_capacity(self.participants.len());
        for index in 0..self.participants.len() {
            offers.push(self.propose(index, tick)?);
        }
        for (p, offer) in self.participants.iter().zip(offers) {
            let acceptable = acceptable_set(&p.utilities, p.threshold(t, self.deadline)?);
            for (i, flag) in in_all.iter_mut().enumerate() {
                *flag &= acceptable.binary_search(&i).is_ok();
            }
            events.push(TranscriptEvent::Offer(offer));
            events.push(TranscriptEvent::AcceptableSet {
                agent: p.agent,
                issue_ids: acceptable.iter().map(|&i| self.agenda[i]).collect(),
            });
        }
        let common = (0..self.agenda.len()).filter(|&i| in_all[i]);
        match argmax_by(common, |i| self.welfare(i)) {
            Some(pos) => self.agree(pos),
            None if t == self.deadline => {
                self.status = SessionStatus::Failed(FailureReason::NoAgreement)
            }
            None => {}
        }
        Ok(events)
    }

    fn bidding_round(&mut self, t: u32) -> Vec<TranscriptEvent> {
        let mut events = Vec::with_capacity(self.participants.len() + 1);
        let mut votes = vec![0usize; self.agenda.len()];
        for p in &self.participants {
            let bid = choose_offer(&StrategyConfig::top_bid(), &p.utilities, &[], &[], &self.struck);
            votes[bid] += 1;
            events.push(TranscriptEvent::Bid {
                agent: p.agent,
                issue_id: self.agenda[bid],
            });
        }
        let alive: Vec<usize> = (0..self.agenda.len()).filter(|&i| !self.struck[i]).collect();
        if let Some(&pos) = alive.iter().find(|&&i| votes[i] == self.participants.len()) {
            self.agree(pos);
            return events;
        }
        if t == self.deadline {
            // Plurality decides at the deadline.
            let pos = argmax_by(alive.iter().copied(), |i| votes[i] as f64).expect("an issue survives");
            self.agree(pos);
            return events;
        }
        let loser = alive
            .iter()
            .copied()
            .min_by_key(|&i| (votes[i], i))
            .expect("an issue survives");
        self.struck[loser] = true;
        events.push(TranscriptEvent::Eliminated {
            issue_id: self.agenda[loser],
        });
        let survivors: Vec<usize> = (0..self.agenda.len()).filter(|&i| !self.struck[i]).collect();
        if let [only] = survivors[..] {
            self.agree(only);
        }
        events
    }

    /// Ends an active session early, e.g. when its room is force-closed.
    pub fn interrupt(&mut self) {
        if self.is_active() {
            self.status = SessionStatus::Failed(FailureReason::Interrupted);
        }
    }

    pub fn outcome(&self) -> Result<NegotiationOutcome, ProtocolError> {
        let agreed = match self.status {
            SessionStatus::Active => return Err(ProtocolError::NotTerminated),
            SessionStatus::Agreed(issue) => Some(issue),
            SessionStatus::Failed(_) => None,
        };
        let utilities = match agreed {
            Some(issue) => {
                let pos = self.agenda.binary_search(&issue).expect("agreed issue is on the agenda");
                self.participants.iter().map(|p| p.utilities[pos]).collect()
            }
            None => vec![0.0; self.participants.len()],
        };
        Ok(NegotiationOutcome {
            status: self.status,
            agreed_issue: agreed,
            rounds_used: self.round,
            participants: self.participants.iter().map(|p| p.agent).collect(),
            utilities,
            ticks_spanned: self.last_tick.map_or(0, |last| last.saturating_sub(self.started_at) + 1),
        })
    }
}
