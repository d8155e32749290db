//! Scenario documents: parsing, validation and canonical serialization.
//!
//! A scenario is one JSON document with the top-level keys `version`, `seed`,
//! `ticks`, `criteria`, `issues`, `groups`, `social_edges`, `rooms`,
//! `watchers`, `protocols` and `theta_in`. [`load_scenario`] checks every
//! cross-reference and reports the first offending path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{Context, ContextError, EdgeLabel, ObjectKey, ObjectKind};
use crate::model::{
    AgentGroup, AgentId, Criterion, Direction, Distribution, GroupId, Issue, IssueId, ModelError,
    PreferenceBounds,
};
use crate::protocol::{ProtocolConfig, ProtocolKind, StrategyConfig};
use crate::room::{Admission, Agenda};
use crate::schedule::{
    ActionKind, Offset, Query, Reaction, StateLabel, Tick, Trigger, WatcherRule,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Upper bound on rooms; each room owns a priority band for its rounds.
pub const MAX_ROOMS: usize = 10_000;

/// Name of the agent network attached to every scenario context.
pub const NETWORK: &str = "network";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
}

fn invalid<T>(path: impl Into<String>, message: impl fmt::Display) -> Result<T, ValidationError> {
    Err(ValidationError {
        path: path.into(),
        message: message.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionDoc {
    pub id: usize,
    pub name: String,
    #[serde(default = "benefit")]
    pub direction: Direction,
}

fn benefit() -> Direction {
    Direction::Benefit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssueDoc {
    pub id: usize,
    pub name: String,
    /// Raw per-criterion scores in `[0, 1]`, before cost flipping.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDoc {
    pub id: usize,
    pub name: String,
    pub bounds: Vec<[f64; 2]>,
    #[serde(default = "uniform")]
    pub distribution: Distribution,
    pub members: usize,
}

fn uniform() -> Distribution {
    Distribution::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupStrategyDoc {
    pub group: GroupId,
    pub strategy: StrategyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDoc {
    pub id: usize,
    pub kind: ProtocolKind,
    pub max_rounds: u32,
    #[serde(default = "one")]
    pub rounds_per_tick: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_strategies: Vec<GroupStrategyDoc>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgendaDoc {
    pub issues: Vec<IssueId>,
    pub admission: Admission,
    pub protocol: usize,
    /// Defaults to the protocol's `max_rounds`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_rounds: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionPlanDoc {
    pub open_at: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub close_at: Option<Tick>,
    pub agenda: AgendaDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomDoc {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub sessions: Vec<SessionPlanDoc>,
}

/// Raw scenario document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: u32,
    pub seed: u64,
    pub ticks: Tick,
    #[serde(default)]
    pub theta_in: f64,
    pub criteria: Vec<CriterionDoc>,
    pub issues: Vec<IssueDoc>,
    pub groups: Vec<GroupDoc>,
    #[serde(default)]
    pub social_edges: Vec<[AgentId; 2]>,
    pub rooms: Vec<RoomDoc>,
    #[serde(default = "default_watchers")]
    pub watchers: Vec<WatcherRule>,
    pub protocols: Vec<ProtocolDoc>,
}

/// Available agents scan for rooms as soon as a room they qualify for opens.
pub fn default_watchers() -> Vec<WatcherRule> {
    vec![WatcherRule {
        watcher: Query::kind(ObjectKind::Agent),
        watchee: Query::kind(ObjectKind::MeetingRoom).in_state(StateLabel::Open),
        trigger: Trigger::All(vec![Trigger::WatcherAvailable, Trigger::Admissible]),
        reaction: Reaction {
            action: ActionKind::AgentScan,
            offset: Offset::SameTick,
            priority: 0,
        },
    }]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub id: usize,
    pub config: ProtocolConfig,
    pub default_strategy: StrategyConfig,
    pub group_strategies: BTreeMap<GroupId, StrategyConfig>,
}

impl ProtocolSpec {
    pub fn strategy_for(&self, group: GroupId) -> StrategyConfig {
        self.group_strategies
            .get(&group)
            .copied()
            .unwrap_or(self.default_strategy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionPlan {
    pub open_at: Tick,
    pub close_at: Option<Tick>,
    pub agenda: Agenda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomPlan {
    pub id: usize,
    pub name: String,
    pub sessions: Vec<SessionPlan>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    doc: ScenarioDoc,
    pub seed: u64,
    pub ticks: Tick,
    pub theta_in: f64,
    pub criteria: Vec<Criterion>,
    pub issues: Vec<Issue>,
    pub groups: Vec<AgentGroup>,
    pub social_edges: Vec<(AgentId, AgentId)>,
    pub rooms: Vec<RoomPlan>,
    pub watchers: Vec<WatcherRule>,
    pub protocols: Vec<ProtocolSpec>,
}

impl Scenario {
    /// The canonical document this scenario was loaded from.
    pub fn document(&self) -> &ScenarioDoc {
        &self.doc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("scenario documents always serialize")
    }

    pub fn agent_count(&self) -> usize {
        self.groups.iter().map(|g| g.member_count).sum()
    }

    /// Agent ids of each group, in declaration order.
    pub fn group_members(&self) -> Vec<Range<AgentId>> {
        let mut next = 0;
        self.groups
            .iter()
            .map(|g| {
                let range = next..next + g.member_count;
                next = range.end;
                range
            })
            .collect()
    }

    /// Population context: every agent then every room, with the agent
    /// network holding complete same-group graphs plus social edges.
    pub fn build_context(&self) -> Result<Context, ContextError> {
        let mut ctx = Context::new();
        for id in 0..self.agent_count() {
            ctx.add(ObjectKey::agent(id))?;
        }
        for room in &self.rooms {
            ctx.add(ObjectKey::room(room.id))?;
        }
        ctx.add_projection(NETWORK);
        for members in self.group_members() {
            let ids: Vec<AgentId> = members.collect();
            ctx.connect_group(NETWORK, &ids)?;
        }
        for &(a, b) in &self.social_edges {
            ctx.add_edge(NETWORK, a, b, EdgeLabel::Social)?;
        }
        Ok(ctx)
    }

    /// Copy with a different run length.
    pub fn with_ticks(&self, ticks: Tick) -> Self {
        let mut out = self.clone();
        out.ticks = ticks;
        out.doc.ticks = ticks;
        out
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(text)?;
    Ok(load_scenario(doc)?)
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

fn check_ids(path: &str, ids: impl Iterator<Item = usize>) -> Result<(), ValidationError> {
    for (pos, id) in ids.enumerate() {
        if id != pos {
            return invalid(format!("{path}[{pos}].id"), format!("ids must be contiguous from 0, found {id}"));
        }
    }
    Ok(())
}

fn check_unique<'a>(path: &str, names: impl Iterator<Item = &'a str>) -> Result<(), ValidationError> {
    let mut seen = BTreeSet::new();
    for (pos, name) in names.enumerate() {
        if !seen.insert(name) {
            return invalid(format!("{path}[{pos}].name"), format!("duplicate name {name:?}"));
        }
    }
    Ok(())
}

fn model_error(path: String, err: ModelError) -> ValidationError {
    let path = match &err {
        ModelError::InvalidBounds { row, .. } => format!("{path}.bounds[{row}]"),
        ModelError::ScoreOutOfRange { criterion, .. } => format!("{path}.scores[{criterion}]"),
        ModelError::DimensionMismatch { .. } => format!("{path}.scores"),
        ModelError::InvalidDistribution(_) => format!("{path}.distribution"),
        ModelError::EmptyGroup => format!("{path}.members"),
    };
    let message = match err {
        ModelError::InvalidBounds { reason, .. } => reason,
        other => other.to_string(),
    };
    ValidationError { path, message }
}

/// Validates a document into a [`Scenario`].
pub fn load_scenario(doc: ScenarioDoc) -> Result<Scenario, ValidationError> {
    if doc.version != SCHEMA_VERSION {
        return invalid("version", format!("unsupported schema version {}", doc.version));
    }
    if !(0.0..=1.0).contains(&doc.theta_in) {
        return invalid("theta_in", "must lie in [0, 1]");
    }

    if doc.criteria.is_empty() {
        return invalid("criteria", "at least one criterion is required");
    }
    check_ids("criteria", doc.criteria.iter().map(|c| c.id))?;
    check_unique("criteria", doc.criteria.iter().map(|c| c.name.as_str()))?;
    let criteria: Vec<Criterion> = doc
        .criteria
        .iter()
        .map(|c| Criterion {
            id: c.id,
            name: c.name.clone(),
            direction: c.direction,
        })
        .collect();
    let k = criteria.len();

    if doc.issues.is_empty() {
        return invalid("issues", "at least one issue is required");
    }
    check_ids("issues", doc.issues.iter().map(|i| i.id))?;
    check_unique("issues", doc.issues.iter().map(|i| i.name.as_str()))?;
    let issues = doc
        .issues
        .iter()
        .enumerate()
        .map(|(pos, i)| {
            Issue::from_raw(i.id, i.name.clone(), &i.scores, &criteria)
                .map_err(|e| model_error(format!("issues[{pos}]"), e))
        })
        .collect::<Result<Vec<_>, _>>()?;

    if doc.groups.is_empty() {
        return invalid("groups", "at least one agent group is required");
    }
    check_ids("groups", doc.groups.iter().map(|g| g.id))?;
    check_unique("groups", doc.groups.iter().map(|g| g.name.as_str()))?;
    let mut groups = Vec::with_capacity(doc.groups.len());
    for (pos, g) in doc.groups.iter().enumerate() {
        let path = format!("groups[{pos}]");
        if g.bounds.len() != k {
            return invalid(
                format!("{path}.bounds"),
                format!("dimension mismatch: expected {k} rows, got {}", g.bounds.len()),
            );
        }
        let bounds = PreferenceBounds::new(g.bounds.iter().map(|&[lo, hi]| (lo, hi)).collect())
            .map_err(|e| model_error(path.clone(), e))?;
        let group = AgentGroup::new(g.id, g.name.clone(), bounds, g.distribution, g.members)
            .map_err(|e| model_error(path.clone(), e))?;
        groups.push(group);
    }
    let agent_count: usize = groups.iter().map(|g| g.member_count).sum();

    let mut social_edges = Vec::with_capacity(doc.social_edges.len());
    for (pos, &[a, b]) in doc.social_edges.iter().enumerate() {
        let path = format!("social_edges[{pos}]");
        if a == b {
            return invalid(path, "self-edges are not allowed");
        }
        if a >= agent_count || b >= agent_count {
            return invalid(path, format!("unknown agent (population has {agent_count} agents)"));
        }
        social_edges.push((a, b));
    }

    if doc.protocols.is_empty() {
        return invalid("protocols", "at least one protocol is required");
    }
    check_ids("protocols", doc.protocols.iter().map(|p| p.id))?;
    let mut protocols = Vec::with_capacity(doc.protocols.len());
    for (pos, p) in doc.protocols.iter().enumerate() {
        let path = format!("protocols[{pos}]");
        let config = ProtocolConfig {
            kind: p.kind,
            max_rounds: p.max_rounds,
            rounds_per_tick: p.rounds_per_tick,
        };
        if let Err(e) = config.validate() {
            return invalid(path, e);
        }
        let default_strategy = p.strategy.unwrap_or_default();
        if let Err(e) = default_strategy.validate() {
            return invalid(format!("{path}.strategy"), e);
        }
        let mut group_strategies = BTreeMap::new();
        for (gpos, gs) in p.group_strategies.iter().enumerate() {
            let gpath = format!("{path}.group_strategies[{gpos}]");
            if gs.group >= groups.len() {
                return invalid(format!("{gpath}.group"), format!("unknown group {}", gs.group));
            }
            if let Err(e) = gs.strategy.validate() {
                return invalid(format!("{gpath}.strategy"), e);
            }
            if group_strategies.insert(gs.group, gs.strategy).is_some() {
                return invalid(format!("{gpath}.group"), "duplicate group strategy");
            }
        }
        protocols.push(ProtocolSpec {
            id: p.id,
            config,
            default_strategy,
            group_strategies,
        });
    }

    if doc.rooms.len() > MAX_ROOMS {
        return invalid("rooms", format!("at most {MAX_ROOMS} rooms are supported"));
    }
    check_ids("rooms", doc.rooms.iter().map(|r| r.id))?;
    let mut rooms = Vec::with_capacity(doc.rooms.len());
    for (rpos, r) in doc.rooms.iter().enumerate() {
        let mut sessions = Vec::with_capacity(r.sessions.len());
        let mut last_open: Option<Tick> = None;
        for (spos, s) in r.sessions.iter().enumerate() {
            let path = format!("rooms[{rpos}].sessions[{spos}]");
            if last_open.is_some_and(|prev| s.open_at <= prev) {
                return invalid(format!("{path}.open_at"), "sessions must open at increasing ticks");
            }
            last_open = Some(s.open_at);
            if s.close_at.is_some_and(|close| close <= s.open_at) {
                return invalid(format!("{path}.close_at"), "must be after open_at");
            }
            let agenda = validate_agenda(&format!("{path}.agenda"), &s.agenda, &issues, &groups, &protocols, agent_count)?;
            sessions.push(SessionPlan {
                open_at: s.open_at,
                close_at: s.close_at,
                agenda,
            });
        }
        rooms.push(RoomPlan {
            id: r.id,
            name: r.name.clone().unwrap_or_else(|| format!("room-{}", r.id)),
            sessions,
        });
    }

    for (pos, rule) in doc.watchers.iter().enumerate() {
        if let Err(e) = rule.validate() {
            return invalid(format!("watchers[{pos}]"), e);
        }
        if let Some(g) = rule.watcher.group {
            if g >= groups.len() {
                return invalid(format!("watchers[{pos}].watcher.group"), format!("unknown group {g}"));
            }
        }
    }

    Ok(Scenario {
        seed: doc.seed,
        ticks: doc.ticks,
        theta_in: doc.theta_in,
        criteria,
        issues,
        groups,
        social_edges,
        rooms,
        watchers: doc.watchers.clone(),
        protocols,
        doc,
    })
}

fn validate_agenda(
    path: &str,
    agenda: &AgendaDoc,
    issues: &[Issue],
    groups: &[AgentGroup],
    protocols: &[ProtocolSpec],
    agent_count: usize,
) -> Result<Agenda, ValidationError> {
    if agenda.issues.is_empty() {
        return invalid(format!("{path}.issues"), "agenda needs at least one issue");
    }
    let mut issue_ids = agenda.issues.clone();
    for (pos, &id) in issue_ids.iter().enumerate() {
        if id >= issues.len() {
            return invalid(format!("{path}.issues[{pos}]"), format!("unknown issue {id}"));
        }
    }
    issue_ids.sort_unstable();
    if issue_ids.windows(2).any(|w| w[0] == w[1]) {
        return invalid(format!("{path}.issues"), "duplicate issue");
    }
    match &agenda.admission {
        Admission::Conditions { groups: allowed, theta_in } => {
            if let Some(allowed) = allowed {
                if let Some(g) = allowed.iter().find(|&&g| g >= groups.len()) {
                    return invalid(format!("{path}.admission.conditions.groups"), format!("unknown group {g}"));
                }
            }
            if theta_in.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
                return invalid(format!("{path}.admission.conditions.theta_in"), "must lie in [0, 1]");
            }
        }
        Admission::Invitations(list) => {
            if list.is_empty() {
                return invalid(format!("{path}.admission.invitations"), "invitation list is empty");
            }
            if let Some(a) = list.iter().find(|&&a| a >= agent_count) {
                return invalid(format!("{path}.admission.invitations"), format!("unknown agent {a}"));
            }
        }
    }
    let Some(protocol) = protocols.get(agenda.protocol) else {
        return invalid(format!("{path}.protocol"), format!("unknown protocol {}", agenda.protocol));
    };
    let deadline_rounds = agenda.deadline_rounds.unwrap_or(protocol.config.max_rounds);
    if deadline_rounds == 0 {
        return invalid(format!("{path}.deadline_rounds"), "must be >= 1");
    }
    if deadline_rounds > protocol.config.max_rounds {
        return invalid(
            format!("{path}.deadline_rounds"),
            format!("exceeds the protocol's max_rounds {}", protocol.config.max_rounds),
        );
    }
    Ok(Agenda {
        issue_ids,
        admission: agenda.admission.clone(),
        protocol_id: agenda.protocol,
        deadline_rounds,
    })
}
