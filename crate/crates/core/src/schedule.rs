//! Discrete-tick scheduler with priorities and state-change watchers.
//!
//! Actions due at the current tick run in `(priority desc, seq asc)` order.
//! The clock advances only once nothing is left for the current tick,
//! including reactions enqueued while the tick was running.
//!
//! Watchers are declarative: a [`WatcherRule`] names which objects watch
//! (`watcher`), which objects are watched (`watchee`), a side-effect-free
//! [`Trigger`] over the pair, and the [`Reaction`] to schedule. Rules are
//! evaluated by [`Scheduler::notify_state_change`] against an [`Observable`]
//! view of the model.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ObjectKey, ObjectKind};

pub type Tick = u64;
pub type Priority = i64;

/// Maximum watcher firings within one tick.
pub const DEFAULT_CASCADE_LIMIT: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("cannot schedule at tick {start}: clock is already at tick {now}")]
    InPast { start: Tick, now: Tick },
    #[error("priority band {priority} already passed in this tick (executing band {band})")]
    BandPassed { priority: Priority, band: Priority },
    #[error("watcher cascade exceeded {limit} firings in tick {tick}")]
    CascadeOverflow { tick: Tick, limit: usize },
    #[error("invalid run-control transition from {from:?} to {to:?}")]
    InvalidTransition { from: RunStatus, to: RunStatus },
    #[error("the schedule is stopped")]
    Stopped,
    #[error("the schedule is paused")]
    Paused,
    #[error("malformed watcher query: {0}")]
    MalformedQuery(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    RoomOpen,
    RoomInvite,
    AgentScan,
    NegotiationRound,
    RoomClose,
    Report,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledAction {
    pub start: Tick,
    /// Zero for one-shot actions.
    pub interval: Tick,
    /// Larger runs earlier within a tick.
    pub priority: Priority,
    /// Assigned by [`Scheduler::schedule`]; kept across repeats.
    pub seq: u64,
    pub kind: ActionKind,
    pub target: ObjectKey,
    /// Watchee whose state change produced this action, for reactions.
    pub cause: Option<ObjectKey>,
    /// Kind-specific argument, e.g. the session-plan index of a room opening.
    pub param: Option<usize>,
}

impl ScheduledAction {
    pub fn new(kind: ActionKind, target: ObjectKey, start: Tick, priority: Priority) -> Self {
        Self {
            start,
            interval: 0,
            priority,
            seq: 0,
            kind,
            target,
            cause: None,
            param: None,
        }
    }

    pub fn every(mut self, interval: Tick) -> Self {
        self.interval = interval;
        self
    }

    pub fn with_param(mut self, param: usize) -> Self {
        self.param = Some(param);
        self
    }

    pub fn caused_by(mut self, cause: ObjectKey) -> Self {
        self.cause = Some(cause);
        self
    }
}

/// Observable state of a context member, as seen by watcher queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Idle,
    Watching,
    InRoom,
    Negotiating,
    Closed,
    Open,
    InSession,
}

impl StateLabel {
    pub fn kind(self) -> ObjectKind {
        match self {
            StateLabel::Idle | StateLabel::Watching | StateLabel::InRoom | StateLabel::Negotiating => {
                ObjectKind::Agent
            }
            StateLabel::Closed | StateLabel::Open | StateLabel::InSession => ObjectKind::MeetingRoom,
        }
    }
}

/// Read access the watcher machinery needs from the model.
pub trait Observable {
    /// All objects of `kind`, ascending id.
    fn objects(&self, kind: ObjectKind) -> Vec<ObjectKey>;
    fn state_label(&self, key: ObjectKey) -> Option<StateLabel>;
    fn group_of(&self, agent: usize) -> Option<usize>;
    /// Whether `agent` passes the admission policy of the open `room`.
    fn admissible(&self, agent: usize, room: usize) -> bool;
}

/// Conjunction of `field = value` tests over one object kind. Absent fields
/// are unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<usize>,
}

impl Query {
    pub fn kind(kind: ObjectKind) -> Self {
        Self {
            kind,
            state: None,
            group: None,
            id: None,
        }
    }

    pub fn in_state(mut self, state: StateLabel) -> Self {
        self.state = Some(state);
        self
    }

    pub fn in_group(mut self, group: usize) -> Self {
        self.group = Some(group);
        self
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if let Some(state) = self.state {
            if state.kind() != self.kind {
                return Err(ScheduleError::MalformedQuery(format!(
                    "state {state:?} does not apply to {:?}",
                    self.kind
                )));
            }
        }
        if self.group.is_some() && self.kind != ObjectKind::Agent {
            return Err(ScheduleError::MalformedQuery(
                "group is only defined for agents".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates the query for `key` assuming it is in `state`.
    pub fn matches<V: Observable + ?Sized>(&self, view: &V, key: ObjectKey, state: StateLabel) -> bool {
        key.kind == self.kind
            && self.state.is_none_or(|s| s == state)
            && self.id.is_none_or(|id| id == key.id)
            && self.group.is_none_or(|g| view.group_of(key.id) == Some(g))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Always,
    Never,
    /// Watcher agent passes the admission policy of the watchee room.
    Admissible,
    /// Watcher is available (idle or watching).
    WatcherAvailable,
    WatcherIs(StateLabel),
    WatcheeIs(StateLabel),
    All(Vec<Trigger>),
}

impl Trigger {
    pub fn eval<V: Observable + ?Sized>(
        &self,
        view: &V,
        watcher: (ObjectKey, StateLabel),
        watchee: (ObjectKey, StateLabel),
    ) -> bool {
        match self {
            Trigger::Always => true,
            Trigger::Never => false,
            Trigger::Admissible => {
                watcher.0.kind == ObjectKind::Agent
                    && watchee.0.kind == ObjectKind::MeetingRoom
                    && watchee.1 == StateLabel::Open
                    && view.admissible(watcher.0.id, watchee.0.id)
            }
            Trigger::WatcherAvailable => {
                matches!(watcher.1, StateLabel::Idle | StateLabel::Watching)
            }
            Trigger::WatcherIs(state) => watcher.1 == *state,
            Trigger::WatcheeIs(state) => watchee.1 == *state,
            Trigger::All(parts) => parts.iter().all(|t| t.eval(view, watcher, watchee)),
        }
    }

    fn validate(&self, watcher: ObjectKind, watchee: ObjectKind) -> Result<(), ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::MalformedQuery(msg));
        match self {
            Trigger::Admissible
                if watcher != ObjectKind::Agent || watchee != ObjectKind::MeetingRoom =>
            {
                bad("admissible requires agent watchers of meeting rooms".into())
            }
            Trigger::WatcherAvailable if watcher != ObjectKind::Agent => {
                bad("watcher_available requires agent watchers".into())
            }
            Trigger::WatcherIs(s) if s.kind() != watcher => {
                bad(format!("watcher state {s:?} does not apply to {watcher:?}"))
            }
            Trigger::WatcheeIs(s) if s.kind() != watchee => {
                bad(format!("watchee state {s:?} does not apply to {watchee:?}"))
            }
            Trigger::All(parts) => parts.iter().try_for_each(|t| t.validate(watcher, watchee)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Offset {
    /// Runs in the current tick, one band below the executing action.
    SameTick,
    NextTick,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reaction {
    pub action: ActionKind,
    pub offset: Offset,
    /// Used for next-tick reactions and for reactions fired outside a tick.
    #[serde(default)]
    pub priority: Priority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatcherRule {
    pub watcher: Query,
    pub watchee: Query,
    pub trigger: Trigger,
    pub reaction: Reaction,
}

impl WatcherRule {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        self.watcher.validate()?;
        self.watchee.validate()?;
        self.trigger.validate(self.watcher.kind, self.watchee.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiredReaction {
    pub rule_id: usize,
    pub watcher: ObjectKey,
    pub watchee: ObjectKey,
    pub action: ScheduledAction,
    /// The same-tick band had already passed, so the reaction moved to the
    /// next tick.
    pub deferred: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Running,
    Paused,
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunControl {
    pub status: RunStatus,
    pub stop_at: Option<Tick>,
}

/// Actions executed during one tick, in execution order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickReport {
    pub tick: Tick,
    pub executed: Vec<ScheduledAction>,
}

pub trait ActionHandler {
    type Error: From<ScheduleError>;

    fn execute(&mut self, action: &ScheduledAction, scheduler: &mut Scheduler) -> Result<(), Self::Error>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct QueueKey {
    start: Tick,
    priority: Reverse<Priority>,
    seq: u64,
}

impl QueueKey {
    fn of(action: &ScheduledAction) -> Self {
        Self {
            start: action.start,
            priority: Reverse(action.priority),
            seq: action.seq,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    now: Tick,
    queue: BTreeMap<QueueKey, ScheduledAction>,
    next_seq: u64,
    rules: Vec<WatcherRule>,
    control: RunControl,
    band: Option<Priority>,
    fired_this_tick: usize,
    cascade_limit: usize,
}

impl Default for Scheduler {
    fn default() -> Self {
        Self::new()
    }
}

impl Scheduler {
    pub fn new() -> Self {
        Self {
            now: 0,
            queue: BTreeMap::new(),
            next_seq: 0,
            rules: Vec::new(),
            control: RunControl {
                status: RunStatus::Running,
                stop_at: None,
            },
            band: None,
            fired_this_tick: 0,
            cascade_limit: DEFAULT_CASCADE_LIMIT,
        }
    }

    pub fn with_cascade_limit(mut self, limit: usize) -> Self {
        self.cascade_limit = limit;
        self
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Priority of the action currently executing, if inside a tick.
    pub fn current_band(&self) -> Option<Priority> {
        self.band
    }

    pub fn control(&self) -> RunControl {
        self.control
    }

    pub fn status(&self) -> RunStatus {
        self.control.status
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn rules(&self) -> &[WatcherRule] {
        &self.rules
    }

    /// Enqueues `action` and returns its sequence number.
    pub fn schedule(&mut self, mut action: ScheduledAction) -> Result<u64, ScheduleError> {
        if action.start < self.now {
            return Err(ScheduleError::InPast {
                start: action.start,
                now: self.now,
            });
        }
        if action.start == self.now {
            if let Some(band) = self.band {
                if action.priority > band {
                    return Err(ScheduleError::BandPassed {
                        priority: action.priority,
                        band,
                    });
                }
            }
        }
        action.seq = self.next_seq;
        self.next_seq += 1;
        self.queue.insert(QueueKey::of(&action), action.clone());
        Ok(action.seq)
    }

    /// Registers a rule; its id is its registration index.
    pub fn register_watcher(&mut self, rule: WatcherRule) -> Result<usize, ScheduleError> {
        rule.validate()?;
        self.rules.push(rule);
        Ok(self.rules.len() - 1)
    }

    /// `(rule_id, watcher)` pairs whose rule fires for a change of `key` to
    /// `new`, in rule order then ascending watcher id. Pure.
    pub fn matching_watchers<V: Observable + ?Sized>(
        &self,
        view: &V,
        key: ObjectKey,
        old: StateLabel,
        new: StateLabel,
    ) -> Vec<(usize, ObjectKey)> {
        if old == new {
            return Vec::new();
        }
        let mut hits = Vec::new();
        for (rule_id, rule) in self.rules.iter().enumerate() {
            if !rule.watchee.matches(view, key, new) {
                continue;
            }
            for watcher in view.objects(rule.watcher.kind) {
                if watcher == key {
                    continue;
                }
                let Some(state) = view.state_label(watcher) else {
                    continue;
                };
                if rule.watcher.matches(view, watcher, state)
                    && rule.trigger.eval(view, (watcher, state), (key, new))
                {
                    hits.push((rule_id, watcher));
                }
            }
        }
        hits
    }

    /// Evaluates every rule against a state change of `key` and enqueues the
    /// reactions that fire.
    pub fn notify_state_change<V: Observable + ?Sized>(
        &mut self,
        view: &V,
        key: ObjectKey,
        old: StateLabel,
        new: StateLabel,
    ) -> Result<Vec<FiredReaction>, ScheduleError> {
        let hits = self.matching_watchers(view, key, old, new);
        let mut fired = Vec::with_capacity(hits.len());
        for (rule_id, watcher) in hits {
            self.fired_this_tick += 1;
            if self.fired_this_tick > self.cascade_limit {
                return Err(ScheduleError::CascadeOverflow {
                    tick: self.now,
                    limit: self.cascade_limit,
                });
            }
            let reaction = &self.rules[rule_id].reaction;
            let mut action = ScheduledAction::new(reaction.action, watcher, self.now, reaction.priority)
                .caused_by(key);
            let mut deferred = false;
            match (reaction.offset, self.band) {
                (Offset::NextTick, _) => action.start = self.now + 1,
                (Offset::SameTick, None) => {}
                (Offset::SameTick, Some(band)) => match band.checked_sub(1) {
                    Some(lower) => action.priority = lower,
                    None => {
                        action.start = self.now + 1;
                        deferred = true;
                    }
                },
            }
            action.seq = self.schedule(action.clone())?;
            fired.push(FiredReaction {
                rule_id,
                watcher,
                watchee: key,
                action,
                deferred,
            });
        }
        Ok(fired)
    }

    /// Runs every action due at the current tick, then advances the clock.
    pub fn step<H: ActionHandler>(&mut self, handler: &mut H) -> Result<TickReport, H::Error> {
        match self.control.status {
            RunStatus::Running => {}
            RunStatus::Paused => return Err(ScheduleError::Paused.into()),
            RunStatus::Stopped => return Err(ScheduleError::Stopped.into()),
        }
        let tick = self.now;
        self.fired_this_tick = 0;
        let mut executed = Vec::new();
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().start != tick {
                break;
            }
            let action = entry.remove();
            self.band = Some(action.priority);
            let result = handler.execute(&action, self);
            if action.interval > 0 {
                let mut next = action.clone();
                next.start += action.interval;
                self.queue.insert(QueueKey::of(&next), next);
            }
            executed.push(action);
            if let Err(err) = result {
                self.band = None;
                return Err(err);
            }
        }
        self.band = None;
        if self.control.stop_at.is_some_and(|at| at <= tick) {
            self.control.status = RunStatus::Stopped;
        }
        self.now += 1;
        Ok(TickReport { tick, executed })
    }

    /// Steps until stopped, paused, or `max_ticks` ticks have run.
    pub fn run<H: ActionHandler>(
        &mut self,
        handler: &mut H,
        max_ticks: Option<u64>,
    ) -> Result<Vec<TickReport>, H::Error> {
        let mut reports = Vec::new();
        while self.control.status == RunStatus::Running
            && max_ticks.is_none_or(|max| (reports.len() as u64) < max)
        {
            reports.push(self.step(handler)?);
        }
        Ok(reports)
    }

    /// `stop(Some(t))` halts once tick `t` completes. `stop(None)` halts at
    /// the end of the running tick, or immediately between ticks.
    pub fn stop(&mut self, at: Option<Tick>) {
        match at {
            Some(at) if at >= self.now => self.control.stop_at = Some(at),
            Some(_) => self.control.status = RunStatus::Stopped,
            None if self.band.is_some() => self.control.stop_at = Some(self.now),
            None => self.control.status = RunStatus::Stopped,
        }
    }

    pub fn pause(&mut self) -> Result<(), ScheduleError> {
        match self.control.status {
            RunStatus::Stopped => Err(ScheduleError::InvalidTransition {
                from: RunStatus::Stopped,
                to: RunStatus::Paused,
            }),
            _ => {
                self.control.status = RunStatus::Paused;
                Ok(())
            }
        }
    }

    pub fn resume(&mut self) -> Result<(), ScheduleError> {
        match self.control.status {
            RunStatus::Stopped => Err(ScheduleError::InvalidTransition {
                from: RunStatus::Stopped,
                to: RunStatus::Running,
            }),
            _ => {
                self.control.status = RunStatus::Running;
                Ok(())
            }
        }
    }
}
