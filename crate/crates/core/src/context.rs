//! Set-semantics population container with relational network projections.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Agent,
    MeetingRoom,
}

/// Handle of a context member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectKey {
    pub kind: ObjectKind,
    pub id: usize,
}

impl ObjectKey {
    pub const fn agent(id: usize) -> Self {
        Self { kind: ObjectKind::Agent, id }
    }

    pub const fn room(id: usize) -> Self {
        Self { kind: ObjectKind::MeetingRoom, id }
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ObjectKind::Agent => write!(f, "agent {}", self.id),
            ObjectKind::MeetingRoom => write!(f, "room {}", self.id),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("{0} is already a member of the context")]
    DuplicateMember(ObjectKey),
    #[error("{0} is not a member of the context")]
    NotFound(ObjectKey),
    #[error("no projection named {0:?}")]
    UnknownProjection(String),
    #[error("invalid edge {a} -- {b}: self-edges are not allowed")]
    InvalidEdge { a: AgentId, b: AgentId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    SameGroup,
    Social,
}

/// Undirected labelled edges between agents. Each edge is stored once with
/// the smaller endpoint first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkProjection {
    name: String,
    edges: BTreeSet<(AgentId, AgentId, EdgeLabel)>,
}

impl NetworkProjection {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            edges: BTreeSet::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId, EdgeLabel)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: AgentId, b: AgentId, label: EdgeLabel) -> bool {
        self.edges.contains(&(a.min(b), a.max(b), label))
    }

    /// Neighbors of `a`, ascending and deduplicated across labels.
    pub fn neighbors(&self, a: AgentId, label: Option<EdgeLabel>) -> Vec<AgentId> {
        let found: BTreeSet<AgentId> = self
            .edges
            .iter()
            .filter(|(_, _, l)| label.is_none_or(|want| want == *l))
            .filter_map(|&(x, y, _)| match (x == a, y == a) {
                (true, _) => Some(y),
                (_, true) => Some(x),
                _ => None,
            })
            .collect();
        found.into_iter().collect()
    }

    fn insert(&mut self, a: AgentId, b: AgentId, label: EdgeLabel) -> bool {
        self.edges.insert((a.min(b), a.max(b), label))
    }

    fn detach(&mut self, a: AgentId) -> usize {
        let before = self.edges.len();
        self.edges.retain(|&(x, y, _)| x != a && y != a);
        before - self.edges.len()
    }
}

/// The simulation population. Members are unique `(kind, id)` handles kept in
/// insertion order; projections attached here never reference absent agents.
#[derive(Debug, Clone, Default)]
pub struct Context {
    members: IndexSet<ObjectKey>,
    projections: IndexMap<String, NetworkProjection>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: ObjectKey) -> Result<(), ContextError> {
        if self.members.insert(key) {
            Ok(())
        } else {
            Err(ContextError::DuplicateMember(key))
        }
    }

    /// Removes a member together with every projection edge touching it.
    pub fn remove(&mut self, key: ObjectKey) -> Result<(), ContextError> {
        if !self.members.shift_remove(&key) {
            return Err(ContextError::NotFound(key));
        }
        if key.kind == ObjectKind::Agent {
            for projection in self.projections.values_mut() {
                projection.detach(key.id);
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: ObjectKey) -> bool {
        self.members.contains(&key)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = ObjectKey> + '_ {
        self.members.iter().copied()
    }

    pub fn query(&self, mut predicate: impl FnMut(ObjectKey) -> bool) -> Vec<ObjectKey> {
        self.members.iter().copied().filter(|&k| predicate(k)).collect()
    }

    pub fn add_projection(&mut self, name: impl Into<String>) -> &mut NetworkProjection {
        let name = name.into();
        self.projections
            .entry(name.clone())
            .or_insert_with(|| NetworkProjection::new(name))
    }

    pub fn projection(&self, name: &str) -> Option<&NetworkProjection> {
        self.projections.get(name)
    }

    /// Adds an undirected edge; adding an existing edge is a no-op.
    pub fn add_edge(
        &mut self,
        projection: &str,
        a: AgentId,
        b: AgentId,
        label: EdgeLabel,
    ) -> Result<(), ContextError> {
        if a == b {
            return Err(ContextError::InvalidEdge { a, b });
        }
        for id in [a, b] {
            if !self.contains(ObjectKey::agent(id)) {
                return Err(ContextError::NotFound(ObjectKey::agent(id)));
            }
        }
        let projection = self
            .projections
            .get_mut(projection)
            .ok_or_else(|| ContextError::UnknownProjection(projection.to_string()))?;
        projection.insert(a, b, label);
        Ok(())
    }

    pub fn neighbors(
        &self,
        projection: &str,
        a: AgentId,
        label: Option<EdgeLabel>,
    ) -> Result<Vec<AgentId>, ContextError> {
        let projection = self
            .projections
            .get(projection)
            .ok_or_else(|| ContextError::UnknownProjection(projection.to_string()))?;
        Ok(projection.neighbors(a, label))
    }

    /// Connects every pair of `members` with a [`EdgeLabel::SameGroup`] edge.
    pub fn connect_group(&mut self, projection: &str, members: &[AgentId]) -> Result<(), ContextError> {
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                self.add_edge(projection, a, b, EdgeLabel::SameGroup)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NET: &str = "network";

    fn with_agents(n: usize) -> Context {
        let mut ctx = Context::new();
        for id in 0..n {
            ctx.add(ObjectKey::agent(id)).unwrap();
        }
        ctx.add_projection(NET);
        ctx
    }

    #[test]
    fn add_is_unique_and_ordered() {
        let mut ctx = Context::new();
        ctx.add(ObjectKey::agent(0)).unwrap();
        assert_eq!(
            ctx.add(ObjectKey::agent(0)),
            Err(ContextError::DuplicateMember(ObjectKey::agent(0)))
        );
        ctx.add(ObjectKey::room(0)).unwrap();
        assert_eq!(
            ctx.iter().collect::<Vec<_>>(),
            vec![ObjectKey::agent(0), ObjectKey::room(0)]
        );
    }

    #[test]
    fn remove_cases() {
        let mut ctx = with_agents(1);
        ctx.remove(ObjectKey::agent(0)).unwrap();
        assert!(ctx.is_empty());
        assert_eq!(
            ctx.remove(ObjectKey::agent(5)),
            Err(ContextError::NotFound(ObjectKey::agent(5)))
        );

        let mut ctx = with_agents(3);
        ctx.add_edge(NET, 0, 1, EdgeLabel::Social).unwrap();
        ctx.add_edge(NET, 0, 2, EdgeLabel::Social).unwrap();
        ctx.add_edge(NET, 1, 2, EdgeLabel::Social).unwrap();
        ctx.remove(ObjectKey::agent(0)).unwrap();
        assert_eq!(ctx.projection(NET).unwrap().edge_count(), 1);
    }

    #[test]
    fn query_filters_in_insertion_order() {
        let mut ctx = Context::new();
        ctx.add(ObjectKey::room(1)).unwrap();
        ctx.add(ObjectKey::agent(4)).unwrap();
        ctx.add(ObjectKey::room(0)).unwrap();
        let open = [ObjectKey::room(0)];
        assert_eq!(
            ctx.query(|k| k.kind == ObjectKind::MeetingRoom && open.contains(&k)),
            vec![ObjectKey::room(0)]
        );
        assert_eq!(ctx.query(|_| true), ctx.iter().collect::<Vec<_>>());
        assert!(ctx.query(|_| false).is_empty());
    }

    #[test]
    fn edges_are_idempotent_and_checked() {
        let mut ctx = with_agents(3);
        ctx.add_edge(NET, 1, 2, EdgeLabel::Social).unwrap();
        ctx.add_edge(NET, 2, 1, EdgeLabel::Social).unwrap();
        assert_eq!(ctx.neighbors(NET, 1, None).unwrap(), vec![2]);
        assert_eq!(ctx.projection(NET).unwrap().edge_count(), 1);
        assert_eq!(
            ctx.add_edge(NET, 1, 1, EdgeLabel::Social),
            Err(ContextError::InvalidEdge { a: 1, b: 1 })
        );
        assert_eq!(
            ctx.add_edge(NET, 1, 9, EdgeLabel::Social),
            Err(ContextError::NotFound(ObjectKey::agent(9)))
        );
    }

    #[test]
    fn same_group_projection_is_complete() {
        let mut ctx = with_agents(3);
        ctx.connect_group(NET, &[0, 1, 2]).unwrap();
        // K3 has 3 edges, every vertex degree 2.
        assert_eq!(ctx.projection(NET).unwrap().edge_count(), 3);
        for a in 0..3 {
            assert_eq!(ctx.neighbors(NET, a, Some(EdgeLabel::SameGroup)).unwrap().len(), 2);
        }
        ctx.add_edge(NET, 0, 1, EdgeLabel::Social).unwrap();
        assert_eq!(ctx.neighbors(NET, 0, None).unwrap(), vec![1, 2]);
        assert_eq!(ctx.neighbors(NET, 0, Some(EdgeLabel::Social)).unwrap(), vec![1]);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Add(ObjectKey),
        Remove(ObjectKey),
        Edge(usize, usize),
    }

    fn op() -> impl Strategy<Value = Op> {
        let key = (any::<bool>(), 0usize..8).prop_map(|(agent, id)| {
            if agent { ObjectKey::agent(id) } else { ObjectKey::room(id) }
        });
        prop_oneof![
            key.clone().prop_map(Op::Add),
            key.prop_map(Op::Remove),
            (0usize..8, 0usize..8).prop_map(|(a, b)| Op::Edge(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn random_sequences_keep_set_semantics(ops in prop::collection::vec(op(), 0..200)) {
            let mut ctx = Context::new();
            ctx.add_projection(NET);
            for op in ops {
                match op {
                    Op::Add(k) => {
                        let existed = ctx.contains(k);
                        prop_assert_eq!(ctx.add(k).is_err(), existed);
                    }
                    Op::Remove(k) => {
                        let existed = ctx.contains(k);
                        prop_assert_eq!(ctx.remove(k).is_ok(), existed);
                    }
                    Op::Edge(a, b) => {
                        let _ = ctx.add_edge(NET, a, b, EdgeLabel::Social);
                    }
                }
                let keys: Vec<_> = ctx.iter().collect();
                let unique: BTreeSet<_> = keys.iter().collect();
                prop_assert_eq!(unique.len(), keys.len());
                for (a, b, _) in ctx.projection(NET).unwrap().edges() {
                    prop_assert!(ctx.contains(ObjectKey::agent(a)));
                    prop_assert!(ctx.contains(ObjectKey::agent(b)));
                    prop_assert!(a != b);
                }
            }
        }
    }
}
