//! Criteria, issues, agent groups and agents.
//!
//! An [`AgentGroup`] is the template for a population segment: it holds one
//! `(lower, upper)` preference bound per criterion and a sampling
//! distribution, and acts as the factory for its member [`Agent`]s. Sampled
//! raw preferences are normalized into criterion weights, which drive
//! [`Agent::evaluate`].

use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type CriterionId = usize;
pub type IssueId = usize;
pub type GroupId = usize;
pub type AgentId = usize;
pub type RoomId = usize;

/// Rejections allowed before truncated-normal sampling falls back to the
/// interval midpoint.
pub const MAX_REJECTIONS: usize = 64;

/// Tolerance on the weight-sum invariant.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected} criteria, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("preference bounds row {row}: {reason}")]
    InvalidBounds { row: usize, reason: String },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("agent group must have at least one member")]
    EmptyGroup,
    #[error("issue score {score} for criterion {criterion} is outside [0, 1]")]
    ScoreOutOfRange { criterion: CriterionId, score: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Larger scores are better.
    Benefit,
    /// Smaller raw scores are better; stored flipped to the benefit direction.
    Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: CriterionId,
    pub name: String,
    pub direction: Direction,
}

/// A discrete negotiation alternative with one benefit-direction score per
/// criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub id: IssueId,
    pub name: String,
    pub scores: Vec<f64>,
}

impl Issue {
    /// Builds an issue from raw scores in `[0, 1]`, flipping cost criteria
    /// so that every stored score points in the benefit direction.
    pub fn from_raw(
        id: IssueId,
        name: impl Into<String>,
        raw: &[f64],
        criteria: &[Criterion],
    ) -> Result<Self, ModelError> {
        if raw.len() != criteria.len() {
            return Err(ModelError::DimensionMismatch {
                expected: criteria.len(),
                actual: raw.len(),
            });
        }
        let mut scores = Vec::with_capacity(raw.len());
        for (criterion, &score) in criteria.iter().zip(raw) {
            if !(0.0..=1.0).contains(&score) {
                return Err(ModelError::ScoreOutOfRange {
                    criterion: criterion.id,
                    score,
                });
            }
            scores.push(match criterion.direction {
                Direction::Benefit => score,
                Direction::Cost => 1.0 - score,
            });
        }
        Ok(Self {
            id,
            name: name.into(),
            scores,
        })
    }
}

/// One `(lower, upper)` row per criterion, both ends inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceBounds {
    rows: Vec<(f64, f64)>,
}

impl PreferenceBounds {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        for (row, &(lower, upper)) in rows.iter().enumerate() {
            let reason = if !lower.is_finite() || !upper.is_finite() {
                Some("bounds must be finite")
            } else if lower < 0.0 || upper > 1.0 {
                Some("bounds must lie in [0, 1]")
            } else if lower > upper {
                Some("lower > upper")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(ModelError::InvalidBounds {
                    row,
                    reason: reason.to_string(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, raw: &[f64]) -> bool {
        raw.len() == self.rows.len()
            && self
                .rows
                .iter()
                .zip(raw)
                .all(|(&(lo, hi), &v)| lo <= v && v <= hi)
    }
}

/// Per-criterion sampling law inside a bounds row.
///
/// `TruncatedNormal` parameters are fractions of the row interval: `mean = 0.5`
/// centers the law on the midpoint, `sd = 0.25` spreads it over a quarter of
/// the interval width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
    TruncatedNormal { mean: f64, sd: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            Distribution::Uniform => Ok(()),
            Distribution::TruncatedNormal { mean, sd } => {
                if !(sd > 0.0 && sd.is_finite()) {
                    Err(ModelError::InvalidDistribution(format!(
                        "truncated normal sd must be > 0, got {sd}"
                    )))
                } else if !(0.0..=1.0).contains(&mean) {
                    Err(ModelError::InvalidDistribution(format!(
                        "truncated normal mean must lie in [0, 1], got {mean}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "room", rename_all = "snake_case")]
pub enum AgentState {
    Idle,
    Watching,
    InRoom(RoomId),
    Negotiating(RoomId),
}

impl AgentState {
    pub fn is_available(&self) -> bool {
        matches!(self, AgentState::Idle | AgentState::Watching)
    }

    pub fn room(&self) -> Option<RoomId> {
        match *self {
            AgentState::InRoom(room) | AgentState::Negotiating(room) => Some(room),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentGroup {
    pub id: GroupId,
    pub name: String,
    pub bounds: PreferenceBounds,
    pub distribution: Distribution,
    pub member_count: usize,
}

impl AgentGroup {
    pub fn new(
        id: GroupId,
        name: impl Into<String>,
        bounds: PreferenceBounds,
        distribution: Distribution,
        member_count: usize,
    ) -> Result<Self, ModelError> {
        distribution.validate()?;
        if member_count == 0 {
            return Err(ModelError::EmptyGroup);
        }
        Ok(Self {
            id,
            name: name.into(),
            bounds,
            distribution,
            member_count,
        })
    }

    pub fn criteria_count(&self) -> usize {
        self.bounds.len()
    }

    /// Draws one raw preference vector inside the group's bounds.
    ///
    /// Uniform sampling consumes exactly one draw per criterion, including
    /// degenerate rows. Truncated-normal sampling rejects draws outside the
    /// row and falls back to the midpoint after [`MAX_REJECTIONS`] failures;
    /// degenerate rows consume nothing.
    pub fn sample_preferences<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.bounds
            .rows()
            .iter()
            .map(|&(lower, upper)| match self.distribution {
                Distribution::Uniform => {
                    let u: f64 = rng.random();
                    (lower + u * (upper - lower)).clamp(lower, upper)
                }
                Distribution::TruncatedNormal { mean, sd } => {
                    let width = upper - lower;
                    if width <= 0.0 {
                        return lower;
                    }
                    let center = lower + mean * width;
                    let spread = sd * width;
                    for _ in 0..MAX_REJECTIONS {
                        let z: f64 = StandardNormal.sample(rng);
                        let v = center + spread * z;
                        if (lower..=upper).contains(&v) {
                            return v;
                        }
                    }
                    lower + 0.5 * width
                }
            })
            .collect()
    }

    /// Factory for the group's members. Agents get consecutive ids from
    /// `starting_id` and are sampled in id order.
    pub fn spawn_members<R: Rng + ?Sized>(&self, rng: &mut R, starting_id: AgentId) -> Vec<Agent> {
        (0..self.member_count)
            .map(|offset| {
                let raw_prefs = self.sample_preferences(rng);
                let weights = normalize_weights(&raw_prefs);
                Agent {
                    id: starting_id + offset,
                    group_id: self.id,
                    raw_prefs,
                    weights,
                    state: AgentState::Idle,
                }
            })
            .collect()
    }
}

/// Scales non-negative raw preferences to sum to one. An all-zero vector maps
/// to uniform weights.
pub fn normalize_weights(raw_prefs: &[f64]) -> Vec<f64> {
    let total: f64 = raw_prefs.iter().sum();
    if total > 0.0 {
        raw_prefs.iter().map(|&p| p / total).collect()
    } else {
        let k = raw_prefs.len().max(1) as f64;
        vec![1.0 / k; raw_prefs.len()]
    }
}

/// Weighted additive utility of a score vector, clamped into `[0, 1]` to
/// absorb rounding in the weight sum.
pub fn weighted_utility(weights: &[f64], scores: &[f64]) -> Result<f64, ModelError> {
    if weights.len() != scores.len() {
        return Err(ModelError::DimensionMismatch {
            expected: weights.len(),
            actual: scores.len(),
        });
    }
    let sum: f64 = weights.iter().zip(scores).map(|(w, s)| w * s).sum();
    Ok(sum.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub group_id: GroupId,
    pub raw_prefs: Vec<f64>,
    pub weights: Vec<f64>,
    pub state: AgentState,
}

impl Agent {
    pub fn evaluate(&self, issue: &Issue) -> Result<f64, ModelError> {
        weighted_utility(&self.weights, &issue.scores)
    }

    /// Utility of each listed issue, in the given order.
    pub fn utilities<'a>(
        &self,
        issues: impl IntoIterator<Item = &'a Issue>,
    ) -> Result<Vec<f64>, ModelError> {
        issues.into_iter().map(|issue| self.evaluate(issue)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn group(rows: Vec<(f64, f64)>, distribution: Distribution, members: usize) -> AgentGroup {
        AgentGroup::new(0, "g", PreferenceBounds::new(rows).unwrap(), distribution, members)
            .unwrap()
    }

    fn agent_with(weights: Vec<f64>) -> Agent {
        Agent {
            id: 0,
            group_id: 0,
            raw_prefs: weights.clone(),
            weights,
            state: AgentState::Idle,
        }
    }

    fn issue(scores: Vec<f64>) -> Issue {
        Issue {
            id: 0,
            name: "i".into(),
            scores,
        }
    }

    #[test]
    fn degenerate_row_pins_sample() {
        let tn = Distribution::TruncatedNormal { mean: 0.2, sd: 0.5 };
        for dist in [Distribution::Uniform, tn] {
            let g = group(vec![(0.3, 0.3)], dist, 1);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            assert_eq!(g.sample_preferences(&mut rng), vec![0.3]);
        }
    }

    #[test]
    fn uniform_sampling_is_reproducible() {
        let g = group(vec![(0.0, 1.0); 4], Distribution::Uniform, 1);
        let a = g.sample_preferences(&mut ChaCha8Rng::seed_from_u64(17));
        let b = g.sample_preferences(&mut ChaCha8Rng::seed_from_u64(17));
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_consumes_one_draw_per_criterion() {
        let g = group(vec![(0.1, 0.9), (0.5, 0.5), (0.0, 1.0)], Distribution::Uniform, 1);
        let mut sampled = ChaCha8Rng::seed_from_u64(3);
        g.sample_preferences(&mut sampled);
        let mut reference = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let _: f64 = reference.random();
        }
        assert_eq!(sampled.random::<u64>(), reference.random::<u64>());
    }

    #[test]
    fn uniform_mean_matches_independent_monte_carlo() {
        // Oracle: an independent generator drawing directly over [0.2, 0.4].
        let mut oracle_rng = rand::rngs::StdRng::seed_from_u64(1234);
        let oracle_mean: f64 =
            (0..10_000).map(|_| oracle_rng.random_range(0.2..0.4)).sum::<f64>() / 10_000.0;
        assert!((0.29..=0.31).contains(&oracle_mean));

        let g = group(vec![(0.2, 0.4)], Distribution::Uniform, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mean: f64 = (0..10_000)
            .map(|_| g.sample_preferences(&mut rng)[0])
            .sum::<f64>()
            / 10_000.0;
        assert!((0.29..=0.31).contains(&mean), "mean {mean}");
        assert!((mean - oracle_mean).abs() < 0.01);
    }

    #[test]
    fn truncated_normal_falls_back_to_midpoint() {
        // A mean far outside the row with a tiny spread rejects every draw.
        let g = AgentGroup {
            id: 0,
            name: "g".into(),
            bounds: PreferenceBounds::new(vec![(0.2, 0.6)]).unwrap(),
            distribution: Distribution::TruncatedNormal { mean: 50.0, sd: 1e-6 },
            member_count: 1,
        };
        let v = g.sample_preferences(&mut ChaCha8Rng::seed_from_u64(0));
        assert!((v[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_weights(&[0.2, 0.2]), vec![0.5, 0.5]);
        assert_eq!(normalize_weights(&[0.0, 0.0, 0.0]), vec![1.0 / 3.0; 3]);
        let w = normalize_weights(&[0.1, 0.3, 0.6]);
        for (got, want) in w.iter().zip([0.1, 0.3, 0.6]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn spawn_examples() {
        let g = group(vec![(0.0, 1.0)], Distribution::Uniform, 1);
        let agents = g.spawn_members(&mut ChaCha8Rng::seed_from_u64(1), 7);
        assert_eq!(agents.len(), 1);
        assert_eq!(agents[0].id, 7);
        assert_eq!(agents[0].state, AgentState::Idle);

        let g = group(vec![(0.5, 0.5); 3], Distribution::Uniform, 5);
        let agents = g.spawn_members(&mut ChaCha8Rng::seed_from_u64(1), 0);
        assert_eq!(agents.len(), 5);
        assert!(agents.iter().all(|a| a.weights == agents[0].weights));
        assert_eq!(agents.iter().map(|a| a.id).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);

        let g = group(vec![(0.1, 0.8); 3], Distribution::Uniform, 4);
        let a = g.spawn_members(&mut ChaCha8Rng::seed_from_u64(5), 0);
        let b = g.spawn_members(&mut ChaCha8Rng::seed_from_u64(5), 0);
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_examples() {
        let u = agent_with(vec![1.0, 0.0]).evaluate(&issue(vec![0.7, 0.3])).unwrap();
        assert!((u - 0.7).abs() < 1e-12);
        let u = agent_with(vec![0.5, 0.5]).evaluate(&issue(vec![0.4, 0.8])).unwrap();
        assert!((u - 0.6).abs() < 1e-12);
        let u = agent_with(vec![0.2, 0.3, 0.5])
            .evaluate(&issue(vec![1.0, 0.0, 0.6]))
            .unwrap();
        assert!((u - 0.5).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let err = agent_with(vec![0.5, 0.5]).evaluate(&issue(vec![0.1])).unwrap_err();
        assert_eq!(err, ModelError::DimensionMismatch { expected: 2, actual: 1 });
    }

    #[test]
    fn cost_criteria_are_flipped() {
        let criteria = vec![
            Criterion { id: 0, name: "effect".into(), direction: Direction::Benefit },
            Criterion { id: 1, name: "cost".into(), direction: Direction::Cost },
        ];
        let i = Issue::from_raw(0, "x", &[0.25, 0.25], &criteria).unwrap();
        assert_eq!(i.scores, vec![0.25, 0.75]);
        assert!(Issue::from_raw(0, "x", &[0.25], &criteria).is_err());
        assert!(Issue::from_raw(0, "x", &[0.25, 1.5], &criteria).is_err());
    }

    #[test]
    fn bounds_and_distribution_validation() {
        assert!(PreferenceBounds::new(vec![(0.6, 0.4)]).is_err());
        assert!(PreferenceBounds::new(vec![(-0.1, 0.4)]).is_err());
        assert!(PreferenceBounds::new(vec![(0.1, 1.1)]).is_err());
        let tn = Distribution::TruncatedNormal { mean: 0.5, sd: 0.0 };
        assert!(tn.validate().is_err());
        let tn = Distribution::TruncatedNormal { mean: 1.5, sd: 0.1 };
        assert!(tn.validate().is_err());
        let bounds = PreferenceBounds::new(vec![(0.1, 0.2)]).unwrap();
        assert_eq!(
            AgentGroup::new(0, "g", bounds, Distribution::Uniform, 0).unwrap_err(),
            ModelError::EmptyGroup
        );
    }

    fn bounds_rows() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..6)
            .prop_map(|rows| rows.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect())
    }

    fn distribution() -> impl Strategy<Value = Distribution> {
        prop_oneof![
            Just(Distribution::Uniform),
            (0.0f64..=1.0, 0.01f64..2.0)
                .prop_map(|(mean, sd)| Distribution::TruncatedNormal { mean, sd }),
        ]
    }

    proptest! {
        #[test]
        fn spawned_agents_respect_bounds(
            rows in bounds_rows(),
            dist in distribution(),
            seed in any::<u64>(),
        ) {
            let g = group(rows, dist, 20);
            for agent in g.spawn_members(&mut ChaCha8Rng::seed_from_u64(seed), 0) {
                prop_assert!(g.bounds.contains(&agent.raw_prefs));
                let sum: f64 = agent.weights.iter().sum();
                prop_assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
                prop_assert!(agent.weights.iter().all(|&w| w >= 0.0));
            }
        }

        #[test]
        fn normalization_sums_to_one_and_keeps_argmax(
            raw in prop::collection::vec(0.0f64..10.0, 1..8),
        ) {
            let w = normalize_weights(&raw);
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE);
            if raw.iter().sum::<f64>() > 0.0 {
                let argmax = |v: &[f64]| {
                    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
                };
                prop_assert_eq!(argmax(&raw), argmax(&w));
            }
        }

        #[test]
        fn evaluate_is_bounded_and_monotone(
            raw in prop::collection::vec(0.0f64..1.0, 1..6),
            scores_seed in prop::collection::vec(0.0f64..0.9, 6),
            k in 0usize..6,
            bump in 0.01f64..0.1,
        ) {
            let weights = normalize_weights(&raw);
            let n = weights.len();
            let scores: Vec<f64> = scores_seed[..n].to_vec();
            let agent = agent_with(weights.clone());
            let base = agent.evaluate(&issue(scores.clone())).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            let k = k % n;
            let mut raised = scores;
            raised[k] += bump;
            let after = agent.evaluate(&issue(raised)).unwrap();
            prop_assert!((0.0..=1.0).contains(&after));
            if weights[k] > 1e-6 {
                prop_assert!(after > base);
            }
        }
    }
}
