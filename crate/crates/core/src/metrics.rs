//! Welfare and fairness measures of negotiation outcomes.

use serde::{Deserialize, Serialize};

use crate::protocol::{NegotiationOutcome, SessionStatus};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutcomeMetrics {
    pub social_welfare: f64,
    pub min_utility: f64,
    pub nash_product: f64,
}

impl OutcomeMetrics {
    /// Sum, minimum and product of participant utilities of an agreement.
    pub fn of_agreement(utilities: &[f64]) -> Self {
        if utilities.is_empty() {
            return Self::default();
        }
        Self {
            social_welfare: utilities.iter().sum(),
            min_utility: utilities.iter().copied().fold(f64::INFINITY, f64::min),
            nash_product: utilities.iter().product(),
        }
    }
}

/// Metrics of a terminated outcome; anything but an agreement scores zero.
pub fn metrics(outcome: &NegotiationOutcome) -> OutcomeMetrics {
    match outcome.status {
        SessionStatus::Agreed(_) => OutcomeMetrics::of_agreement(&outcome.utilities),
        _ => OutcomeMetrics::default(),
    }
}
