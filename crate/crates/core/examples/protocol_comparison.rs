//! Run one utility profile under all three protocols and compare outcomes.

use mnegoti::metrics::metrics;
use mnegoti::protocol::{concession_threshold, Participant, ProtocolKind};
use mnegoti::{NegotiationSession, ProtocolConfig, StrategyConfig};

fn main() -> Result<(), mnegoti::Error> {
    let agenda = vec![0, 1, 2, 3];
    let profile = [
        vec![0.9, 0.6, 0.4, 0.1],
        vec![0.2, 0.7, 0.5, 0.9],
        vec![0.5, 0.55, 0.8, 0.3],
    ];
    let deadline = 5;

    println!("concession thresholds for agent 0 (u_max 0.9, u_min 0.1):");
    for beta in [0.3, 1.0, 3.0] {
        let path: Vec<f64> = (1..=deadline)
            .map(|t| concession_threshold(0.9, 0.1, t, deadline, beta))
            .collect::<Result<_, _>>()?;
        println!("  beta {beta:>3}: {path:.3?}");
    }

    for kind in [ProtocolKind::MediatedSingleText, ProtocolKind::MonotonicConcession, ProtocolKind::EliminationBidding] {
        let participants = profile
            .iter()
            .enumerate()
            .map(|(id, u)| Participant::new(id, u.clone(), StrategyConfig::time_dependent(1.0)))
            .collect();
        let mut session = NegotiationSession::new(0, agenda.clone(), participants, ProtocolConfig::new(kind, deadline), deadline, 0)?;
        let mut tick = 0;
        while session.is_active() {
            session.run_round(tick)?;
            tick += 1;
        }
        let outcome = session.outcome()?;
        let m = metrics(&outcome);
        println!(
            "{kind:?}: {} issue {:?} in {} rounds, welfare {:.3}, min {:.3}, nash {:.4}",
            outcome.status.label(),
            outcome.agreed_issue,
            outcome.rounds_used,
            m.social_welfare,
            m.min_utility,
            m.nash_product
        );
    }
    Ok(())
}
