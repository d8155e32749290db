//! Sample a group's members and score issues with their weights.

use mnegoti::model::{normalize_weights, Criterion, Direction};
use mnegoti::{AgentGroup, Distribution, Issue, PreferenceBounds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), mnegoti::Error> {
    let criteria = [
        Criterion { id: 0, name: "cost".into(), direction: Direction::Cost },
        Criterion { id: 1, name: "effectiveness".into(), direction: Direction::Benefit },
    ];
    let issues = [
        Issue::from_raw(0, "dike", &[0.8, 0.9], &criteria)?,
        Issue::from_raw(1, "warning_system", &[0.2, 0.4], &criteria)?,
    ];

    let bounds = PreferenceBounds::new(vec![(0.6, 0.9), (0.1, 0.4)])?;
    let frugal = AgentGroup::new(0, "frugal", bounds, Distribution::Uniform, 3)?;
    let bounds = PreferenceBounds::new(vec![(0.1, 0.3), (0.5, 1.0)])?;
    let cautious = AgentGroup::new(1, "cautious", bounds, Distribution::TruncatedNormal { mean: 0.8, sd: 0.2 }, 3)?;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut agents = frugal.spawn_members(&mut rng, 0);
    agents.extend(cautious.spawn_members(&mut rng, agents.len()));

    println!("normalize_weights([3, 1]) = {:?}", normalize_weights(&[3.0, 1.0]));
    for agent in &agents {
        let utilities = agent.utilities(&issues)?;
        println!(
            "agent {} (group {}): raw {:.3?} weights {:.3?} utilities {:.3?}",
            agent.id, agent.group_id, agent.raw_prefs, agent.weights, utilities
        );
    }
    Ok(())
}
