//! Brute-force reference implementations used as test oracles.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Agreed(usize),
    NoAgreement,
}

/// (verdict, rounds used); issues are agenda positions.
pub type OracleOutcome = (Verdict, u32);

pub fn threshold(utilities: &[f64], t: u32, deadline: u32, beta: f64) -> f64 {
    let hi = utilities.iter().cloned().fold(f64::MIN, f64::max);
    let lo = utilities.iter().cloned().fold(f64::MAX, f64::min);
    if t == deadline {
        return lo;
    }
    if t == 1 {
        return hi;
    }
    let x = (t - 1) as f64 / (deadline - 1) as f64;
    hi - (hi - lo) * x.powf(1.0 / beta)
}

fn sum(profile: &[Vec<f64>], issue: usize) -> f64 {
    profile.iter().map(|u| u[issue]).sum()
}

/// Highest welfare among `candidates`, first listed wins ties.
fn best_by_welfare(profile: &[Vec<f64>], candidates: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &i in candidates {
        if best.is_none_or(|b| sum(profile, i) > sum(profile, b)) {
            best = Some(i);
        }
    }
    best
}

pub fn mediated(profile: &[Vec<f64>], betas: &[f64], deadline: u32) -> OracleOutcome {
    let n = profile[0].len();
    let mut remaining: Vec<usize> = (0..n).collect();
    for t in 1..=deadline {
        let Some(candidate) = best_by_welfare(profile, &remaining) else {
            return (Verdict::NoAgreement, t - 1);
        };
        let accepted = profile
            .iter()
            .zip(betas)
            .all(|(u, &b)| u[candidate] >= threshold(u, t, deadline, b));
        if accepted {
            return (Verdict::Agreed(candidate), t);
        }
        remaining.retain(|&i| i != candidate);
        if remaining.is_empty() {
            return (Verdict::NoAgreement, t);
        }
    }
    (Verdict::NoAgreement, deadline)
}

pub fn concession(profile: &[Vec<f64>], betas: &[f64], deadline: u32) -> OracleOutcome {
    let n = profile[0].len();
    for t in 1..=deadline {
        let common: Vec<usize> = (0..n)
            .filter(|&i| {
                profile
                    .iter()
                    .zip(betas)
                    .all(|(u, &b)| u[i] >= threshold(u, t, deadline, b))
            })
            .collect();
        if let Some(best) = best_by_welfare(profile, &common) {
            return (Verdict::Agreed(best), t);
        }
    }
    (Verdict::NoAgreement, deadline)
}

/// Elimination voting with plurality at the deadline.
pub fn bidding(profile: &[Vec<f64>], deadline: u32) -> OracleOutcome {
    let n = profile[0].len();
    let mut alive: Vec<usize> = (0..n).collect();
    for t in 1..=deadline {
        let mut votes = vec![0usize; n];
        for u in profile {
            let mut bid = alive[0];
            for &i in &alive {
                if u[i] > u[bid] {
                    bid = i;
                }
            }
            votes[bid] += 1;
        }
        if let Some(&i) = alive.iter().find(|&&i| votes[i] == profile.len()) {
            return (Verdict::Agreed(i), t);
        }
        if t == deadline {
            let mut top = alive[0];
            for &i in &alive {
                if votes[i] > votes[top] {
                    top = i;
                }
            }
            return (Verdict::Agreed(top), t);
        }
        let mut loser = alive[0];
        for &i in &alive {
            if votes[i] < votes[loser] {
                loser = i;
            }
        }
        alive.retain(|&i| i != loser);
        if alive.len() == 1 {
            return (Verdict::Agreed(alive[0]), t);
        }
    }
    unreachable!("the deadline round always decides")
}

/// One random instance on the utility grid.
pub struct Instance {
    pub profile: Vec<Vec<f64>>,
    pub deadline: u32,
}

pub fn grid_instance(rng: &mut ChaCha8Rng) -> Instance {
    let agents = rng.random_range(2..=4);
    let issues = rng.random_range(2..=5);
    let profile = (0..agents)
        .map(|_| (0..issues).map(|_| GRID[rng.random_range(0..GRID.len())]).collect())
        .collect();
    let deadline = [1, 3, 5][rng.random_range(0..3)];
    Instance { profile, deadline }
}

/// Every 2-agent, 2-issue grid profile.
pub fn all_two_by_two() -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    for a in GRID {
        for b in GRID {
            for c in GRID {
                for d in GRID {
                    out.push(vec![vec![a, b], vec![c, d]]);
                }
            }
        }
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}
