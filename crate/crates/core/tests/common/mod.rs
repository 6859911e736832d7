#![allow(dead_code)]

pub mod oracle;

use fairvote::fairfit::FitFold;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random fitting fold: `n` samples over `g` groups, at least one positive.
pub fn random_fold(seed: u64, n: usize, g: usize) -> FitFold {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    labels[0] = true;
    let groups: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
    let task_scores = labels
        .iter()
        .map(|&y| {
            let centre = if y { 0.55 } else { 0.4 };
            (centre + rng.random_range(-0.3..0.3f64)).clamp(0.0, 1.0)
        })
        .collect();
    let mut group_scores = Vec::with_capacity(n * g);
    for &grp in &groups {
        let noise: f64 = rng.random_range(0.0..0.3);
        for k in 0..g {
            group_scores.push(if k == grp { 1.0 - noise } else { noise / (g - 1) as f64 });
        }
    }
    FitFold {
        member_id: 0,
        fold_id: 0,
        group_names: (0..g).map(|k| format!("g{k}")).collect(),
        task_scores,
        group_scores,
        labels,
        groups,
    }
}

/// Random `members x n` prediction matrix together with labels and groups.
pub fn random_votes(seed: u64, members: usize, n: usize, g: usize) -> (Vec<Vec<bool>>, Vec<bool>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preds = (0..members).map(|_| (0..n).map(|_| rng.random_bool(0.5)).collect()).collect();
    let labels = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let groups = (0..n).map(|_| rng.random_range(0..g)).collect();
    (preds, labels, groups)
}
