//! Seeded synthetic score tables.
//!
//! Two score models are offered. `Bernoulli` draws each member's correctness
//! directly, which makes jury-style checks exact. `Latent` draws task scores
//! from per-(group, class) Gaussians clamped to [0, 1], so that shifting the
//! decision rule trades recall for false positives the way real heads do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataio::table::{MemberScores, Sample, SampleRecord, ScoreTable, Split};
use crate::error::{Error, Result};
use crate::theory::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentClass {
    pub mean: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreModel {
    /// `correct[group][member]`: probability the member is right at threshold 0.5.
    Bernoulli { correct: Vec<Vec<f64>> },
    /// `classes[group] = [negatives, positives]`.
    Latent { classes: Vec<[LatentClass; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correlation {
    Independent,
    /// Member noise is `sqrt(rho) * shared + sqrt(1 - rho) * own`.
    SharedLatent { rho: f64 },
}

impl Correlation {
    fn rho(self) -> f64 {
        match self {
            Correlation::Independent => 0.0,
            Correlation::SharedLatent { rho } => rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_members: usize,
    pub group_names: Vec<String>,
    /// `[negatives, positives]` per group.
    pub cell_counts: Vec<[usize; 2]>,
    pub model: ScoreModel,
    pub correlation: Correlation,
    /// Group heads put `1 - group_noise * u`, `u ~ U[0,1)`, on the true group
    /// and share the rest evenly over the other groups.
    pub group_noise: f64,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Two groups where positives of the smaller group `b` score lower.
    pub fn small_example(n_members: usize, seed: u64) -> Self {
        let class = |mean| LatentClass { mean, spread: 0.15 };
        SynthConfig {
            n_members,
            group_names: vec!["a".into(), "b".into()],
            cell_counts: vec![[200, 100], [60, 30]],
            model: ScoreModel::Latent {
                classes: vec![[class(0.35), class(0.65)], [class(0.35), class(0.52)]],
            },
            correlation: Correlation::Independent,
            group_noise: 0.2,
            test_fraction: 0.3,
            validation_fraction: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let g = self.group_names.len();
        if self.n_members == 0 {
            return bad("n_members must be at least 1".into());
        }
        if g < 2 {
            return bad("at least two groups are required".into());
        }
        if self.cell_counts.len() != g {
            return bad(format!("{} cell count pairs for {g} groups", self.cell_counts.len()));
        }
        if self.cell_counts.iter().flatten().any(|&c| c == 0) {
            return bad("every (group, label) cell needs at least one sample".into());
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        match &self.model {
            ScoreModel::Bernoulli { correct } => {
                if correct.len() != g || correct.iter().any(|r| r.len() != self.n_members) {
                    return bad("bernoulli probabilities must be [groups][members]".into());
                }
                if !correct.iter().flatten().all(|&p| unit(p)) {
                    return bad("correctness probabilities must lie in [0, 1]".into());
                }
            }
            ScoreModel::Latent { classes } => {
                if classes.len() != g {
                    return bad("latent classes must be given per group".into());
                }
                if classes
                    .iter()
                    .flatten()
                    .any(|c| !c.mean.is_finite() || !(c.spread >= 0.0 && c.spread.is_finite()))
                {
                    return bad("latent means must be finite and spreads non-negative".into());
                }
            }
        }
        if !unit(self.correlation.rho()) {
            return bad("rho must lie in [0, 1]".into());
        }
        if !unit(self.group_noise) {
            return bad("group_noise must lie in [0, 1]".into());
        }
        if !unit(self.test_fraction)
            || !unit(self.validation_fraction)
            || self.test_fraction + self.validation_fraction > 1.0
        {
            return bad("split fractions must lie in [0, 1] and sum to at most 1".into());
        }
        Ok(())
    }
}

pub fn synthesize(config: &SynthConfig) -> Result<ScoreTable> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_groups = config.group_names.len();
    let rho = config.correlation.rho();
    let (shared_w, own_w) = (rho.sqrt(), (1.0 - rho).sqrt());

    // Correctness cut-offs on the standard normal scale, Bernoulli mode only.
    let cutoffs: Option<Vec<Vec<f64>>> = match &config.model {
        ScoreModel::Bernoulli { correct } => Some(
            correct
                .iter()
                .map(|row| row.iter().map(|&p| bernoulli_cutoff(p)).collect())
                .collect(),
        ),
        ScoreModel::Latent { .. } => None,
    };

    let mut samples = Vec::new();
    for group in 0..n_groups {
        for label in [false, true] {
            let n = config.cell_counts[group][usize::from(label)];
            let n_test = (config.test_fraction * n as f64).round() as usize;
            let n_val = ((config.validation_fraction * n as f64).round() as usize).min(n - n_test);
            for j in 0..n {
                let split = if j < n_test {
                    Split::Test
                } else if j < n_test + n_val {
                    Split::Validation
                } else {
                    Split::Train
                };
                let shared: f64 = rng.sample(StandardNormal);
                let scores = (0..config.n_members)
                    .map(|member| {
                        let own: f64 = rng.sample(StandardNormal);
                        let z = shared_w * shared + own_w * own;
                        let task_score = match (&config.model, &cutoffs) {
                            (ScoreModel::Bernoulli { .. }, Some(cut)) => {
                                let correct = z < cut[group][member];
                                let u: f64 = rng.random();
                                bernoulli_score(label, correct, u)
                            }
                            (ScoreModel::Latent { classes }, _) => {
                                let c = classes[group][usize::from(label)];
                                (c.mean + c.spread * z).clamp(0.0, 1.0)
                            }
                            _ => unreachable!("cutoffs exist exactly in bernoulli mode"),
                        };
                        let u: f64 = rng.random();
                        MemberScores {
                            member_id: member,
                            task_score,
                            group_scores: group_head(group, n_groups, config.group_noise * u),
                        }
                    })
                    .collect();
                samples.push(Sample {
                    record: SampleRecord {
                        sample_id: format!("s{:06}", samples.len()),
                        label: Some(label),
                        group,
                        split,
                    },
                    scores,
                });
            }
        }
    }
    ScoreTable::new(config.group_names.clone(), config.n_members, samples)
}

fn bernoulli_cutoff(p: f64) -> f64 {
    if p >= 1.0 {
        f64::INFINITY
    } else if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        normal_quantile(p)
    }
}

/// Correct positives score in (0.5, 1], correct negatives in [0, 0.5).
fn bernoulli_score(label: bool, correct: bool, u: f64) -> f64 {
    let high = 0.5 + 0.5 * (1.0 - u);
    let low = 0.5 * u;
    if label == correct {
        high
    } else {
        low
    }
}

fn group_head(group: usize, n_groups: usize, noise: f64) -> Vec<f64> {
    let conf = 1.0 - noise;
    let rest = (1.0 - conf) / (n_groups - 1) as f64;
    (0..n_groups).map(|g| if g == group { conf } else { rest }).collect()
}
