use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of a sample's group-membership scores.
pub const GROUP_SCORE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::MalformedFile(format!("unknown split `{other}`"))),
        }
    }
}

/// Per-sample metadata. `group` indexes into the owning table's group set.
///
/// `label` is `None` for unlabeled rows (deployment-style prediction inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub sample_id: String,
    pub label: Option<bool>,
    pub group: usize,
    pub split: Split,
}

/// One member's outputs for one sample: the task head and the group heads.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberScores {
    pub member_id: usize,
    pub task_score: f64,
    pub group_scores: Vec<f64>,
}

impl MemberScores {
    pub fn validate(&self, n_groups: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.task_score) {
            return Err(Error::InvariantViolation(format!(
                "member {}: task_score {} outside [0, 1]",
                self.member_id, self.task_score
            )));
        }
        if self.group_scores.len() != n_groups {
            return Err(Error::InvariantViolation(format!(
                "member {}: {} group scores for {} groups",
                self.member_id,
                self.group_scores.len(),
                n_groups
            )));
        }
        if let Some(bad) = self.group_scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::InvariantViolation(format!(
                "member {}: group score {bad} outside [0, 1]",
                self.member_id
            )));
        }
        let sum: f64 = self.group_scores.iter().sum();
        if (sum - 1.0).abs() > GROUP_SCORE_TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "member {}: group scores sum to {sum}, not 1",
                self.member_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub record: SampleRecord,
    /// Indexed by member id.
    pub scores: Vec<MemberScores>,
}

/// Per-sample, per-member scores plus labels, groups and split tags.
///
/// Immutable once constructed; [`ScoreTable::new`] enforces every invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    group_set: Vec<String>,
    n_members: usize,
    samples: Vec<Sample>,
}

impl ScoreTable {
    /// Validates and builds a table.
    ///
    /// A table where every label is missing is accepted (it can only be used
    /// for prediction). Otherwise labeled samples must contain both classes.
    pub fn new(group_set: Vec<String>, n_members: usize, samples: Vec<Sample>) -> Result<Self> {
        if group_set.len() < 2 {
            return Err(Error::InvariantViolation(format!(
                "at least two groups are required, got {}",
                group_set.len()
            )));
        }
        let distinct: HashSet<&str> = group_set.iter().map(String::as_str).collect();
        if distinct.len() != group_set.len() {
            return Err(Error::InvariantViolation("duplicate group names".into()));
        }
        if n_members == 0 {
            return Err(Error::InvariantViolation("at least one member is required".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvariantViolation("table has no samples".into()));
        }
        let mut ids = HashSet::with_capacity(samples.len());
        let (mut pos, mut neg, mut unlabeled) = (0usize, 0usize, 0usize);
        for s in &samples {
            if !ids.insert(s.record.sample_id.as_str()) {
                return Err(Error::InvariantViolation(format!(
                    "duplicate sample_id `{}`",
                    s.record.sample_id
                )));
            }
            if s.record.group >= group_set.len() {
                return Err(Error::UnknownGroup(format!("index {}", s.record.group)));
            }
            match s.record.label {
                Some(true) => pos += 1,
                Some(false) => neg += 1,
                None => unlabeled += 1,
            }
            if s.scores.len() != n_members {
                return Err(Error::InvariantViolation(format!(
                    "sample `{}` has {} member scores, expected {}",
                    s.record.sample_id,
                    s.scores.len(),
                    n_members
                )));
            }
            for (m, ms) in s.scores.iter().enumerate() {
                if ms.member_id != m {
                    return Err(Error::InvariantViolation(format!(
                        "sample `{}`: member scores out of order",
                        s.record.sample_id
                    )));
                }
                ms.validate(group_set.len()).map_err(|e| match e {
                    Error::InvariantViolation(msg) => Error::InvariantViolation(format!(
                        "sample `{}`, {msg}",
                        s.record.sample_id
                    )),
                    other => other,
                })?;
            }
        }
        if unlabeled < samples.len() && (pos == 0 || neg == 0) {
            return Err(Error::InvariantViolation(
                "labeled samples must include at least one positive and one negative".into(),
            ));
        }
        Ok(ScoreTable {
            group_set,
            n_members,
            samples,
        })
    }

    pub fn group_set(&self) -> &[String] {
        &self.group_set
    }

    pub fn n_groups(&self) -> usize {
        self.group_set.len()
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_set.iter().position(|g| g == name)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.samples.iter().all(|s| s.record.label.is_some())
    }

    /// Indices of samples carrying `split`, in table order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.record.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Labels of the given samples; errors if any is missing.
    pub fn labels_of(&self, indices: &[usize]) -> Result<Vec<bool>> {
        indices
            .iter()
            .map(|&i| {
                self.samples[i].record.label.ok_or_else(|| {
                    Error::MissingLabels(format!("sample `{}`", self.samples[i].record.sample_id))
                })
            })
            .collect()
    }

    pub fn groups_of(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.samples[i].record.group).collect()
    }

    /// One member's scores for the given samples.
    pub fn member_scores_of(&self, member: usize, indices: &[usize]) -> Vec<&MemberScores> {
        indices.iter().map(|&i| &self.samples[i].scores[member]).collect()
    }
}
