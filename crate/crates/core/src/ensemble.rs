//! Majority-vote ensembles of fitted member policies.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{FoldAssignment, ScoreTable, Split};
use crate::error::{Error, Result};
use crate::fairfit::{fit_member, FairnessConstraint, FitDiagnostics, FitFold, GridSpec, MemberPolicy};

pub const DEFAULT_MEMBERS: usize = 21;
pub const ENSEMBLE_FORMAT: &str = "fairvote-ensemble/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Positive,
    Negative,
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive" => Ok(TieBreak::Positive),
            "negative" => Ok(TieBreak::Negative),
            other => Err(Error::InvalidArgument(format!("unknown tie-break `{other}`"))),
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieBreak::Positive => "positive",
            TieBreak::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairEnsemble {
    pub format: String,
    pub group_set: Vec<String>,
    pub n_members: usize,
    pub tie_break: TieBreak,
    pub constraint: FairnessConstraint,
    pub grid: GridSpec,
    pub members: Vec<MemberPolicy>,
    pub diagnostics: Vec<FitDiagnostics>,
}

impl FairEnsemble {
    pub fn new(members: Vec<MemberPolicy>, tie_break: TieBreak) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::InvalidArgument("an ensemble needs at least one member".into()))?;
        let group_set = first.group_names.clone();
        if let Some(m) = members.iter().find(|m| m.group_names != group_set) {
            return Err(Error::GroupSetMismatch {
                expected: group_set,
                actual: m.group_names.clone(),
            });
        }
        Ok(FairEnsemble {
            format: ENSEMBLE_FORMAT.into(),
            constraint: first.constraint,
            grid: GridSpec::default(),
            n_members: members.len(),
            diagnostics: Vec::new(),
            group_set,
            tie_break,
            members,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let e: FairEnsemble = serde_json::from_str(text)
            .map_err(|err| Error::MalformedFile(format!("ensemble file: {err}")))?;
        if e.format != ENSEMBLE_FORMAT {
            return Err(Error::MalformedFile(format!("unsupported ensemble format `{}`", e.format)));
        }
        if e.members.len() != e.n_members || e.members.is_empty() {
            return Err(Error::MalformedFile("member count does not match n_members".into()));
        }
        if e.members.iter().any(|m| m.group_names != e.group_set || m.weights.len() != e.group_set.len()) {
            return Err(Error::MalformedFile("member group sets disagree with the header".into()));
        }
        Ok(e)
    }
}

/// Fits member `i` on fold `i` using member `i`'s scores.
pub fn build_ensemble(
    table: &ScoreTable,
    folds: &FoldAssignment,
    constraint: &FairnessConstraint,
    grid: &GridSpec,
    tie_break: TieBreak,
) -> Result<FairEnsemble> {
    if folds.n_folds != table.n_members() {
        return Err(Error::FoldMemberMismatch {
            folds: folds.n_folds,
            members: table.n_members(),
        });
    }
    grid.validate()?;
    let fitted: Vec<(MemberPolicy, FitDiagnostics)> = (0..table.n_members())
        .into_par_iter()
        .map(|member| {
            let indices = folds.fold_indices(table, member);
            FitFold::from_table(table, member, member, &indices)
                .and_then(|fold| fit_member(&fold, constraint, grid))
                .map_err(|e| e.for_member(member))
        })
        .collect::<Result<_>>()?;
    let (members, diagnostics): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let mut ensemble = FairEnsemble::new(members, tie_break)?;
    ensemble.constraint = *constraint;
    ensemble.grid = *grid;
    ensemble.diagnostics = diagnostics;
    Ok(ensemble)
}

/// Positive iff votes > N/2, or votes = N/2 with a positive tie-break.
pub fn majority_vote(member_predictions: &[Vec<bool>], tie_break: TieBreak) -> Result<Vec<bool>> {
    let n = check_rectangular(member_predictions)?;
    let votes = vote_counts(member_predictions, n);
    let members = member_predictions.len();
    Ok(votes.into_iter().map(|v| vote_outcome(v, members, tie_break)).collect())
}

#[inline]
pub fn vote_outcome(votes: usize, members: usize, tie_break: TieBreak) -> bool {
    match (2 * votes).cmp(&members) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => tie_break == TieBreak::Positive,
    }
}

pub(crate) fn check_rectangular(rows: &[Vec<bool>]) -> Result<usize> {
    let n = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidArgument("no member predictions".into()))?;
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: bad.len(),
        });
    }
    Ok(n)
}

fn vote_counts(rows: &[Vec<bool>], n: usize) -> Vec<usize> {
    let mut votes = vec![0usize; n];
    for row in rows {
        for (v, &p) in votes.iter_mut().zip(row) {
            *v += usize::from(p);
        }
    }
    votes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub votes: usize,
    pub prediction: bool,
    /// Fraction of members that are wrong; present only when the label is known.
    pub w_point: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    /// Table indices of the predicted samples.
    pub indices: Vec<usize>,
    pub sample_ids: Vec<String>,
    /// `member_predictions[m][i]` is member `m`'s vote on sample `i`.
    pub member_predictions: Vec<Vec<bool>>,
    pub predictions: Vec<bool>,
    pub records: Vec<VoteRecord>,
}

impl EnsemblePrediction {
    /// `sample_id,votes,prediction[,w_point]`; the `w_point` column is
    /// written only when every predicted sample is labeled.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_w = !self.records.is_empty() && self.records.iter().all(|r| r.w_point.is_some());
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        if with_w {
            w.write_record(["sample_id", "votes", "prediction", "w_point"]).map_err(io)?;
        } else {
            w.write_record(["sample_id", "votes", "prediction"]).map_err(io)?;
        }
        for (id, r) in self.sample_ids.iter().zip(&self.records) {
            let votes = r.votes.to_string();
            let pred = if r.prediction { "1" } else { "0" };
            match (with_w, r.w_point) {
                (true, Some(wp)) => w.write_record([id.as_str(), &votes, pred, &wp.to_string()]),
                _ => w.write_record([id.as_str(), &votes, pred]),
            }
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Predicts the samples of `split` (all samples when `None`).
pub fn predict(
    ensemble: &FairEnsemble,
    table: &ScoreTable,
    split: Option<Split>,
) -> Result<EnsemblePrediction> {
    if table.group_set() != ensemble.group_set.as_slice() {
        return Err(Error::GroupSetMismatch {
            expected: ensemble.group_set.clone(),
            actual: table.group_set().to_vec(),
        });
    }
    if table.n_members() < ensemble.n_members {
        return Err(Error::InvalidArgument(format!(
            "table has {} members, ensemble needs {}",
            table.n_members(),
            ensemble.n_members
        )));
    }
    let indices: Vec<usize> = match split {
        Some(s) => table.split_indices(s),
        None => (0..table.len()).collect(),
    };
    let member_predictions: Vec<Vec<bool>> = ensemble
        .members
        .par_iter()
        .map(|policy| {
            indices
                .iter()
                .map(|&i| policy.predict(&table.samples()[i].scores[policy.member_id]))
                .collect::<Result<Vec<bool>>>()
                .map_err(|e| e.for_member(policy.member_id))
        })
        .collect::<Result<_>>()?;
    let n = indices.len();
    let members = ensemble.members.len();
    let votes = vote_counts(&member_predictions, n);
    let mut predictions = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);
    for (k, &i) in indices.iter().enumerate() {
        let prediction = vote_outcome(votes[k], members, ensemble.tie_break);
        let w_point = table.samples()[i].record.label.map(|y| {
            let wrong = if y { members - votes[k] } else { votes[k] };
            wrong as f64 / members as f64
        });
        predictions.push(prediction);
        records.push(VoteRecord {
            votes: votes[k],
            prediction,
            w_point,
        });
    }
    Ok(EnsemblePrediction {
        sample_ids: indices.iter().map(|&i| table.samples()[i].record.sample_id.clone()).collect(),
        indices,
        member_predictions,
        predictions,
        records,
    })
}
