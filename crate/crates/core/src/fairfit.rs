//! Per-member fairness fitting.
//!
//! A member predicts positive iff `task_score + sum_g w_g * group_score_g >= 0.5`.
//! The group weights `w` are chosen on the member's fitting fold to maximise
//! accuracy subject to a recall constraint measured on the *true* groups, while
//! the rule itself only sees the member's *predicted* group scores.
//!
//! Candidates come from a symmetric odd-resolution grid. Up to
//! [`GridSpec::exhaustive_max_groups`] groups the full Cartesian product is
//! searched; above that a coordinate-descent sweep is used (one coordinate at a
//! time over its full axis, at most [`COORDINATE_SWEEPS`] sweeps).
//!
//! Candidates are ranked by a total order, so the winner does not depend on
//! evaluation order or worker count:
//!
//! * feasible before infeasible;
//! * feasible: higher accuracy, then higher min recall, then the
//!   lexicographically smallest weight vector;
//! * infeasible: better constrained quantity (higher min recall, or lower
//!   equal-opportunity gap), then higher accuracy, then smallest weights.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{MemberScores, ScoreTable};
use crate::error::{Error, Result};
use crate::metrics::{metric_report, Counts, GroupConfusion, MetricReport};

pub const DECISION_THRESHOLD: f64 = 0.5;
pub const COORDINATE_SWEEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    MinRecall,
    EqualOpportunity,
    None,
}

impl ConstraintKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintKind::MinRecall => "min-recall",
            ConstraintKind::EqualOpportunity => "equal-opportunity",
            ConstraintKind::None => "none",
        }
    }
}

impl FromStr for ConstraintKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-recall" | "min_recall" => Ok(ConstraintKind::MinRecall),
            "equal-opportunity" | "equal_opportunity" => Ok(ConstraintKind::EqualOpportunity),
            "none" => Ok(ConstraintKind::None),
            other => Err(Error::InvalidArgument(format!("unknown constraint `{other}`"))),
        }
    }
}

/// `MinRecall`: every group's recall is at least `bound`.
/// `EqualOpportunity`: the recall gap is at most `bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessConstraint {
    pub kind: ConstraintKind,
    pub bound: f64,
}

impl FairnessConstraint {
    pub fn new(kind: ConstraintKind, bound: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&bound) {
            return Err(Error::InvalidArgument(format!("constraint bound {bound} outside [0, 1]")));
        }
        Ok(FairnessConstraint { kind, bound })
    }

    pub fn min_recall(k: f64) -> Result<Self> {
        Self::new(ConstraintKind::MinRecall, k)
    }

    pub fn equal_opportunity(eps: f64) -> Result<Self> {
        Self::new(ConstraintKind::EqualOpportunity, eps)
    }

    pub fn none() -> Self {
        FairnessConstraint {
            kind: ConstraintKind::None,
            bound: 0.0,
        }
    }

    pub fn is_satisfied(&self, min_recall: f64, eo_gap: f64) -> bool {
        match self.kind {
            ConstraintKind::MinRecall => min_recall >= self.bound,
            ConstraintKind::EqualOpportunity => eo_gap <= self.bound,
            ConstraintKind::None => true,
        }
    }

    /// Positive when satisfied with room to spare.
    pub fn slack(&self, min_recall: f64, eo_gap: f64) -> f64 {
        match self.kind {
            ConstraintKind::MinRecall => min_recall - self.bound,
            ConstraintKind::EqualOpportunity => self.bound - eo_gap,
            ConstraintKind::None => 0.0,
        }
    }
}

impl fmt::Display for FairnessConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConstraintKind::None => f.write_str("none"),
            kind => write!(f, "{}@{}", kind.as_str(), self.bound),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per axis; odd so that 0 is on the grid.
    pub resolution: usize,
    /// Axis range is `[-max_weight, +max_weight]`.
    pub max_weight: f64,
    /// Largest group count searched exhaustively.
    pub exhaustive_max_groups: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            resolution: 101,
            max_weight: 1.0,
            exhaustive_max_groups: 3,
        }
    }
}

impl GridSpec {
    pub fn new(resolution: usize, max_weight: f64) -> Result<Self> {
        let spec = GridSpec {
            resolution,
            max_weight,
            ..GridSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution % 2 == 0 {
            return Err(Error::EvenResolution(self.resolution));
        }
        if self.resolution < 3 {
            return Err(Error::InvalidGrid(format!(
                "resolution {} must be at least 3",
                self.resolution
            )));
        }
        if !(self.max_weight > 0.0 && self.max_weight.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "max weight {} must be positive and finite",
                self.max_weight
            )));
        }
        Ok(())
    }

    /// Weight at axis position `j`; the middle position is exactly 0.
    pub fn axis_value(&self, j: usize) -> f64 {
        let half = (self.resolution - 1) as i64;
        let num = 2 * j as i64 - half;
        self.max_weight * (num as f64 / half as f64)
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.resolution).map(|j| self.axis_value(j)).collect()
    }

    fn zero_index(&self) -> usize {
        (self.resolution - 1) / 2
    }
}

/// Every grid point in lexicographic order (group 0 varies slowest).
pub fn grid_candidates(
    spec: &GridSpec,
    n_groups: usize,
) -> Result<impl Iterator<Item = Vec<f64>> + '_> {
    spec.validate()?;
    if n_groups == 0 {
        return Err(Error::EmptyGroups);
    }
    let total = grid_size(spec.resolution, n_groups)?;
    Ok((0..total).map(move |k| {
        decode(k, spec.resolution, n_groups)
            .into_iter()
            .map(|j| spec.axis_value(j))
            .collect()
    }))
}

fn grid_size(resolution: usize, n_groups: usize) -> Result<usize> {
    u32::try_from(n_groups)
        .ok()
        .and_then(|g| resolution.checked_pow(g))
        .ok_or_else(|| Error::InvalidGrid("grid too large to enumerate".into()))
}

fn decode(mut k: usize, resolution: usize, n_groups: usize) -> Vec<usize> {
    let mut idx = vec![0; n_groups];
    for slot in idx.iter_mut().rev() {
        *slot = k % resolution;
        k /= resolution;
    }
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    Exhaustive,
    CoordinateDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub feasible: bool,
    pub candidates_evaluated: u64,
    pub fallback_used: bool,
    pub constraint_slack: f64,
    pub search: SearchStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberPolicy {
    pub member_id: usize,
    pub group_names: Vec<String>,
    pub weights: Vec<f64>,
    pub fitted_on: usize,
    pub constraint: FairnessConstraint,
    pub achieved: MetricReport,
}

/// Deterministic member decision; ties at the threshold predict positive.
#[inline]
pub fn decide(weights: &[f64], task_score: f64, group_scores: &[f64]) -> bool {
    let mut s = task_score;
    for (w, g) in weights.iter().zip(group_scores) {
        s += w * g;
    }
    s >= DECISION_THRESHOLD
}

impl MemberPolicy {
    pub fn predict(&self, scores: &MemberScores) -> Result<bool> {
        if scores.group_scores.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: scores.group_scores.len(),
            });
        }
        Ok(decide(&self.weights, scores.task_score, &scores.group_scores))
    }
}

pub fn apply_policy<'a, I>(policy: &MemberPolicy, scores: I) -> Result<Vec<bool>>
where
    I: IntoIterator<Item = &'a MemberScores>,
{
    scores.into_iter().map(|s| policy.predict(s)).collect()
}

/// One member's scores on its fitting fold, laid out for fast evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitFold {
    pub member_id: usize,
    pub fold_id: usize,
    pub group_names: Vec<String>,
    pub task_scores: Vec<f64>,
    /// Row-major, `n_samples x n_groups`.
    pub group_scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub groups: Vec<usize>,
}

impl FitFold {
    pub fn from_table(
        table: &ScoreTable,
        member_id: usize,
        fold_id: usize,
        indices: &[usize],
    ) -> Result<Self> {
        if member_id >= table.n_members() {
            return Err(Error::InvalidArgument(format!("no member {member_id}")));
        }
        let labels = table.labels_of(indices)?;
        let mut task_scores = Vec::with_capacity(indices.len());
        let mut group_scores = Vec::with_capacity(indices.len() * table.n_groups());
        for s in table.member_scores_of(member_id, indices) {
            task_scores.push(s.task_score);
            group_scores.extend_from_slice(&s.group_scores);
        }
        Ok(FitFold {
            member_id,
            fold_id,
            group_names: table.group_set().to_vec(),
            task_scores,
            group_scores,
            labels,
            groups: table.groups_of(indices),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_groups(&self) -> usize {
        self.group_names.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        let g = self.n_groups();
        if self.task_scores.len() != n || self.groups.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: self.task_scores.len().min(self.groups.len()),
            });
        }
        if self.group_scores.len() != n * g {
            return Err(Error::DimensionMismatch {
                expected: n * g,
                actual: self.group_scores.len(),
            });
        }
        if self.groups.iter().any(|&x| x >= g) {
            return Err(Error::UnknownGroup("group index out of range".into()));
        }
        Ok(())
    }

    pub fn confusion(&self, weights: &[f64]) -> GroupConfusion {
        let g = self.n_groups();
        let mut conf = GroupConfusion::new(g);
        for i in 0..self.len() {
            let pred = decide(weights, self.task_scores[i], &self.group_scores[i * g..(i + 1) * g]);
            conf.per_group[self.groups[i]].record(pred, self.labels[i]);
        }
        conf
    }
}

#[derive(Debug, Clone)]
struct Scored {
    index: Vec<usize>,
    correct: u64,
    min_recall: f64,
    eo_gap: f64,
    feasible: bool,
}

fn rank(constraint: &FairnessConstraint, a: &Scored, b: &Scored) -> Ordering {
    // Greater is better; the index comparison is reversed so smaller wins.
    let by_index = || b.index.cmp(&a.index);
    match (a.feasible, b.feasible) {
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (true, true) => a
            .correct
            .cmp(&b.correct)
            .then(a.min_recall.total_cmp(&b.min_recall))
            .then_with(by_index),
        (false, false) => {
            let quantity = match constraint.kind {
                ConstraintKind::EqualOpportunity => b.eo_gap.total_cmp(&a.eo_gap),
                _ => a.min_recall.total_cmp(&b.min_recall),
            };
            quantity.then(a.correct.cmp(&b.correct)).then_with(by_index)
        }
    }
}

struct Evaluator<'a> {
    fold: &'a FitFold,
    grid: &'a GridSpec,
    axis: Vec<f64>,
    constraint: &'a FairnessConstraint,
}

impl Evaluator<'_> {
    fn score(&self, index: Vec<usize>) -> Scored {
        let weights: Vec<f64> = index.iter().map(|&j| self.axis[j]).collect();
        let conf = self.fold.confusion(&weights);
        let (min_recall, eo_gap) = recall_extremes(&conf.per_group);
        let correct = conf.per_group.iter().map(Counts::correct).sum();
        Scored {
            feasible: self.constraint.is_satisfied(min_recall, eo_gap),
            index,
            correct,
            min_recall,
            eo_gap,
        }
    }

    fn better(&self, a: Scored, b: Scored) -> Scored {
        if rank(self.constraint, &a, &b) == Ordering::Less {
            b
        } else {
            a
        }
    }

    fn exhaustive(&self) -> Result<(Scored, u64)> {
        let g = self.fold.n_groups();
        let total = grid_size(self.grid.resolution, g)?;
        let best = (0..total)
            .into_par_iter()
            .map(|k| self.score(decode(k, self.grid.resolution, g)))
            .reduce_with(|a, b| self.better(a, b))
            .expect("grid is never empty");
        Ok((best, total as u64))
    }

    fn coordinate_descent(&self) -> (Scored, u64) {
        let g = self.fold.n_groups();
        let r = self.grid.resolution;
        let mut best = self.score(vec![self.grid.zero_index(); g]);
        let mut evaluated = 1u64;
        for _ in 0..COORDINATE_SWEEPS {
            let mut changed = false;
            for coord in 0..g {
                let base = best.index.clone();
                let candidate = (0..r)
                    .into_par_iter()
                    .map(|j| {
                        let mut idx = base.clone();
                        idx[coord] = j;
                        self.score(idx)
                    })
                    .reduce_with(|a, b| self.better(a, b))
                    .expect("axis is never empty");
                evaluated += r as u64;
                if candidate.index != best.index && rank(self.constraint, &candidate, &best) == Ordering::Greater {
                    best = candidate;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (best, evaluated)
    }
}

/// Minimum recall and recall gap over groups with positives.
/// Callers guarantee at least one such group.
fn recall_extremes(per_group: &[Counts]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in per_group.iter().filter_map(Counts::recall) {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi - lo)
}

pub fn fit_member(
    fold: &FitFold,
    constraint: &FairnessConstraint,
    grid: &GridSpec,
) -> Result<(MemberPolicy, FitDiagnostics)> {
    grid.validate()?;
    fold.validate()?;
    if fold.is_empty() {
        return Err(Error::EmptyFold);
    }
    if !fold.labels.iter().any(|&y| y) {
        return Err(Error::NoPositives);
    }
    let eval = Evaluator {
        fold,
        grid,
        axis: grid.axis(),
        constraint,
    };
    let (best, evaluated, search) = if fold.n_groups() <= grid.exhaustive_max_groups {
        let (b, n) = eval.exhaustive()?;
        (b, n, SearchStrategy::Exhaustive)
    } else {
        let (b, n) = eval.coordinate_descent();
        (b, n, SearchStrategy::CoordinateDescent)
    };
    let weights: Vec<f64> = best.index.iter().map(|&j| eval.axis[j]).collect();
    let achieved = metric_report(&fold.confusion(&weights))?;
    let diagnostics = FitDiagnostics {
        feasible: best.feasible,
        candidates_evaluated: evaluated,
        fallback_used: !best.feasible,
        constraint_slack: constraint.slack(best.min_recall, best.eo_gap),
        search,
    };
    let policy = MemberPolicy {
        member_id: fold.member_id,
        group_names: fold.group_names.clone(),
        weights,
        fitted_on: fold.fold_id,
        constraint: *constraint,
        achieved,
    };
    Ok((policy, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fold(task: &[f64], groups: &[usize], labels: &[bool], noise: f64) -> FitFold {
        let mut gs = Vec::new();
        for &g in groups {
            if g == 0 {
                gs.extend([1.0 - noise, noise]);
            } else {
                gs.extend([noise, 1.0 - noise]);
            }
        }
        FitFold {
            member_id: 0,
            fold_id: 0,
            group_names: vec!["a".into(), "b".into()],
            task_scores: task.to_vec(),
            group_scores: gs,
            labels: labels.to_vec(),
            groups: groups.to_vec(),
        }
    }

    fn policy(weights: Vec<f64>) -> MemberPolicy {
        MemberPolicy {
            member_id: 0,
            group_names: vec!["a".into(), "b".into()],
            weights,
            fitted_on: 0,
            constraint: FairnessConstraint::none(),
            achieved: MetricReport {
                n_samples: 1,
                accuracy: 1.0,
                recall: vec![Some(1.0), None],
                min_recall: 1.0,
                eo_gap: 0.0,
            },
        }
    }

    fn scores(task: f64, gs: [f64; 2]) -> MemberScores {
        MemberScores {
            member_id: 0,
            task_score: task,
            group_scores: gs.to_vec(),
        }
    }

    #[test]
    fn zero_weights_threshold_at_half_with_ties_positive() {
        let p = policy(vec![0.0, 0.0]);
        assert!(p.predict(&scores(0.7, [1.0, 0.0])).unwrap());
        assert!(p.predict(&scores(0.5, [1.0, 0.0])).unwrap());
        assert!(!p.predict(&scores(0.49, [1.0, 0.0])).unwrap());
    }

    #[test]
    fn group_weight_lifts_a_sample() {
        // 0.35 + 0.2 * 1 = 0.55
        let p = policy(vec![0.2, 0.0]);
        assert!(p.predict(&scores(0.35, [1.0, 0.0])).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let p = policy(vec![0.0, 0.0]);
        let s = MemberScores {
            member_id: 0,
            task_score: 0.5,
            group_scores: vec![1.0],
        };
        assert!(matches!(p.predict(&s), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn grid_enumeration() {
        let spec = GridSpec::new(3, 1.0).unwrap();
        let all: Vec<Vec<f64>> = grid_candidates(&spec, 2).unwrap().collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![-1.0, -1.0]);
        assert_eq!(all[1], vec![-1.0, 0.0]);
        assert_eq!(all[8], vec![1.0, 1.0]);
        assert_eq!(all.iter().filter(|w| w.iter().all(|&x| x == 0.0)).count(), 1);

        let spec = GridSpec::default();
        let axis: Vec<Vec<f64>> = grid_candidates(&spec, 1).unwrap().collect();
        assert_eq!(axis.len(), 101);
        assert_eq!(axis[50], vec![0.0]);
        assert!((axis[1][0] - axis[0][0] - 0.02).abs() < 1e-12);
        assert_eq!(axis[0][0], -1.0);
        assert_eq!(axis[100][0], 1.0);
    }

    #[test]
    fn even_resolution_is_rejected() {
        assert!(matches!(GridSpec::new(2, 1.0), Err(Error::EvenResolution(2))));
        assert!(matches!(GridSpec::new(1, 1.0), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn unconstrained_fit_is_no_worse_than_zero() {
        let f = fold(
            &[0.45, 0.55, 0.3, 0.6, 0.52, 0.2],
            &[0, 0, 1, 1, 1, 0],
            &[true, false, true, false, true, false],
            0.1,
        );
        let (p, d) = fit_member(&f, &FairnessConstraint::none(), &GridSpec::new(11, 1.0).unwrap()).unwrap();
        let zero_acc = metric_report(&f.confusion(&[0.0, 0.0])).unwrap().accuracy;
        assert!(p.achieved.accuracy >= zero_acc);
        assert!(d.feasible && !d.fallback_used);
        assert_eq!(d.candidates_evaluated, 121);
    }

    #[test]
    fn separable_fold_keeps_zero_weights() {
        let f = fold(
            &[0.9, 0.9, 0.1, 0.1, 0.9, 0.1],
            &[0, 1, 0, 1, 1, 0],
            &[true, true, false, false, true, false],
            0.0,
        );
        let (p, d) = fit_member(&f, &FairnessConstraint::min_recall(0.9).unwrap(), &GridSpec::default()).unwrap();
        assert!(d.feasible);
        assert_eq!(p.achieved.min_recall, 1.0);
        assert_eq!(p.achieved.accuracy, 1.0);
        // many weight vectors separate; the rule must still classify like w = 0
        assert_eq!(f.confusion(&p.weights), f.confusion(&[0.0, 0.0]));
    }

    #[test]
    fn infeasible_bound_falls_back_to_best_recall() {
        // group b positive at 0.0 can never be lifted by |w| <= 0.1
        let f = fold(&[0.9, 0.0, 0.1], &[0, 1, 0], &[true, true, false], 0.0);
        let c = FairnessConstraint::min_recall(1.0).unwrap();
        let (p, d) = fit_member(&f, &c, &GridSpec::new(3, 0.1).unwrap()).unwrap();
        assert!(!d.feasible && d.fallback_used);
        assert_eq!(p.achieved.min_recall, 0.0);
        assert_eq!(d.constraint_slack, -1.0);
    }

    #[test]
    fn fold_errors() {
        let empty = fold(&[], &[], &[], 0.0);
        let grid = GridSpec::new(3, 1.0).unwrap();
        assert_eq!(fit_member(&empty, &FairnessConstraint::none(), &grid), Err(Error::EmptyFold));
        let negatives = fold(&[0.2, 0.8], &[0, 1], &[false, false], 0.0);
        assert_eq!(
            fit_member(&negatives, &FairnessConstraint::min_recall(0.5).unwrap(), &grid),
            Err(Error::NoPositives)
        );
    }

    #[test]
    fn coordinate_descent_used_above_the_exhaustive_limit() {
        let mut f = fold(&[0.42, 0.2, 0.3, 0.45], &[0, 1, 0, 1], &[true, false, false, true], 0.0);
        f.group_names = vec!["a".into(), "b".into(), "c".into(), "d".into()];
        f.group_scores.clear();
        for &g in &f.groups {
            let mut row = vec![0.0; 4];
            row[g] = 1.0;
            f.group_scores.extend(row);
        }
        let (p, d) = fit_member(&f, &FairnessConstraint::min_recall(1.0).unwrap(), &GridSpec::new(21, 1.0).unwrap()).unwrap();
        assert_eq!(d.search, SearchStrategy::CoordinateDescent);
        assert!(d.feasible);
        assert_eq!(p.achieved.accuracy, 1.0);
    }

    #[test]
    fn constraint_parsing_and_display() {
        assert_eq!("min-recall".parse::<ConstraintKind>().unwrap(), ConstraintKind::MinRecall);
        assert!("parity".parse::<ConstraintKind>().is_err());
        assert_eq!(FairnessConstraint::min_recall(0.7).unwrap().to_string(), "min-recall@0.7");
        assert!(FairnessConstraint::min_recall(1.5).is_err());
    }
}
