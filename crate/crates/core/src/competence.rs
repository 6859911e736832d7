//! Competence curves and error-improvement diagnostics for majority votes.
//!
//! For each sample, `W` is the fraction of members that get it wrong. On a
//! restricted subset of samples the competence curve is
//!
//! ```text
//! C(t) = P(W in [t, 1/2)) - P(W in [1/2, 1 - t]),   t in [0, 1/2)
//! ```
//!
//! and the ensemble is competent on that subset when `C(t) >= 0` everywhere.
//! The violation score is `max_t max(0, -C(t))`, so it is 0 exactly when the
//! subset is competent over the grid.
//!
//! `W` values are multiples of `1/N`, so interval membership is tested with a
//! `1e-12` slack to absorb rounding in `1 - t`.

use serde::{Deserialize, Serialize};

use crate::ensemble::check_rectangular;
use crate::error::{Error, Result};

const INTERVAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "group", rename_all = "snake_case")]
pub enum Restriction {
    All,
    Positives,
    Negatives,
    GroupPositives(usize),
    GroupNegatives(usize),
}

impl Restriction {
    pub fn selects(&self, label: bool, group: usize) -> bool {
        match *self {
            Restriction::All => true,
            Restriction::Positives => label,
            Restriction::Negatives => !label,
            Restriction::GroupPositives(g) => label && group == g,
            Restriction::GroupNegatives(g) => !label && group == g,
        }
    }

    pub fn mask(&self, labels: &[bool], groups: &[usize]) -> Vec<bool> {
        labels.iter().zip(groups).map(|(&y, &g)| self.selects(y, g)).collect()
    }

    /// Short name such as `positives` or `group_positives[b]`.
    pub fn name(&self, group_names: &[String]) -> String {
        let g = |i: usize| group_names.get(i).cloned().unwrap_or_else(|| i.to_string());
        match *self {
            Restriction::All => "all".into(),
            Restriction::Positives => "positives".into(),
            Restriction::Negatives => "negatives".into(),
            Restriction::GroupPositives(i) => format!("group_positives[{}]", g(i)),
            Restriction::GroupNegatives(i) => format!("group_negatives[{}]", g(i)),
        }
    }
}

/// `W_i = (# members wrong on sample i) / N`.
pub fn per_point_error(member_predictions: &[Vec<bool>], labels: &[bool]) -> Result<Vec<f64>> {
    let n = check_rectangular(member_predictions)?;
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let members = member_predictions.len() as f64;
    Ok(wrong_counts(member_predictions, labels)
        .into_iter()
        .map(|w| w as f64 / members)
        .collect())
}

fn wrong_counts(member_predictions: &[Vec<bool>], labels: &[bool]) -> Vec<u64> {
    let mut wrong = vec![0u64; labels.len()];
    for row in member_predictions {
        for ((w, &p), &y) in wrong.iter_mut().zip(row).zip(labels) {
            *w += u64::from(p != y);
        }
    }
    wrong
}

/// All multiples of `1/(2N)` below 1/2.
///
/// `C` is piecewise constant with breakpoints at multiples of `1/N`; the
/// half-steps add one point inside each open piece, which matters for even `N`
/// where `W = 1/2` is attainable.
pub fn default_t_grid(n_members: usize) -> Vec<f64> {
    let denom = 2 * n_members.max(1);
    (0..)
        .map(|j| j as f64 / denom as f64)
        .take_while(|&t| t < 0.5)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetenceCurve {
    pub restriction: Option<Restriction>,
    pub n_samples: usize,
    pub t_grid: Vec<f64>,
    pub c_values: Vec<f64>,
    pub violation: f64,
}

impl CompetenceCurve {
    pub fn is_competent(&self) -> bool {
        self.violation == 0.0
    }
}

pub fn competence_curve(w: &[f64], mask: &[bool], t_grid: &[f64]) -> Result<CompetenceCurve> {
    if mask.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: mask.len(),
        });
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(0.0..0.5).contains(&t)) {
        return Err(Error::InvalidArgument(format!("t = {t} is outside [0, 1/2)")));
    }
    let selected: Vec<f64> = w.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| x).collect();
    if selected.is_empty() {
        return Err(Error::EmptyRestriction);
    }
    let n = selected.len() as f64;
    let c_values: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let mut good = 0usize;
            let mut bad = 0usize;
            for &x in &selected {
                if x >= 0.5 - INTERVAL_EPS {
                    if x <= 1.0 - t + INTERVAL_EPS {
                        bad += 1;
                    }
                } else if x >= t - INTERVAL_EPS {
                    good += 1;
                }
            }
            (good as f64 - bad as f64) / n
        })
        .collect();
    let violation = c_values.iter().filter(|&&c| c < 0.0).fold(0.0f64, |acc, &c| acc.max(-c));
    Ok(CompetenceCurve {
        restriction: None,
        n_samples: selected.len(),
        t_grid: t_grid.to_vec(),
        c_values,
        violation,
    })
}

fn curve_for(
    member_predictions: &[Vec<bool>],
    labels: &[bool],
    groups: &[usize],
    restriction: Restriction,
) -> Result<CompetenceCurve> {
    let w = per_point_error(member_predictions, labels)?;
    if groups.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: groups.len(),
        });
    }
    let mut curve = competence_curve(
        &w,
        &restriction.mask(labels, groups),
        &default_t_grid(member_predictions.len()),
    )?;
    curve.restriction = Some(restriction);
    Ok(curve)
}

/// Competence curve on an arbitrary restriction with the default grid.
pub fn restricted_competence(
    member_predictions: &[Vec<bool>],
    labels: &[bool],
    groups: &[usize],
    restriction: Restriction,
) -> Result<CompetenceCurve> {
    curve_for(member_predictions, labels, groups, restriction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupwiseCompetence {
    /// `None` for groups without positives (skipped).
    pub curves: Vec<Option<CompetenceCurve>>,
    pub competent: bool,
}

impl GroupwiseCompetence {
    pub fn skipped(&self) -> Vec<usize> {
        self.curves
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(g, _)| g)
            .collect()
    }

    pub fn mean_violation(&self) -> Option<f64> {
        let v: Vec<f64> = self.curves.iter().flatten().map(|c| c.violation).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Competence on each group's positives.
///
/// The ensemble is restricted-groupwise competent iff every evaluated group
/// has violation 0 (`C >= 0` is accepted as competent).
pub fn groupwise_competence(
    member_predictions: &[Vec<bool>],
    labels: &[bool],
    groups: &[usize],
    n_groups: usize,
) -> Result<GroupwiseCompetence> {
    let curves = (0..n_groups)
        .map(|g| match curve_for(member_predictions, labels, groups, Restriction::GroupPositives(g)) {
            Ok(c) => Ok(Some(c)),
            Err(Error::EmptyRestriction) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let competent = curves.iter().flatten().all(CompetenceCurve::is_competent);
    Ok(GroupwiseCompetence { curves, competent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub restriction: Restriction,
    pub n_samples: usize,
    pub mean_member_error: f64,
    pub ensemble_error: f64,
    pub eir: f64,
    /// Disagreement over independent draws `h, h' ~ rho` (self-pairs included).
    pub der: f64,
    /// Disagreement over distinct unordered member pairs.
    pub der_distinct_pairs: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// `max(der - 1, 0) <= eir <= der`, decided in exact integer arithmetic.
    pub bounds_hold: bool,
    pub upper_bound_holds: bool,
    pub lower_bound_holds: bool,
}

/// Error improvement rate and disagreement-error ratio on a restriction.
pub fn improvement_report(
    member_predictions: &[Vec<bool>],
    ensemble_predictions: &[bool],
    labels: &[bool],
    groups: &[usize],
    restriction: Restriction,
) -> Result<ImprovementReport> {
    let n_all = check_rectangular(member_predictions)?;
    for len in [ensemble_predictions.len(), labels.len(), groups.len()] {
        if len != n_all {
            return Err(Error::LengthMismatch {
                expected: n_all,
                actual: len,
            });
        }
    }
    let members = member_predictions.len() as i128;
    let mut n = 0i128;
    let mut member_errors = 0i128; // E: sum over samples of wrong votes
    let mut ensemble_errors = 0i128; // M
    let mut disagree = 0i128; // sum over samples of v (N - v)
    for i in 0..n_all {
        if !restriction.selects(labels[i], groups[i]) {
            continue;
        }
        n += 1;
        let positive_votes = member_predictions.iter().filter(|r| r[i]).count() as i128;
        let wrong = if labels[i] { members - positive_votes } else { positive_votes };
        member_errors += wrong;
        ensemble_errors += i128::from(ensemble_predictions[i] != labels[i]);
        disagree += positive_votes * (members - positive_votes);
    }
    if n == 0 {
        return Err(Error::EmptyRestriction);
    }
    let ensemble_error = ensemble_errors as f64 / n as f64;
    if member_errors == 0 {
        return Err(Error::ZeroMemberError { ensemble_error });
    }
    let (nf, mf, ef) = (n as f64, members as f64, member_errors as f64);
    let mean_member_error = ef / (nf * mf);
    let eir = (ef - mf * ensemble_errors as f64) / ef;
    // E_{h,h'}[D] = sum 2 v (N - v) / (n N^2); divided by E / (n N).
    let der = 2.0 * disagree as f64 / (mf * ef);
    let der_distinct_pairs = if members > 1 {
        let pairs = mf * (mf - 1.0) / 2.0;
        (disagree as f64 / (nf * pairs)) / mean_member_error
    } else {
        0.0
    };

    // eir = (E - N M) / E and der = 2 D / (N E) with E > 0.
    let gain = members * (member_errors - members * ensemble_errors); // N (E - N M)
    let upper_bound_holds = gain <= 2 * disagree;
    let lower_bound_holds = ensemble_errors * members <= member_errors && gain >= 2 * disagree - members * member_errors;
    Ok(ImprovementReport {
        restriction,
        n_samples: n as usize,
        mean_member_error,
        ensemble_error,
        eir,
        der,
        der_distinct_pairs,
        lower_bound: (der - 1.0).max(0.0),
        upper_bound: der,
        bounds_hold: upper_bound_holds && lower_bound_holds,
        upper_bound_holds,
        lower_bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint_thirds() -> (Vec<Vec<bool>>, Vec<bool>) {
        // 3 members, 3 samples, all positive; member m is wrong only on sample m.
        let preds = (0..3).map(|m| (0..3).map(|i| i != m).collect()).collect();
        (preds, vec![true; 3])
    }

    #[test]
    fn point_errors() {
        assert_eq!(per_point_error(&[vec![true], vec![true]], &[true]).unwrap(), vec![0.0]);
        let four = vec![vec![true], vec![false], vec![true], vec![false]];
        assert_eq!(per_point_error(&four, &[true]).unwrap(), vec![0.5]);
        let three = vec![vec![true], vec![true], vec![false]];
        assert_eq!(per_point_error(&three, &[false]).unwrap(), vec![2.0 / 3.0]);
    }

    #[test]
    fn perfect_ensemble_curve() {
        let curve = competence_curve(&[0.0; 4], &[true; 4], &default_t_grid(3)).unwrap();
        assert_eq!(curve.c_values[0], 1.0);
        assert!(curve.c_values[1..].iter().all(|&c| c == 0.0));
        assert_eq!(curve.violation, 0.0);
    }

    #[test]
    fn two_point_curve_by_hand() {
        let curve = competence_curve(&[0.3, 0.6], &[true, true], &[0.0, 0.3, 0.35]).unwrap();
        assert_eq!(curve.c_values, vec![0.0, 0.0, -0.5]);
        assert_eq!(curve.violation, 0.5);
    }

    #[test]
    fn curve_ignores_samples_outside_the_mask() {
        let base = competence_curve(&[0.0, 0.2, 0.9], &[true, true, false], &[0.0, 0.1]).unwrap();
        let moved = competence_curve(&[0.0, 0.2, 0.1], &[true, true, false], &[0.0, 0.1]).unwrap();
        assert_eq!(base.c_values, moved.c_values);
    }

    #[test]
    fn empty_restriction_and_bad_t() {
        assert_eq!(competence_curve(&[0.1], &[false], &[0.0]), Err(Error::EmptyRestriction));
        assert!(competence_curve(&[0.1], &[true], &[0.5]).is_err());
    }

    #[test]
    fn default_grid_covers_half_steps() {
        assert_eq!(default_t_grid(3), vec![0.0, 1.0 / 6.0, 2.0 / 6.0]);
        assert_eq!(default_t_grid(4), vec![0.0, 0.125, 0.25, 0.375]);
    }

    #[test]
    fn even_ensembles_see_the_half_point() {
        // N = 4, all W = 1/2: C(t) = -1 for t in (1/4, 1/2) only via the half-step.
        let preds = vec![vec![true], vec![true], vec![false], vec![false]];
        let curve = restricted_competence(&preds, &[true], &[0], Restriction::All).unwrap();
        assert_eq!(curve.violation, 1.0);
    }

    #[test]
    fn single_group_reduces_to_positives() {
        let preds = vec![vec![true, false, true, true], vec![false, false, true, true], vec![true, true, false, false]];
        let labels = [true, true, false, true];
        let groups = [0, 0, 0, 0];
        let gw = groupwise_competence(&preds, &labels, &groups, 1).unwrap();
        let pos = restricted_competence(&preds, &labels, &groups, Restriction::Positives).unwrap();
        assert_eq!(gw.curves[0].as_ref().unwrap().c_values, pos.c_values);
    }

    #[test]
    fn groups_without_positives_are_skipped() {
        let preds = vec![vec![true, false]];
        let gw = groupwise_competence(&preds, &[true, false], &[0, 1], 2).unwrap();
        assert_eq!(gw.skipped(), vec![1]);
        assert!(gw.competent);
    }

    #[test]
    fn identical_members_have_zero_der_and_eir() {
        let preds = vec![vec![true, false, true], vec![true, false, true]];
        let labels = [true, true, false];
        let r = improvement_report(&preds, &preds[0], &labels, &[0, 0, 0], Restriction::All).unwrap();
        assert_eq!((r.der, r.eir, r.lower_bound), (0.0, 0.0, 0.0));
        assert!(r.bounds_hold);
    }

    #[test]
    fn disjoint_thirds_by_hand() {
        let (preds, labels) = disjoint_thirds();
        let ens = vec![true; 3];
        let r = improvement_report(&preds, &ens, &labels, &[0; 3], Restriction::All).unwrap();
        assert!((r.mean_member_error - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.ensemble_error, 0.0);
        assert_eq!(r.eir, 1.0);
        // distinct pairs disagree on 2/3 of samples: (2/3) / (1/3) = 2
        assert!((r.der_distinct_pairs - 2.0).abs() < 1e-12);
        // independent draws: 2 * (1/3)(2/3) = 4/9 disagreement, ratio 4/3
        assert!((r.der - 4.0 / 3.0).abs() < 1e-12);
        assert!(r.bounds_hold);
    }

    #[test]
    fn group_positive_eir_is_relative_recall_gain() {
        let preds = vec![
            vec![true, false, true, false, true],
            vec![false, true, true, true, false],
            vec![true, true, false, true, true],
        ];
        let labels = [true, true, true, false, true];
        let groups = [0, 0, 1, 0, 0];
        let ens = crate::ensemble::majority_vote(&preds, crate::ensemble::TieBreak::Positive).unwrap();
        let r = improvement_report(&preds, &ens, &labels, &groups, Restriction::GroupPositives(0)).unwrap();
        let idx: Vec<usize> = (0..5).filter(|&i| labels[i] && groups[i] == 0).collect();
        let recall = |p: &[bool]| idx.iter().filter(|&&i| p[i]).count() as f64 / idx.len() as f64;
        let mean_recall = preds.iter().map(|p| recall(p)).sum::<f64>() / 3.0;
        let gain = (recall(&ens) - mean_recall) / (1.0 - mean_recall);
        assert!((r.eir - gain).abs() < 1e-12);
    }

    #[test]
    fn zero_member_error() {
        let preds = vec![vec![true], vec![true]];
        assert_eq!(
            improvement_report(&preds, &[true], &[true], &[0], Restriction::All),
            Err(Error::ZeroMemberError { ensemble_error: 0.0 })
        );
    }

    #[test]
    fn incompetent_restriction_can_break_the_lower_bound() {
        // every sample has W = 2/3: EIR = -1/2 < 0
        let preds = vec![vec![true], vec![false], vec![false]];
        let r = improvement_report(&preds, &[false], &[true], &[0], Restriction::All).unwrap();
        assert_eq!(r.eir, -0.5);
        assert!(r.upper_bound_holds);
        assert!(!r.lower_bound_holds);
    }
}
