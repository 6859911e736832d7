//! Fairness-accuracy frontiers, FairAUC and bootstrap intervals.
//!
//! A frontier is built from *evaluated configurations*: the test-split
//! predictions of each configuration. Keeping predictions (not only the
//! summary point) lets the bootstrap recompute every point on a resample.
//!
//! FairAUC averages, over thresholds `t`, the best accuracy of any point whose
//! fairness value `r` is at least `t`. For equal-opportunity frontiers
//! `r = 1 - eo_gap`, so "r >= t" always reads "at least this fair".

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{FoldAssignment, ScoreTable, Split};
use crate::ensemble::{build_ensemble, predict, FairEnsemble, TieBreak};
use crate::error::{Error, Result};
use crate::fairfit::{ConstraintKind, FairnessConstraint, GridSpec};
use crate::metrics::{confusion_by_group, metric_report};

/// Slack on `r >= t`, so that e.g. a recall of exactly 7/10 meets t = 0.7
/// however the grid value was rounded.
pub const THRESHOLD_EPS: f64 = 1e-12;
pub const DEFAULT_BOOTSTRAP: usize = 200;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointSource {
    ConstrainedEnsemble,
    GlobalThresholdBaseline,
    ConstantPositive,
}

impl PointSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PointSource::ConstrainedEnsemble => "constrained-ensemble",
            PointSource::GlobalThresholdBaseline => "global-threshold-baseline",
            PointSource::ConstantPositive => "constant-positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessMetric {
    #[default]
    MinRecall,
    /// Reported as `1 - eo_gap`.
    EoGap,
}

impl FairnessMetric {
    pub fn for_constraint(kind: ConstraintKind) -> Self {
        match kind {
            ConstraintKind::EqualOpportunity => FairnessMetric::EoGap,
            _ => FairnessMetric::MinRecall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub config: String,
    pub source: PointSource,
    pub accuracy: f64,
    pub fairness_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub metric: FairnessMetric,
    pub points: Vec<FrontierPoint>,
}

impl Frontier {
    /// `config,source,accuracy,fairness_value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["config", "source", "accuracy", "fairness_value"]).map_err(io)?;
        for p in &self.points {
            w.write_record([
                p.config.as_str(),
                p.source.as_str(),
                &p.accuracy.to_string(),
                &p.fairness_value.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedConfig {
    pub config: String,
    pub source: PointSource,
    pub predictions: Vec<bool>,
}

/// Per-configuration predictions on a fixed evaluation sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierData {
    pub metric: FairnessMetric,
    pub labels: Vec<bool>,
    pub groups: Vec<usize>,
    pub n_groups: usize,
    pub configs: Vec<EvaluatedConfig>,
    /// Append the always-positive classifier to every frontier.
    pub include_constant_positive: bool,
}

impl FrontierData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frontier(&self) -> Result<Frontier> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.frontier_on(&all)
    }

    /// Frontier recomputed on `indices` (repeats allowed, as in a resample).
    pub fn frontier_on(&self, indices: &[usize]) -> Result<Frontier> {
        if indices.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        let labels: Vec<bool> = indices.iter().map(|&i| self.labels[i]).collect();
        let groups: Vec<usize> = indices.iter().map(|&i| self.groups[i]).collect();
        let point = |config: &str, source: PointSource, preds: &[bool]| -> Result<FrontierPoint> {
            let report = metric_report(&confusion_by_group(preds, &labels, &groups, self.n_groups)?)?;
            let fairness_value = match self.metric {
                FairnessMetric::MinRecall => report.min_recall,
                FairnessMetric::EoGap => 1.0 - report.eo_gap,
            };
            Ok(FrontierPoint {
                config: config.to_string(),
                source,
                accuracy: report.accuracy,
                fairness_value,
            })
        };
        let mut points = self
            .configs
            .iter()
            .map(|c| {
                let preds: Vec<bool> = indices.iter().map(|&i| c.predictions[i]).collect();
                point(&c.config, c.source, &preds)
            })
            .collect::<Result<Vec<_>>>()?;
        if self.include_constant_positive {
            points.push(point("constant-positive", PointSource::ConstantPositive, &vec![true; indices.len()])?);
        }
        Ok(Frontier {
            metric: self.metric,
            points,
        })
    }
}

/// Predicts `split` with each ensemble and collects the results.
pub fn evaluate_ensembles(
    ensembles: &[FairEnsemble],
    table: &ScoreTable,
    split: Split,
    metric: FairnessMetric,
) -> Result<FrontierData> {
    let indices = table.split_indices(split);
    if indices.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let configs = ensembles
        .iter()
        .map(|e| {
            Ok(EvaluatedConfig {
                config: e.constraint.to_string(),
                source: PointSource::ConstrainedEnsemble,
                predictions: predict(e, table, Some(split))?.predictions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrontierData {
        metric,
        labels: table.labels_of(&indices)?,
        groups: table.groups_of(&indices),
        n_groups: table.n_groups(),
        configs,
        include_constant_positive: true,
    })
}

/// One ensemble per constraint, each evaluated on the test split.
pub fn build_frontier(
    table: &ScoreTable,
    sweep: &[FairnessConstraint],
    folds: &FoldAssignment,
    grid: &GridSpec,
    tie_break: TieBreak,
) -> Result<(FrontierData, Vec<FairEnsemble>)> {
    let first = sweep
        .first()
        .ok_or_else(|| Error::InvalidArgument("constraint sweep is empty".into()))?;
    let metric = FairnessMetric::for_constraint(first.kind);
    let ensembles = sweep
        .iter()
        .map(|c| build_ensemble(table, folds, c, grid, tie_break))
        .collect::<Result<Vec<_>>>()?;
    let data = evaluate_ensembles(&ensembles, table, Split::Test, metric)?;
    Ok((data, ensembles))
}

/// Single-model baseline: predict `score >= tau` for each threshold.
pub fn global_threshold_frontier(
    scores: &[f64],
    labels: &[bool],
    groups: &[usize],
    n_groups: usize,
    thresholds: &[f64],
    metric: FairnessMetric,
) -> Result<FrontierData> {
    if scores.len() != labels.len() || groups.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: scores.len().min(groups.len()),
        });
    }
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("threshold {t} outside [0, 1]")));
    }
    let configs = thresholds
        .iter()
        .map(|&tau| EvaluatedConfig {
            config: format!("global@{tau}"),
            source: PointSource::GlobalThresholdBaseline,
            predictions: scores.iter().map(|&s| s >= tau).collect(),
        })
        .collect();
    Ok(FrontierData {
        metric,
        labels: labels.to_vec(),
        groups: groups.to_vec(),
        n_groups,
        configs,
        include_constant_positive: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineSelection {
    /// Per fairness target, pick the threshold on validation, report on test.
    #[default]
    Validation,
    /// Trace every threshold directly on test.
    Test,
}

impl FromStr for BaselineSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validation" => Ok(BaselineSelection::Validation),
            "test" => Ok(BaselineSelection::Test),
            other => Err(Error::InvalidArgument(format!("unknown selection mode `{other}`"))),
        }
    }
}

/// Global-threshold baseline on one member's task scores.
///
/// With [`BaselineSelection::Validation`], each target `t` picks the threshold
/// with the best validation accuracy among those whose validation fairness
/// value is at least `t` (or the fairest one when none qualifies); the chosen
/// thresholds are then evaluated on the test split.
pub fn baseline_frontier(
    table: &ScoreTable,
    member: usize,
    thresholds: &[f64],
    targets: &[f64],
    selection: BaselineSelection,
    metric: FairnessMetric,
) -> Result<FrontierData> {
    if member >= table.n_members() {
        return Err(Error::InvalidArgument(format!("no member {member}")));
    }
    let side = |split: Split| -> Result<(Vec<f64>, Vec<bool>, Vec<usize>)> {
        let idx = table.split_indices(split);
        let scores = table.member_scores_of(member, &idx).iter().map(|s| s.task_score).collect();
        Ok((scores, table.labels_of(&idx)?, table.groups_of(&idx)))
    };
    let (ts, tl, tg) = side(Split::Test)?;
    if tl.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    match selection {
        BaselineSelection::Test => global_threshold_frontier(&ts, &tl, &tg, table.n_groups(), thresholds, metric),
        BaselineSelection::Validation => {
            let mut vidx = table.split_indices(Split::Validation);
            vidx.extend(table.split_indices(Split::Train));
            vidx.sort_unstable();
            let vs: Vec<f64> = table.member_scores_of(member, &vidx).iter().map(|s| s.task_score).collect();
            let val = global_threshold_frontier(
                &vs,
                &table.labels_of(&vidx)?,
                &table.groups_of(&vidx),
                table.n_groups(),
                thresholds,
                metric,
            )?
            .frontier()?;
            let chosen = targets
                .iter()
                .map(|&t| select_threshold(&val.points, thresholds, t))
                .collect::<Result<Vec<f64>>>()?;
            let mut data = global_threshold_frontier(&ts, &tl, &tg, table.n_groups(), &chosen, metric)?;
            for (c, t) in data.configs.iter_mut().zip(targets) {
                c.config = format!("{}(target {t})", c.config);
            }
            Ok(data)
        }
    }
}

fn select_threshold(points: &[FrontierPoint], thresholds: &[f64], target: f64) -> Result<f64> {
    let feasible = |p: &FrontierPoint| p.fairness_value >= target - THRESHOLD_EPS;
    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| feasible(p))
        .max_by(|(i, a), (j, b)| a.accuracy.total_cmp(&b.accuracy).then(j.cmp(i)))
        .or_else(|| {
            points.iter().enumerate().max_by(|(i, a), (j, b)| {
                a.fairness_value
                    .total_cmp(&b.fairness_value)
                    .then(a.accuracy.total_cmp(&b.accuracy))
                    .then(j.cmp(i))
            })
        })
        .ok_or(Error::EmptyFrontier)?;
    Ok(thresholds[best.0])
}

/// Evenly spaced fairness thresholds `start..=end`, `count` of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        TGrid {
            start: 0.5,
            end: 1.0,
            count: 51,
        }
    }
}

impl TGrid {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self> {
        let g = TGrid { start, end, count };
        if count == 0 || !(0.5..=1.0).contains(&start) || !(0.5..=1.0).contains(&end) || start > end {
            return Err(Error::InvalidArgument(format!("invalid threshold grid {g}")));
        }
        if count == 1 && start != end {
            return Err(Error::InvalidArgument("a one-point grid needs start = end".into()));
        }
        Ok(g)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let span = self.end - self.start;
        (0..self.count)
            .map(|j| self.start + span * (j as f64 / (self.count - 1) as f64))
            .collect()
    }
}

impl fmt::Display for TGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.count)
    }
}

impl FromStr for TGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("threshold grid `{s}` is not start:end:count"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].parse().map_err(|_| bad())?;
        let end = parts[1].parse().map_err(|_| bad())?;
        let count = parts[2].parse().map_err(|_| bad())?;
        TGrid::new(start, end, count)
    }
}

/// Mean over `t_grid` of the best accuracy among points with `r >= t`.
pub fn fair_auc(frontier: &Frontier, t_grid: &[f64]) -> Result<f64> {
    if frontier.points.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("threshold grid is empty".into()));
    }
    let mut total = 0.0;
    for &t in t_grid {
        let best = frontier
            .points
            .iter()
            .filter(|p| p.fairness_value >= t - THRESHOLD_EPS)
            .map(|p| p.accuracy)
            .reduce(f64::max)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no frontier point reaches fairness {t}"))
            })?;
        total += best;
    }
    Ok(total / t_grid.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    pub n_replicates: usize,
    pub level: f64,
    pub seed: u64,
}

/// Percentile bootstrap over whole samples.
///
/// Replicate `r` draws `n_samples` indices with replacement from a ChaCha8
/// stream seeded by `seed` on stream `r`, so the result is independent of the
/// number of worker threads. Quantiles use linear interpolation.
pub fn bootstrap_ci<F>(
    n_samples: usize,
    metric: F,
    n_replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    if n_samples == 0 {
        return Err(Error::EmptyTestSet);
    }
    if n_replicates < 2 {
        return Err(Error::InvalidArgument("at least two bootstrap replicates are required".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level {level} outside (0, 1)")));
    }
    let mut values = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let idx: Vec<usize> = (0..n_samples).map(|_| rng.random_range(0..n_samples)).collect();
            metric(&idx)
        })
        .collect::<Result<Vec<f64>>>()?;
    values.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        low: quantile_sorted(&values, (1.0 - level) / 2.0),
        high: quantile_sorted(&values, (1.0 + level) / 2.0),
        n_replicates,
        level,
        seed,
    })
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairAucResult {
    pub value: f64,
    pub t_grid: TGrid,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_bootstrap: usize,
    pub level: f64,
    pub seed: u64,
}

impl FairAucResult {
    pub fn to_kv(&self) -> String {
        format!(
            "fair_auc={}\nci_low={}\nci_high={}\nlevel={}\nn_bootstrap={}\nt_grid={}\nseed={}\n",
            self.value, self.ci_low, self.ci_high, self.level, self.n_bootstrap, self.t_grid, self.seed
        )
    }
}

/// FairAUC of `data` with a percentile bootstrap interval.
///
/// The interval is widened to contain the point estimate when the percentile
/// interval happens to exclude it.
pub fn fair_auc_with_ci(
    data: &FrontierData,
    t_grid: &TGrid,
    n_bootstrap: usize,
    level: f64,
    seed: u64,
) -> Result<FairAucResult> {
    let ts = t_grid.values();
    let value = fair_auc(&data.frontier()?, &ts)?;
    let ci = bootstrap_ci(data.len(), |idx| fair_auc(&data.frontier_on(idx)?, &ts), n_bootstrap, level, seed)?;
    Ok(FairAucResult {
        value,
        t_grid: *t_grid,
        ci_low: ci.low.min(value),
        ci_high: ci.high.max(value),
        n_bootstrap,
        level,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(a: f64, r: f64) -> FrontierPoint {
        FrontierPoint {
            config: format!("{a}/{r}"),
            source: PointSource::ConstrainedEnsemble,
            accuracy: a,
            fairness_value: r,
        }
    }

    fn frontier(points: Vec<FrontierPoint>) -> Frontier {
        Frontier {
            metric: FairnessMetric::MinRecall,
            points,
        }
    }

    #[test]
    fn one_dominating_point() {
        let f = frontier(vec![pt(0.8, 1.0)]);
        assert!((fair_auc(&f, &TGrid::default().values()).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn two_points_by_hand() {
        let f = frontier(vec![pt(0.9, 0.6), pt(0.7, 1.0)]);
        let v = fair_auc(&f, &[0.5, 0.75, 1.0]).unwrap();
        assert!((v - (0.9 + 0.7 + 0.7) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_positive_floor() {
        let data = FrontierData {
            metric: FairnessMetric::MinRecall,
            labels: (0..10).map(|i| i == 0).collect(),
            groups: vec![0; 10],
            n_groups: 1,
            configs: vec![],
            include_constant_positive: true,
        };
        let f = data.frontier().unwrap();
        assert_eq!(f.points.len(), 1);
        assert!((fair_auc(&f, &TGrid::default().values()).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn empty_frontier() {
        assert_eq!(fair_auc(&frontier(vec![]), &[0.5]), Err(Error::EmptyFrontier));
    }

    #[test]
    fn t_grid_parsing() {
        let g: TGrid = "0.5:1:51".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 51);
        assert_eq!((v[0], v[50]), (0.5, 1.0));
        assert!((v[20] - 0.7).abs() < 1e-15);
        assert!("0.4:1:5".parse::<TGrid>().is_err());
        assert!("0.5:1".parse::<TGrid>().is_err());
    }

    #[test]
    fn global_thresholds() {
        let scores = [0.9, 0.2, 1.0, 0.4, 0.6];
        let labels = [true, false, true, false, true];
        let groups = [0, 0, 1, 1, 1];
        let ts: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let data = global_threshold_frontier(&scores, &labels, &groups, 2, &ts, FairnessMetric::MinRecall).unwrap();
        let f = data.frontier().unwrap();
        assert_eq!(f.points.len(), 11);
        assert_eq!((f.points[0].accuracy, f.points[0].fairness_value), (0.6, 1.0));
        // tau = 1 keeps the score that equals 1
        let last = &data.configs[10].predictions;
        assert_eq!(last, &vec![false, false, true, false, false]);
        assert_eq!(data, global_threshold_frontier(&scores, &labels, &groups, 2, &ts, FairnessMetric::MinRecall).unwrap());
    }

    #[test]
    fn bootstrap_constant_and_determinism() {
        let ci = bootstrap_ci(50, |_| Ok(0.25), 200, 0.95, 1).unwrap();
        assert_eq!((ci.low, ci.high), (0.25, 0.25));
        let labels: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let mean = |idx: &[usize]| Ok(idx.iter().map(|&i| labels[i]).sum::<f64>() / idx.len() as f64);
        assert_eq!(bootstrap_ci(100, mean, 200, 0.95, 7).unwrap(), bootstrap_ci(100, mean, 200, 0.95, 7).unwrap());
        assert_eq!(bootstrap_ci(0, mean, 200, 0.95, 7), Err(Error::EmptyTestSet));
    }

    #[test]
    fn bootstrap_width_shrinks_with_sample_size() {
        let width = |n: usize| {
            let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let ci = bootstrap_ci(
                n,
                |idx| Ok(idx.iter().map(|&i| labels[i]).sum::<f64>() / idx.len() as f64),
                200,
                0.95,
                3,
            )
            .unwrap();
            assert!(ci.low <= 0.5 && 0.5 <= ci.high);
            ci.high - ci.low
        };
        let (w100, w400) = (width(100), width(400));
        // binomial theory: width ~ 2 * 1.96 * 0.5 / sqrt(n) = 0.196 and 0.098;
        // a 200-replicate percentile estimate is checked with generous slack
        assert!((w100 - 0.196).abs() < 0.06, "{w100}");
        assert!((w400 - 0.098).abs() < 0.03, "{w400}");
        assert!(w400 < w100);
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..8)
    }

    proptest! {
        #[test]
        fn fair_auc_monotone_bounded_and_ignores_dominated(
            pts in points(), extra in (0.0f64..=1.0, 0.0f64..=1.0), prevalence in 0.0f64..0.5
        ) {
            let ts = TGrid::default().values();
            let mut base: Vec<FrontierPoint> = pts.iter().map(|&(a, r)| pt(a, r)).collect();
            base.push(pt(prevalence, 1.0));
            let v = fair_auc(&frontier(base.clone()), &ts).unwrap();
            let max_acc = base.iter().map(|p| p.accuracy).fold(0.0, f64::max);
            prop_assert!(v <= max_acc + 1e-12);
            prop_assert!(v >= prevalence - 1e-12);

            let mut more = base.clone();
            more.push(pt(extra.0, extra.1));
            prop_assert!(fair_auc(&frontier(more), &ts).unwrap() >= v - 1e-12);

            // drop a point dominated by another point
            let dominated = (0..base.len()).find(|&i| (0..base.len()).any(|j| j != i
                && base[j].accuracy >= base[i].accuracy
                && base[j].fairness_value >= base[i].fairness_value));
            if let Some(i) = dominated {
                let mut fewer = base.clone();
                fewer.remove(i);
                prop_assert!((fair_auc(&frontier(fewer), &ts).unwrap() - v).abs() < 1e-12);
            }
        }
    }
}
