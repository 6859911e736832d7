//! Per-group confusion matrices and the recall-based fairness metrics built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

impl Counts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn positives(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn correct(&self) -> u64 {
        self.true_pos + self.true_neg
    }

    /// `None` when the group has no positives.
    pub fn recall(&self) -> Option<f64> {
        let p = self.positives();
        (p > 0).then(|| self.true_pos as f64 / p as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.correct() as f64 / n as f64)
    }

    #[inline]
    pub fn record(&mut self, prediction: bool, label: bool) {
        match (prediction, label) {
            (true, true) => self.true_pos += 1,
            (true, false) => self.false_pos += 1,
            (false, true) => self.false_neg += 1,
            (false, false) => self.true_neg += 1,
        }
    }
}

/// Confusion counts indexed by group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub per_group: Vec<Counts>,
}

impl GroupConfusion {
    pub fn new(n_groups: usize) -> Self {
        GroupConfusion {
            per_group: vec![Counts::default(); n_groups],
        }
    }

    pub fn total(&self) -> u64 {
        self.per_group.iter().map(Counts::total).sum()
    }
}

pub fn confusion_by_group(
    predictions: &[bool],
    labels: &[bool],
    groups: &[usize],
    n_groups: usize,
) -> Result<GroupConfusion> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            actual: labels.len(),
        });
    }
    if groups.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            actual: groups.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let mut conf = GroupConfusion::new(n_groups);
    for ((&p, &y), &g) in predictions.iter().zip(labels).zip(groups) {
        let counts = conf
            .per_group
            .get_mut(g)
            .ok_or_else(|| Error::UnknownGroup(format!("index {g}")))?;
        counts.record(p, y);
    }
    Ok(conf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_samples: u64,
    pub accuracy: f64,
    /// `None` marks a group without positives; it is left out of the aggregates.
    pub recall: Vec<Option<f64>>,
    pub min_recall: f64,
    pub eo_gap: f64,
}

impl MetricReport {
    /// Flat `key=value` lines.
    pub fn to_kv(&self, group_names: &[String]) -> String {
        let mut out = format!("n_samples={}\naccuracy={}\n", self.n_samples, self.accuracy);
        for (i, r) in self.recall.iter().enumerate() {
            let name = group_names.get(i).map(String::as_str).unwrap_or("?");
            match r {
                Some(v) => out.push_str(&format!("recall[{name}]={v}\n")),
                None => out.push_str(&format!("recall[{name}]=undefined\n")),
            }
        }
        out.push_str(&format!("min_recall={}\neo_gap={}\n", self.min_recall, self.eo_gap));
        out
    }
}

pub fn metric_report(conf: &GroupConfusion) -> Result<MetricReport> {
    let n = conf.total();
    if n == 0 {
        return Err(Error::InvalidArgument("confusion matrix is empty".into()));
    }
    let recall: Vec<Option<f64>> = conf.per_group.iter().map(Counts::recall).collect();
    let defined = || recall.iter().flatten().copied();
    let min_recall = defined().reduce(f64::min).ok_or(Error::NoPositivesAnywhere)?;
    let max_recall = defined().reduce(f64::max).unwrap_or(min_recall);
    let correct: u64 = conf.per_group.iter().map(Counts::correct).sum();
    Ok(MetricReport {
        n_samples: n,
        accuracy: correct as f64 / n as f64,
        recall,
        min_recall,
        eo_gap: max_recall - min_recall,
    })
}
