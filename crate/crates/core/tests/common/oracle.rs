//! Straightforward reference implementations used to cross-check the library.
//!
//! Nothing here is tuned: loops are nested, scans are sequential and every
//! ratio is kept as an exact fraction where that is possible.

#![allow(dead_code)]

/// Best grid point for one member, scanning candidates in lexicographic
/// order and replacing the incumbent only on strict improvement.
pub struct OracleFit {
    pub index: Vec<usize>,
    pub weights: Vec<f64>,
    pub feasible: bool,
    pub correct: u64,
}

#[derive(Clone, Copy, PartialEq)]
pub enum OracleConstraint {
    MinRecall(f64),
    EqualOpportunity(f64),
    None,
}

pub struct OracleFold<'a> {
    pub task: &'a [f64],
    /// `group_scores[i]` has one entry per group.
    pub group_scores: &'a [Vec<f64>],
    pub labels: &'a [bool],
    pub groups: &'a [usize],
    pub n_groups: usize,
}

pub fn axis_value(resolution: usize, max_weight: f64, j: usize) -> f64 {
    let half = (resolution - 1) as f64;
    max_weight * ((2.0 * j as f64 - half) / half)
}

struct Eval {
    correct: u64,
    min_recall: f64,
    gap: f64,
}

fn evaluate(fold: &OracleFold, weights: &[f64]) -> Eval {
    let mut tp = vec![0u64; fold.n_groups];
    let mut pos = vec![0u64; fold.n_groups];
    let mut correct = 0;
    for i in 0..fold.task.len() {
        let mut s = fold.task[i];
        for g in 0..fold.n_groups {
            s += weights[g] * fold.group_scores[i][g];
        }
        let pred = s >= 0.5;
        if pred == fold.labels[i] {
            correct += 1;
        }
        if fold.labels[i] {
            pos[fold.groups[i]] += 1;
            if pred {
                tp[fold.groups[i]] += 1;
            }
        }
    }
    let recalls: Vec<f64> = (0..fold.n_groups)
        .filter(|&g| pos[g] > 0)
        .map(|g| tp[g] as f64 / pos[g] as f64)
        .collect();
    let lo = recalls.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = recalls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Eval {
        correct,
        min_recall: lo,
        gap: hi - lo,
    }
}

fn feasible(c: OracleConstraint, e: &Eval) -> bool {
    match c {
        OracleConstraint::MinRecall(k) => e.min_recall >= k,
        OracleConstraint::EqualOpportunity(eps) => e.gap <= eps,
        OracleConstraint::None => true,
    }
}

/// True when `a` should replace the incumbent `b`.
fn strictly_better(c: OracleConstraint, a: &Eval, fa: bool, b: &Eval, fb: bool) -> bool {
    if fa != fb {
        return fa;
    }
    if fa {
        if a.correct != b.correct {
            return a.correct > b.correct;
        }
        return a.min_recall > b.min_recall;
    }
    // both infeasible: get as close to the constraint as possible, then accuracy
    let (qa, qb) = match c {
        OracleConstraint::EqualOpportunity(_) => (-a.gap, -b.gap),
        _ => (a.min_recall, b.min_recall),
    };
    if qa != qb {
        return qa > qb;
    }
    a.correct > b.correct
}

pub fn exhaustive_fit(fold: &OracleFold, c: OracleConstraint, resolution: usize, max_weight: f64) -> OracleFit {
    let g = fold.n_groups;
    let mut index = vec![0usize; g];
    let mut best: Option<(Vec<usize>, Eval, bool)> = None;
    loop {
        let weights: Vec<f64> = index.iter().map(|&j| axis_value(resolution, max_weight, j)).collect();
        let e = evaluate(fold, &weights);
        let f = feasible(c, &e);
        let replace = match &best {
            None => true,
            Some((_, be, bf)) => strictly_better(c, &e, f, be, *bf),
        };
        if replace {
            best = Some((index.clone(), e, f));
        }
        // odometer increment, last coordinate fastest
        let mut pos = g;
        loop {
            if pos == 0 {
                let (index, e, f) = best.unwrap();
                return OracleFit {
                    weights: index.iter().map(|&j| axis_value(resolution, max_weight, j)).collect(),
                    index,
                    feasible: f,
                    correct: e.correct,
                };
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < resolution {
                break;
            }
            index[pos] = 0;
        }
    }
}

/// `dist[j] = P(exactly j members correct)` by summing over all 2^N outcomes.
pub fn enumerate_jury(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut dist = vec![0.0; n + 1];
    for mask in 0u32..(1u32 << n) {
        let mut prob = 1.0;
        for (i, &pi) in p.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { pi } else { 1.0 - pi };
        }
        dist[mask.count_ones() as usize] += prob;
    }
    dist
}

/// Exact fraction `num / den` with `den > 0`.
#[derive(Clone, Copy, Debug)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

impl Frac {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0);
        if den < 0 {
            Frac { num: -num, den: -den }
        } else {
            Frac { num, den }
        }
    }

    pub fn le(self, other: Frac) -> bool {
        self.num * other.den <= other.num * self.den
    }

    pub fn sub(self, other: Frac) -> Frac {
        Frac::new(self.num * other.den - other.num * self.den, self.den * other.den)
    }

    pub fn div(self, other: Frac) -> Frac {
        Frac::new(self.num * other.den, self.den * other.num)
    }

    pub fn max_zero(self) -> Frac {
        if self.num < 0 {
            Frac::new(0, 1)
        } else {
            self
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub struct OracleBounds {
    pub eir: Frac,
    pub der: Frac,
    pub upper_holds: bool,
    pub lower_holds: bool,
}

/// EIR and DER on the selected points, from per-member error rates and an
/// average over all ordered member pairs `(h, h')`, self-pairs included.
/// `None` when nothing is selected or no member errs.
pub fn eir_der(preds: &[Vec<bool>], mv: &[bool], labels: &[bool], select: &[bool]) -> Option<OracleBounds> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| select[i]).collect();
    let n = idx.len() as i128;
    if n == 0 {
        return None;
    }
    let members = preds.len() as i128;
    let err = |row: &[bool]| idx.iter().filter(|&&i| row[i] != labels[i]).count() as i128;
    let total_err: i128 = preds.iter().map(|r| err(r)).sum();
    if total_err == 0 {
        return None;
    }
    let mean_loss = Frac::new(total_err, n * members);
    let mv_loss = Frac::new(err(mv), n);
    let mut disagreements = 0i128;
    for a in preds {
        for b in preds {
            disagreements += idx.iter().filter(|&&i| a[i] != b[i]).count() as i128;
        }
    }
    let mean_dis = Frac::new(disagreements, n * members * members);
    let eir = mean_loss.sub(mv_loss).div(mean_loss);
    let der = mean_dis.div(mean_loss);
    Some(OracleBounds {
        eir,
        der,
        upper_holds: eir.le(der),
        lower_holds: der.sub(Frac::new(1, 1)).max_zero().le(eir),
    })
}

/// `C(t) = P(W in [t, 1/2)) - P(W in [1/2, 1 - t])` on the selected points
/// for `t = h / (2N)`, counting in half-members to avoid rounding.
pub fn competence_values(preds: &[Vec<bool>], labels: &[bool], select: &[bool], t_half: &[usize]) -> Vec<f64> {
    let n_members = preds.len();
    let wrong: Vec<usize> = (0..labels.len())
        .filter(|&i| select[i])
        .map(|i| preds.iter().filter(|r| r[i] != labels[i]).count())
        .collect();
    let n = wrong.len() as f64;
    t_half
        .iter()
        .map(|&h| {
            // W = v/N; t <= W <=> h <= 2v; W <= 1 - t <=> 2v + h <= 2N
            let good = wrong.iter().filter(|&&v| h <= 2 * v && 2 * v < n_members).count() as f64;
            let bad = wrong.iter().filter(|&&v| n_members <= 2 * v && 2 * v + h <= 2 * n_members).count() as f64;
            (good - bad) / n
        })
        .collect()
}
