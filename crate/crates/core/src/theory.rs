//! Closed-form guarantees: minimum observable recall, the error-parity bound,
//! and exact jury distributions for independent members.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse of the standard normal CDF.
///
/// Wichura's algorithm AS 241 (`PPND16`, Applied Statistics 37(3), 1988),
/// accurate to about 1e-16 relative error for `p` in (0, 1). Returns `-inf`
/// and `+inf` at 0 and 1, and NaN outside [0, 1].
pub fn normal_quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly(coef: &[f64; 8], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRequirement {
    /// Positives of the minority group in validation.
    pub m: u64,
    /// Positives of the minority group in test.
    pub n: u64,
    pub alpha: f64,
    /// Base rate the test recall must exceed.
    pub k: f64,
    pub z: f64,
    pub p_min: f64,
    /// `min(m k, m (1 - k), n k, n (1 - k)) >= 10`.
    pub large_counts: bool,
}

impl SizeRequirement {
    pub fn to_kv(&self) -> String {
        format!(
            "m={}\nn={}\nalpha={}\nk={}\nz={}\np_min={}\nlarge_counts={}\n",
            self.m, self.n, self.alpha, self.k, self.z, self.p_min, self.large_counts
        )
    }
}

/// Smallest validation recall that, at one-sided level `alpha`, implies a
/// test recall above `k`: `p_min = k + z_{1-alpha} sqrt(k (1 - k) (1/m + 1/n))`.
pub fn min_observed_recall(m: u64, n: u64, alpha: f64, k: f64) -> Result<SizeRequirement> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidAlpha(alpha));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::InvalidRate(k));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("m and n must be at least 1".into()));
    }
    let z = normal_quantile(1.0 - alpha);
    let (mf, nf) = (m as f64, n as f64);
    let se = (k * (1.0 - k) * (1.0 / mf + 1.0 / nf)).sqrt();
    let large_counts = [mf * k, mf * (1.0 - k), nf * k, nf * (1.0 - k)]
        .iter()
        .all(|&c| c >= 10.0);
    Ok(SizeRequirement {
        m,
        n,
        alpha,
        k,
        z,
        p_min: k + z * se,
        large_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityBound {
    pub k: f64,
    pub group_losses: Vec<f64>,
    pub der_gstar: f64,
    pub k_star: f64,
}

/// Ensemble fairness-gap bound from member gap `k`, per-group mean member
/// losses and the DER of a caller-chosen restriction:
/// `k* = k + max_g L_g * DER - max(0, min_g L_g * (DER - 1))`.
pub fn parity_bound(k: f64, group_losses: &[f64], der_gstar: f64) -> Result<ParityBound> {
    if group_losses.is_empty() {
        return Err(Error::EmptyGroups);
    }
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::InvalidArgument(format!("k = {k} outside [0, 1]")));
    }
    if group_losses.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(Error::InvalidArgument("group losses must lie in [0, 1]".into()));
    }
    if !(der_gstar >= 0.0 && der_gstar.is_finite()) {
        return Err(Error::InvalidArgument(format!("DER {der_gstar} must be finite and non-negative")));
    }
    let max_l = group_losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_l = group_losses.iter().copied().fold(f64::INFINITY, f64::min);
    let k_star = k + max_l * der_gstar - (min_l * (der_gstar - 1.0)).max(0.0);
    Ok(ParityBound {
        k,
        group_losses: group_losses.to_vec(),
        der_gstar,
        k_star,
    })
}

/// Independent members with per-member success probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuryInstance {
    pub p: Vec<f64>,
}

impl JuryInstance {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidArgument("a jury needs at least one member".into()));
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("success probabilities must lie in [0, 1]".into()));
        }
        Ok(JuryInstance { p })
    }

    pub fn homogeneous(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// `P(j members correct)` for `j = 0..=N`, by the O(N^2) convolution DP.
pub fn jury_distribution(instance: &JuryInstance) -> Vec<f64> {
    let mut dist = Vec::with_capacity(instance.len() + 1);
    dist.push(1.0);
    for &p in &instance.p {
        dist.push(0.0);
        for j in (0..dist.len()).rev() {
            let stay = dist[j] * (1.0 - p);
            let step = if j > 0 { dist[j - 1] * p } else { 0.0 };
            dist[j] = stay + step;
        }
    }
    dist
}

/// Tolerance on point-mass comparisons; absorbs DP rounding only.
pub const JURY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuryReport {
    /// `P(W = s/N) >= P(W = 1 - s/N)` for every `s < N/2`.
    pub competent: bool,
    /// The integer `s` attaining the smallest margin, if any `s` exists.
    pub worst_s: Option<usize>,
    pub margin: f64,
    /// Interval form: `P(W in [t, 1/2)) >= P(W in [1/2, 1 - t])` for all `t`.
    /// For even `N` the tie `W = 1/2` sits on the bad side, so this can fail
    /// even when every `p_i >= 1/2`.
    pub interval_competent: bool,
    /// `P(correct votes >= N/2)`; a tie is counted correct, as the default
    /// positive tie-break is correct on positives.
    pub majority_correct: f64,
    pub mean_p: f64,
    /// `majority_correct >= mean_p`, checked only when every `p_i > 1/2`.
    pub majority_beats_mean: Option<bool>,
}

pub fn verify_jury_competence(instance: &JuryInstance) -> JuryReport {
    let dist = jury_distribution(instance);
    let n = instance.len();
    // W = s/N means N - s members correct; W = 1 - s/N means s correct.
    let mut margin = f64::INFINITY;
    let mut worst_s = None;
    for s in (0..n).take_while(|&s| 2 * s < n) {
        let m = dist[n - s] - dist[s];
        if m < margin {
            margin = m;
            worst_s = Some(s);
        }
    }
    if worst_s.is_none() {
        margin = 0.0;
    }
    let competent = margin >= -JURY_TOLERANCE;

    // Interval form over thresholds t = s/N: good = sum_{s <= j < N/2} P(W = j/N),
    // bad = sum_{N/2 <= j <= N - s} P(W = j/N).
    let p_wrong = |j: usize| dist[n - j];
    let mut interval_competent = true;
    for s in (0..n).take_while(|&s| 2 * s < n) {
        let good: f64 = (s..n + 1).take_while(|&j| 2 * j < n).map(p_wrong).sum();
        let bad: f64 = (0..=n - s).filter(|&j| 2 * j >= n).map(p_wrong).sum();
        if good - bad < -JURY_TOLERANCE {
            interval_competent = false;
        }
    }

    let majority_correct: f64 = (0..=n).filter(|&j| 2 * j >= n).map(|j| dist[j]).sum();
    let mean_p = instance.p.iter().sum::<f64>() / n as f64;
    let majority_beats_mean = instance
        .p
        .iter()
        .all(|&p| p > 0.5)
        .then(|| majority_correct >= mean_p - JURY_TOLERANCE);
    JuryReport {
        competent,
        worst_s,
        margin,
        interval_competent,
        majority_correct,
        mean_p,
        majority_beats_mean,
    }
}
