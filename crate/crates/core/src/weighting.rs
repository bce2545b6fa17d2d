//! Per-batch class weights, weighted cross-entropy, regression baselines and
//! softmax/argmax helpers.
//!
//! Batch weights follow
//!
//! ```text
//! psi       = total / n_classes * p_percent / 100
//! n_adj(c)  = max(N(c), psi)
//! w(c)      = total / (n_adj(c) + max_c N(c) / psi)
//! ```
//!
//! where `total = H * W * B` is the number of labelled pixels in the batch.
//! Every class whose count is at or below `psi` shares the largest weight.

use serde::{Deserialize, Serialize};

use crate::classgrid::ClassMap;
use crate::colorspace::AbPlanes;
use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Default percentage used to derive the count threshold psi.
pub const DEFAULT_P_PERCENT: f64 = 10.0;

/// Default Huber transition point.
pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

/// Class counts over one batch of dense class maps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub n_classes: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl BatchStats {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if counts.is_empty() {
            return Err(Error::Empty("class count vector"));
        }
        if total == 0 {
            return Err(Error::Empty("batch with zero labelled pixels"));
        }
        Ok(Self {
            n_classes: counts.len(),
            counts,
            total,
        })
    }

    /// Counts dense class indices over a batch of maps.
    pub fn from_maps<'a, I>(maps: I, n_classes: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a ClassMap>,
    {
        let mut counts = vec![0u64; n_classes];
        for map in maps {
            map.check_bound(n_classes as u32)?;
            for &c in &map.classes {
                counts[c as usize] += 1;
            }
        }
        Self::from_counts(counts)
    }
}

/// How psi is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum PsiMode {
    /// `total / n_classes * p_percent / 100`.
    Derived,
    /// A fixed count threshold.
    Fixed(f64),
}

/// Per-class loss weights for one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub weights: Vec<f64>,
    pub psi: f64,
    pub p_percent: f64,
}

impl WeightTable {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * k).collect(),
            ..self.clone()
        }
    }
}

pub fn uniform_weights(n_classes: usize) -> Result<WeightTable> {
    if n_classes == 0 {
        return Err(Error::InvalidParameter("need at least one class".into()));
    }
    Ok(WeightTable {
        weights: vec![1.0 / n_classes as f64; n_classes],
        psi: 0.0,
        p_percent: 0.0,
    })
}

pub fn derive_psi(stats: &BatchStats, p_percent: f64) -> f64 {
    stats.total as f64 / stats.n_classes as f64 * p_percent / 100.0
}

pub fn batch_weights(stats: &BatchStats, p_percent: f64) -> Result<WeightTable> {
    batch_weights_with(stats, p_percent, PsiMode::Derived)
}

pub fn batch_weights_with(stats: &BatchStats, p_percent: f64, mode: PsiMode) -> Result<WeightTable> {
    if stats.total == 0 {
        return Err(Error::Empty("batch with zero labelled pixels"));
    }
    if !(p_percent.is_finite() && p_percent > 0.0) {
        return Err(Error::InvalidParameter(format!("p_percent must be positive, got {p_percent}")));
    }
    let psi = match mode {
        PsiMode::Derived => derive_psi(stats, p_percent),
        PsiMode::Fixed(v) if v.is_finite() && v > 0.0 => v,
        PsiMode::Fixed(v) => {
            return Err(Error::InvalidParameter(format!("fixed psi must be positive, got {v}")))
        }
    };
    let total = stats.total as f64;
    let max_count = stats.counts.iter().copied().max().unwrap_or(0) as f64;
    let damping = max_count / psi;
    let weights = stats
        .counts
        .iter()
        .map(|&n| {
            let n = n as f64;
            let adjusted = if n < psi { psi } else { n };
            total / (adjusted + damping)
        })
        .collect();
    Ok(WeightTable {
        weights,
        psi,
        p_percent,
    })
}

/// Per-pixel class scores, pixel-major: entry `p * n_classes + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub width: usize,
    pub height: usize,
    pub n_classes: usize,
    pub data: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(width: usize, height: usize, n_classes: usize, data: Vec<f64>) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::InvalidParameter("need at least one class".into()));
        }
        let expected = width * height * n_classes;
        if data.len() != expected {
            return Err(Error::BufferLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            n_classes,
            data,
        })
    }

    /// One-hot distribution for a dense class map.
    pub fn one_hot(map: &ClassMap, n_classes: usize) -> Result<Self> {
        map.check_bound(n_classes as u32)?;
        let mut data = vec![0.0; map.pixel_count() * n_classes];
        for (p, &c) in map.classes.iter().enumerate() {
            data[p * n_classes + c as usize] = 1.0;
        }
        Self::new(map.width, map.height, n_classes, data)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.data[p * self.n_classes..(p + 1) * self.n_classes]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n_classes)
    }
}

/// Exp-normalizes each pixel's scores after subtracting the pixel maximum.
pub fn softmax(logits: &ClassDistribution) -> ClassDistribution {
    let mut data = Vec::with_capacity(logits.data.len());
    for row in logits.pixels() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        data.extend(row.iter().map(|&z| (z - m).exp()));
        let sum: f64 = data[start..].iter().sum();
        data[start..].iter_mut().for_each(|v| *v /= sum);
    }
    ClassDistribution {
        data,
        ..*logits
    }
}

/// Index of the largest score per pixel, smallest index on ties.
pub fn argmax_classes(dist: &ClassDistribution) -> ClassMap {
    let classes = dist
        .pixels()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect();
    ClassMap {
        width: dist.width,
        height: dist.height,
        classes,
    }
}

/// Loss reduction over pixels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Sum,
    #[default]
    Mean,
}

impl Reduction {
    fn scale(self, n: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / n as f64,
        }
    }
}

fn check_ce_inputs(pred: &ClassDistribution, truth: &ClassMap, w: &WeightTable) -> Result<()> {
    if pred.width != truth.width || pred.height != truth.height {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", truth.width, truth.height),
            actual: format!("{}x{}", pred.width, pred.height),
        });
    }
    if w.len() != pred.n_classes {
        return Err(Error::DimensionMismatch {
            expected: format!("{} class weights", pred.n_classes),
            actual: format!("{} class weights", w.len()),
        });
    }
    if truth.pixel_count() == 0 {
        return Err(Error::Empty("class map"));
    }
    truth.check_bound(pred.n_classes as u32)
}

/// Weighted cross-entropy `-sum_px w[t] * ln(max(p[t], eps))` over
/// probabilities `pred` and dense targets `truth`.
pub fn weighted_ce_loss(
    pred: &ClassDistribution,
    truth: &ClassMap,
    w: &WeightTable,
    reduction: Reduction,
) -> Result<f64> {
    check_ce_inputs(pred, truth, w)?;
    let terms: Vec<f64> = truth
        .classes
        .iter()
        .enumerate()
        .map(|(p, &t)| {
            let t = t as usize;
            -w.weights[t] * pred.pixel(p)[t].max(PROB_FLOOR).ln()
        })
        .collect();
    Ok(pairwise_sum(&terms) * reduction.scale(truth.pixel_count()))
}

/// Gradient of [`weighted_ce_loss`] with respect to the probabilities.
pub fn weighted_ce_grad_probs(
    pred: &ClassDistribution,
    truth: &ClassMap,
    w: &WeightTable,
    reduction: Reduction,
) -> Result<ClassDistribution> {
    check_ce_inputs(pred, truth, w)?;
    let k = reduction.scale(truth.pixel_count());
    let n = pred.n_classes;
    let mut data = vec![0.0; pred.data.len()];
    for (p, &t) in truth.classes.iter().enumerate() {
        let t = t as usize;
        let prob = pred.data[p * n + t];
        // Below the floor the loss is flat in the probability.
        if prob > PROB_FLOOR {
            data[p * n + t] = -k * w.weights[t] / prob;
        }
    }
    Ok(ClassDistribution { data, ..*pred })
}

/// Weighted cross-entropy of `softmax(logits)`, computed with a log-sum-exp
/// so that large logits do not lose precision.
pub fn weighted_ce_loss_logits(
    logits: &ClassDistribution,
    truth: &ClassMap,
    w: &WeightTable,
    reduction: Reduction,
) -> Result<f64> {
    check_ce_inputs(logits, truth, w)?;
    let terms: Vec<f64> = truth
        .classes
        .iter()
        .enumerate()
        .map(|(p, &t)| {
            let row = logits.pixel(p);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
            let log_p = (row[t as usize] - lse).max(PROB_FLOOR.ln());
            -w.weights[t as usize] * log_p
        })
        .collect();
    Ok(pairwise_sum(&terms) * reduction.scale(truth.pixel_count()))
}

/// Gradient of [`weighted_ce_loss_logits`] with respect to the logits:
/// `w[t] * (softmax(z) - onehot(t))` per pixel.
pub fn weighted_ce_grad_logits(
    logits: &ClassDistribution,
    truth: &ClassMap,
    w: &WeightTable,
    reduction: Reduction,
) -> Result<ClassDistribution> {
    check_ce_inputs(logits, truth, w)?;
    let k = reduction.scale(truth.pixel_count());
    let mut grad = softmax(logits);
    let n = grad.n_classes;
    for (p, &t) in truth.classes.iter().enumerate() {
        let t = t as usize;
        let wt = w.weights[t];
        let row = &mut grad.data[p * n..(p + 1) * n];
        row[t] -= 1.0;
        row.iter_mut().for_each(|g| *g *= k * wt);
    }
    Ok(grad)
}

/// Regression losses between predicted and true chroma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionLosses {
    pub l1: f64,
    pub l2: f64,
    pub huber: f64,
    pub log_cosh: f64,
}

/// `ln(cosh(x))` without overflow for large `|x|`.
pub fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn huber(e: f64, delta: f64) -> f64 {
    let ae = e.abs();
    if ae < delta {
        0.5 * e * e
    } else {
        delta * (ae - 0.5 * delta)
    }
}

/// L1, L2, Huber and log-cosh losses, each averaged over every a\* and b\*
/// element.
pub fn regression_losses(pred: &AbPlanes, truth: &AbPlanes, huber_delta: f64) -> Result<RegressionLosses> {
    pred.check_same_shape(truth)?;
    if huber_delta.is_nan() || huber_delta <= 0.0 {
        return Err(Error::InvalidParameter(format!("huber delta must be positive, got {huber_delta}")));
    }
    let errs: Vec<f64> = pred
        .a
        .iter()
        .zip(&truth.a)
        .chain(pred.b.iter().zip(&truth.b))
        .map(|(p, t)| p - t)
        .collect();
    if errs.is_empty() {
        return Err(Error::Empty("chroma planes"));
    }
    let n = errs.len() as f64;
    let mean = |f: &dyn Fn(f64) -> f64| pairwise_sum(&errs.iter().map(|&e| f(e)).collect::<Vec<_>>()) / n;
    Ok(RegressionLosses {
        l1: mean(&|e| e.abs()),
        l2: mean(&|e| e * e),
        huber: mean(&|e| huber(e, huber_delta)),
        log_cosh: mean(&log_cosh),
    })
}

/// Pairwise summation; error grows with `log n` instead of `n`.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (lo, hi) = xs.split_at(xs.len() / 2);
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}
