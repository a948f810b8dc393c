use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Real;

/// Minimum |p| for an invertible calibration.
pub const MIN_SLOPE: f64 = 1e-8;
/// Score at or above which a binary prediction counts as positive.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// `ŷ ≈ p·y + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub p: f64,
    pub q: f64,
}

impl CalibrationParams {
    pub fn identity() -> Self {
        CalibrationParams { p: 1.0, q: 0.0 }
    }
}

fn mean<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

/// Slope and intercept of `yhat` regressed on `y`, without the invertibility
/// check.
fn regress<T: Real>(yhat: &[T], y: &[T]) -> Result<(T, T)> {
    if yhat.len() != y.len() {
        return Err(Error::LengthMismatch(yhat.len(), y.len()));
    }
    if y.len() < 2 {
        return Err(Error::invalid("regression needs at least 2 points"));
    }
    let (my, mh) = (mean(y), mean(yhat));
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (a, b) in y.iter().zip(yhat) {
        sxy += (*a - my) * (*b - mh);
        sxx += (*a - my) * (*a - my);
    }
    if !(sxx > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    let p = sxy / sxx;
    Ok((p, mh - p * my))
}

/// Ordinary least squares for `yhat = p·y + q` (labels on the x axis).
pub fn ols_fit<T: Real>(yhat: &[T], y: &[T]) -> Result<CalibrationParams> {
    let (p, q) = regress(yhat, y)?;
    let (p, q) = (p.as_f64(), q.as_f64());
    if !(p.abs() > MIN_SLOPE) {
        return Err(Error::Uncalibratable(p));
    }
    Ok(CalibrationParams { p, q })
}

/// Inverse map `(ŷ − q) / p`.
pub fn calibrate<T: Real>(preds: &[T], params: &CalibrationParams) -> Vec<T> {
    let (p, q) = (T::lit(params.p), T::lit(params.q));
    preds.iter().map(|&v| (v - q) / p).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Metrics {
    Regression { r2: f64, slope: f64, rmse: f64 },
    Binary { roc_auc: f64, precision: f64, recall: f64 },
}

impl Metrics {
    /// Stable (name, value) pairs for CSV output.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Metrics::Regression { r2, slope, rmse } => vec![("r2", r2), ("slope", slope), ("rmse", rmse)],
            Metrics::Binary {
                roc_auc,
                precision,
                recall,
            } => vec![("roc_auc", roc_auc), ("precision", precision), ("recall", recall)],
        }
    }
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r_squared<T: Real>(preds: &[T], labels: &[T]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch(preds.len(), labels.len()));
    }
    let m = mean(labels);
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for (p, y) in preds.iter().zip(labels) {
        ss_res += (*y - *p) * (*y - *p);
        ss_tot += (*y - m) * (*y - m);
    }
    if !(ss_tot > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok((T::one() - ss_res / ss_tot).as_f64())
}

pub fn rmse<T: Real>(preds: &[T], labels: &[T]) -> f64 {
    let s: T = preds.iter().zip(labels).map(|(p, y)| (*p - *y) * (*p - *y)).sum();
    (s / T::from_usize_lossy(preds.len().max(1))).sqrt().as_f64()
}

/// Squared Pearson correlation.
pub fn pearson_r2<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        sab += (*x - ma) * (*y - mb);
        saa += (*x - ma) * (*x - ma);
        sbb += (*y - mb) * (*y - mb);
    }
    if !(saa > T::zero() && sbb > T::zero()) {
        return Err(Error::ZeroVariance);
    }
    Ok((sab * sab / (saa * sbb)).as_f64())
}

fn check_binary<T: Real>(labels: &[T]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l > T::lit(0.5)).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve from midranks; ties count one half.
pub fn roc_auc<T: Real>(scores: &[T], labels: &[T]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    let (pos, neg) = check_binary(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let midrank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += midrank * order[i..j].iter().filter(|&&k| labels[k] > T::lit(0.5)).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// `(fpr, tpr)` points from the highest threshold down, starting at (0, 0).
pub fn roc_points<T: Real>(scores: &[T], labels: &[T]) -> Result<Vec<(f64, f64)>> {
    let (pos, neg) = check_binary(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] > T::lit(0.5) {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        pts.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        i = j;
    }
    Ok(pts)
}

/// Precision and recall with predictions at or above `threshold` positive.
/// Precision is 0 when nothing is predicted positive.
pub fn precision_recall<T: Real>(scores: &[T], labels: &[T], threshold: T) -> Result<(f64, f64)> {
    let (pos, _) = check_binary(labels)?;
    let mut tp = 0usize;
    let mut predicted = 0usize;
    for (s, l) in scores.iter().zip(labels) {
        if *s >= threshold {
            predicted += 1;
            if *l > T::lit(0.5) {
                tp += 1;
            }
        }
    }
    let precision = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
    Ok((precision, tp as f64 / pos as f64))
}

pub fn metrics<T: Real>(preds: &[T], labels: &[T], task: Task) -> Result<Metrics> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch(preds.len(), labels.len()));
    }
    if preds.len() < 2 {
        return Err(Error::invalid("metrics need at least 2 samples"));
    }
    Ok(match task {
        Task::Regression => Metrics::Regression {
            r2: r_squared(preds, labels)?,
            slope: regress(preds, labels)?.0.as_f64(),
            rmse: rmse(preds, labels),
        },
        Task::Binary => {
            let (precision, recall) = precision_recall(preds, labels, T::lit(DECISION_THRESHOLD))?;
            Metrics::Binary {
                roc_auc: roc_auc(preds, labels)?,
                precision,
                recall,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicLabel {
    Hit,
    NonHit,
    Excluded,
}

impl MicLabel {
    pub fn as_label(self) -> Option<f64> {
        match self {
            MicLabel::Hit => Some(1.0),
            MicLabel::NonHit => Some(0.0),
            MicLabel::Excluded => None,
        }
    }
}

/// `≤ 1 μM` hit, `> 10 μM` non-hit, anything between excluded.
pub fn binarize_mic(median_um: &[f64]) -> Result<Vec<MicLabel>> {
    median_um
        .iter()
        .map(|&v| {
            if !(v > 0.0) {
                Err(Error::NonPositive(v))
            } else if v <= 1.0 {
                Ok(MicLabel::Hit)
            } else if v > 10.0 {
                Ok(MicLabel::NonHit)
            } else {
                Ok(MicLabel::Excluded)
            }
        })
        .collect()
}

pub fn log10_transform(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|&v| if v > 0.0 { Ok(v.log10()) } else { Err(Error::NonPositive(v)) })
        .collect()
}
