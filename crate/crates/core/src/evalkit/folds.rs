use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{calibrate, metrics, ols_fit, roc_points, CalibrationParams, Metrics, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldMode {
    /// Disjoint validation blocks covering every sample once.
    Kfold,
    /// Independent random train/validation splits per fold.
    Random,
}

impl std::str::FromStr for FoldMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kfold" | "kfold_partition" => Ok(FoldMode::Kfold),
            "random" | "random_split" => Ok(FoldMode::Random),
            other => Err(Error::invalid(format!("unknown fold mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub mode: FoldMode,
    pub folds: usize,
    /// Used by random splits only.
    pub train_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub fold: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl FoldPlan {
    pub fn kfold(folds: usize, seed: u64) -> Self {
        FoldPlan {
            mode: FoldMode::Kfold,
            folds,
            train_fraction: 1.0 - 1.0 / folds.max(1) as f64,
            seed,
        }
    }

    pub fn random_split(folds: usize, train_fraction: f64, seed: u64) -> Self {
        FoldPlan {
            mode: FoldMode::Random,
            folds,
            train_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("at least 2 folds are required"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Validation size of a random split, `⌈(1 − train_fraction)·n⌉`.
    pub fn validation_size(&self, n: usize) -> usize {
        // round away representation noise such as 1 − 0.9 = 0.09999…
        let raw = (1.0 - self.train_fraction) * n as f64;
        let v = (raw - 1e-9).ceil() as usize;
        v.clamp(1, n.saturating_sub(1).max(1))
    }

    pub fn splits(&self, n: usize) -> Result<Vec<Split>> {
        self.validate()?;
        if n < self.folds || n < 2 {
            return Err(Error::invalid(format!("{n} samples cannot fill {} folds", self.folds)));
        }
        let all: Vec<usize> = (0..n).collect();
        match self.mode {
            FoldMode::Kfold => {
                let mut order = all;
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
                let (base, extra) = (n / self.folds, n % self.folds);
                let mut start = 0;
                Ok((0..self.folds)
                    .map(|f| {
                        let len = base + usize::from(f < extra);
                        let mut validation = order[start..start + len].to_vec();
                        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
                        start += len;
                        validation.sort_unstable();
                        train.sort_unstable();
                        Split { fold: f, train, validation }
                    })
                    .collect())
            }
            FoldMode::Random => {
                let v = self.validation_size(n);
                Ok((0..self.folds)
                    .map(|f| {
                        let mut order = all.clone();
                        order.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(f as u64)));
                        let mut validation = order[..v].to_vec();
                        let mut train = order[v..].to_vec();
                        validation.sort_unstable();
                        train.sort_unstable();
                        Split { fold: f, train, validation }
                    })
                    .collect())
            }
        }
    }
}

/// What the runner is doing when it reads a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Training(usize),
    Metrics(usize),
    Pooled,
}

pub trait LabelSource {
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> f64;
    /// Called by the runner before it starts a new phase.
    fn enter(&self, _phase: Phase) {}
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl LabelSource for [f64] {
    fn len(&self) -> usize {
        <[f64]>::len(self)
    }
    fn label(&self, i: usize) -> f64 {
        self[i]
    }
}

impl LabelSource for Vec<f64> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn label(&self, i: usize) -> f64 {
        self[i]
    }
}

/// Labels that log every read with the phase it happened in.
pub struct AuditedLabels {
    values: Vec<f64>,
    state: Mutex<(Option<Phase>, Vec<(Option<Phase>, usize)>)>,
}

impl AuditedLabels {
    pub fn new(values: Vec<f64>) -> Self {
        AuditedLabels {
            values,
            state: Mutex::new((None, Vec::new())),
        }
    }

    pub fn reads(&self) -> Vec<(Option<Phase>, usize)> {
        self.state.lock().expect("audit lock").1.clone()
    }

    /// Reads of a fold's validation labels before that fold's metrics phase.
    pub fn leaks(&self, splits: &[Split]) -> usize {
        self.reads()
            .iter()
            .filter(|(phase, i)| match phase {
                Some(Phase::Training(f)) => splits.iter().any(|s| s.fold == *f && s.validation.contains(i)),
                None => true,
                _ => false,
            })
            .count()
    }
}

impl LabelSource for AuditedLabels {
    fn len(&self) -> usize {
        self.values.len()
    }
    fn label(&self, i: usize) -> f64 {
        let mut st = self.state.lock().expect("audit lock");
        let phase = st.0;
        st.1.push((phase, i));
        self.values[i]
    }
    fn enter(&self, phase: Phase) {
        self.state.lock().expect("audit lock").0 = Some(phase);
    }
}

/// What a training callback sees: never the validation labels.
pub struct TrainRequest<'a> {
    pub fold: usize,
    /// Plan seed plus fold index.
    pub seed: u64,
    pub train: &'a [usize],
    pub train_labels: &'a [f64],
    pub validation: &'a [usize],
}

pub struct TrainOutput {
    pub train_preds: Vec<f64>,
    pub validation_preds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub index: usize,
    pub fold: usize,
    pub y: f64,
    pub yhat_raw: f64,
    pub yhat_calibrated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub params: Option<CalibrationParams>,
    pub train_metrics: Option<Metrics>,
    pub validation_metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    /// Standard error of the per-fold mean.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task: Task,
    pub calibrated: bool,
    pub folds: Vec<FoldResult>,
    pub failed_folds: Vec<FoldFailure>,
    /// Validation predictions of every completed fold, in fold order.
    pub samples: Vec<SamplePrediction>,
    /// Computed on the pooled validation predictions.
    pub pooled: Metrics,
    pub fold_summary: Vec<MetricSummary>,
    pub roc_points: Option<Vec<(f64, f64)>>,
}

enum FoldOutcome {
    Done(FoldResult, Vec<SamplePrediction>),
    Failed(String),
}

/// Runs every fold of `plan`. With `calibrate`, each fold fits `ŷ = p·y + q`
/// on its own training predictions and applies the inverse map to training
/// and validation predictions alike. Summary metrics use the pooled
/// validation predictions.
pub fn fold_runner<L, F>(labels: &L, plan: &FoldPlan, task: Task, calibrate_preds: bool, mut train: F) -> Result<RunResult>
where
    L: LabelSource + ?Sized,
    F: FnMut(&TrainRequest<'_>) -> Result<TrainOutput>,
{
    let splits = plan.splits(labels.len())?;
    let mut folds = Vec::new();
    let mut failed_folds = Vec::new();
    let mut samples = Vec::new();
    for split in &splits {
        match run_fold(labels, plan, task, calibrate_preds, split, &mut train)? {
            FoldOutcome::Done(r, s) => {
                folds.push(r);
                samples.extend(s);
            }
            FoldOutcome::Failed(reason) => failed_folds.push(FoldFailure {
                fold: split.fold,
                reason,
            }),
        }
    }
    if folds.is_empty() {
        return Err(Error::invalid("every fold failed"));
    }
    labels.enter(Phase::Pooled);
    let y: Vec<f64> = samples.iter().map(|s| labels.label(s.index)).collect();
    let yhat: Vec<f64> = samples.iter().map(|s| s.yhat_calibrated).collect();
    let pooled = metrics(&yhat, &y, task)?;
    let roc = match task {
        Task::Binary => Some(roc_points(&yhat, &y)?),
        Task::Regression => None,
    };
    let fold_summary = summarize(&folds);
    Ok(RunResult {
        task,
        calibrated: calibrate_preds,
        folds,
        failed_folds,
        samples,
        pooled,
        fold_summary,
        roc_points: roc,
    })
}

fn run_fold<L, F>(labels: &L, plan: &FoldPlan, task: Task, calibrate_preds: bool, split: &Split, train: &mut F) -> Result<FoldOutcome>
where
    L: LabelSource + ?Sized,
    F: FnMut(&TrainRequest<'_>) -> Result<TrainOutput>,
{
    labels.enter(Phase::Training(split.fold));
    let train_labels: Vec<f64> = split.train.iter().map(|&i| labels.label(i)).collect();
    if task == Task::Binary {
        let pos = train_labels.iter().filter(|&&l| l > 0.5).count();
        if pos == 0 || pos == train_labels.len() {
            return Ok(FoldOutcome::Failed("single-class training labels".into()));
        }
    }
    let out = train(&TrainRequest {
        fold: split.fold,
        seed: plan.seed.wrapping_add(split.fold as u64),
        train: &split.train,
        train_labels: &train_labels,
        validation: &split.validation,
    })?;
    if out.train_preds.len() != split.train.len() {
        return Err(Error::LengthMismatch(out.train_preds.len(), split.train.len()));
    }
    if out.validation_preds.len() != split.validation.len() {
        return Err(Error::LengthMismatch(out.validation_preds.len(), split.validation.len()));
    }
    let (params, train_cal, val_cal) = if calibrate_preds {
        let params = match ols_fit(&out.train_preds, &train_labels) {
            Ok(p) => p,
            Err(e) => return Ok(FoldOutcome::Failed(format!("calibration: {e}"))),
        };
        (
            Some(params),
            calibrate(&out.train_preds, &params),
            calibrate(&out.validation_preds, &params),
        )
    } else {
        (None, out.train_preds.clone(), out.validation_preds.clone())
    };
    let train_metrics = metrics(&train_cal, &train_labels, task).ok();

    labels.enter(Phase::Metrics(split.fold));
    let val_labels: Vec<f64> = split.validation.iter().map(|&i| labels.label(i)).collect();
    let validation_metrics = metrics(&val_cal, &val_labels, task).ok();
    let samples = split
        .validation
        .iter()
        .enumerate()
        .map(|(k, &i)| SamplePrediction {
            index: i,
            fold: split.fold,
            y: val_labels[k],
            yhat_raw: out.validation_preds[k],
            yhat_calibrated: val_cal[k],
        })
        .collect();
    Ok(FoldOutcome::Done(
        FoldResult {
            fold: split.fold,
            n_train: split.train.len(),
            n_val: split.validation.len(),
            params,
            train_metrics,
            validation_metrics,
        },
        samples,
    ))
}

fn summarize(folds: &[FoldResult]) -> Vec<MetricSummary> {
    let rows: Vec<Vec<(&'static str, f64)>> = folds
        .iter()
        .filter_map(|f| f.validation_metrics.map(|m| m.entries()))
        .collect();
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let vals: Vec<f64> = rows.iter().map(|r| r[k].1).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let se = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
            } else {
                0.0
            };
            MetricSummary {
                name: name.to_string(),
                mean,
                se,
            }
        })
        .collect()
}
