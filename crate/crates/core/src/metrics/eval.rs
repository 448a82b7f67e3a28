use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::records::{FrameRecord, Label, PredictionRecord};
use crate::{Error, Result};

/// Binary confusion counts with eye contact as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, pred: Label, truth: Label) {
        match (pred.is_positive(), truth.is_positive()) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
        }
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        cm.add(p, t);
    }
    Ok(cm)
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, tn, fp, fn_) = (cm.tp as f64, cm.tn as f64, cm.fp as f64, cm.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// True negative rate, undefined without negatives.
pub fn tnr(cm: &ConfusionMatrix) -> Option<f64> {
    let neg = cm.tn + cm.fp;
    (neg > 0).then(|| cm.tn as f64 / neg as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub confusion: ConfusionMatrix,
    pub mcc: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tnr: Option<f64>,
}

impl From<ConfusionMatrix> for StratumReport {
    fn from(cm: ConfusionMatrix) -> Self {
        Self {
            confusion: cm,
            mcc: mcc(&cm),
            tnr: tnr(&cm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub mcc: f64,
    pub tnr: Option<f64>,
    /// Keyed by illumination tag; empty when no frame carries one.
    pub per_illumination: BTreeMap<String, StratumReport>,
}

impl EvalReport {
    fn from_pairs<'a>(pairs: impl Iterator<Item = (Label, Label, Option<&'a str>)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        let mut strata: BTreeMap<String, ConfusionMatrix> = BTreeMap::new();
        for (p, t, tag) in pairs {
            cm.add(p, t);
            if let Some(tag) = tag {
                strata.entry(tag.to_string()).or_default().add(p, t);
            }
        }
        Self {
            confusion: cm,
            mcc: mcc(&cm),
            tnr: tnr(&cm),
            per_illumination: strata.into_iter().map(|(k, v)| (k, v.into())).collect(),
        }
    }
}

/// Scores a predictions file against the ground truth it carries. Frames
/// without ground truth are skipped.
pub fn evaluate_predictions(preds: &[PredictionRecord]) -> Result<EvalReport> {
    if preds.iter().all(|p| p.truth.is_none()) && !preds.is_empty() {
        return Err(Error::InvalidInput("predictions carry no ground truth".into()));
    }
    Ok(EvalReport::from_pairs(
        preds
            .iter()
            .filter_map(|p| p.truth.map(|t| (p.prediction, t, p.illumination.as_deref()))),
    ))
}

/// Train/test indices of one leave-one-participant-out fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSplit {
    pub participant: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds sorted by participant id.
pub fn fold_splits(records: &[FrameRecord]) -> Result<Vec<FoldSplit>> {
    let mut ids: Vec<&str> = records.iter().map(|r| r.participant_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "leave-one-participant-out needs at least 2 participants, got {}",
            ids.len()
        )));
    }
    Ok(ids
        .into_iter()
        .map(|p| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..records.len()).partition(|&i| records[i].participant_id == p);
            FoldSplit {
                participant: p.to_string(),
                train,
                test,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub participant: String,
    pub train_size: usize,
    pub test_size: usize,
    pub confusion: ConfusionMatrix,
    pub mcc: f64,
    pub tnr: Option<f64>,
    /// Set when training failed; such folds are left out of the mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub folds: Vec<FoldResult>,
    /// Mean MCC over successful folds.
    pub mcc: f64,
    /// Population standard deviation of the fold MCCs.
    pub mcc_std: f64,
    /// Confusion counts pooled over successful folds.
    pub confusion: ConfusionMatrix,
    pub tnr: Option<f64>,
}

/// Leave-one-participant-out cross-validation. `train_fn` sees only the
/// training split (labeling included); `predict_fn` labels one held-out frame.
/// Held-out frames without ground truth are not scored.
pub fn loocv_by_participant<M, TF, PF>(records: &[FrameRecord], train_fn: TF, predict_fn: PF) -> Result<LoocvReport>
where
    M: Send,
    TF: Fn(&[FrameRecord]) -> Result<M> + Sync,
    PF: Fn(&M, &FrameRecord) -> Result<Label> + Sync,
{
    let splits = fold_splits(records)?;
    let folds: Vec<Result<FoldResult>> = splits
        .par_iter()
        .map(|split| {
            let train: Vec<FrameRecord> = split.train.iter().map(|&i| records[i].clone()).collect();
            let base = FoldResult {
                participant: split.participant.clone(),
                train_size: train.len(),
                test_size: split.test.len(),
                confusion: ConfusionMatrix::default(),
                mcc: 0.0,
                tnr: None,
                failed: None,
            };
            let model = match train_fn(&train) {
                Ok(m) => m,
                Err(e) => {
                    log::warn!("fold {}: training failed: {e}", split.participant);
                    return Ok(FoldResult {
                        failed: Some(e.to_string()),
                        ..base
                    });
                }
            };
            let mut cm = ConfusionMatrix::default();
            for &i in &split.test {
                let r = &records[i];
                if let Some(t) = r.label {
                    cm.add(predict_fn(&model, r)?, t);
                }
            }
            Ok(FoldResult {
                confusion: cm,
                mcc: mcc(&cm),
                tnr: tnr(&cm),
                ..base
            })
        })
        .collect();
    let folds: Vec<FoldResult> = folds.into_iter().collect::<Result<_>>()?;

    let ok: Vec<&FoldResult> = folds.iter().filter(|f| f.failed.is_none()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidInput("every cross-validation fold failed to train".into()));
    }
    let n = ok.len() as f64;
    let mean = ok.iter().map(|f| f.mcc).sum::<f64>() / n;
    let var = ok.iter().map(|f| (f.mcc - mean).powi(2)).sum::<f64>() / n;
    let mut pooled = ConfusionMatrix::default();
    for f in &ok {
        pooled.tp += f.confusion.tp;
        pooled.tn += f.confusion.tn;
        pooled.fp += f.confusion.fp;
        pooled.fn_ += f.confusion.fn_;
    }
    Ok(LoocvReport {
        mcc: mean,
        mcc_std: var.sqrt(),
        tnr: tnr(&pooled),
        confusion: pooled,
        folds,
    })
}

/// Trains on one full dataset and scores another, with a per-illumination
/// breakdown when the test frames carry tags.
pub fn cross_dataset_eval<M, TF, PF>(
    train: &[FrameRecord],
    test: &[FrameRecord],
    train_fn: TF,
    predict_fn: PF,
) -> Result<EvalReport>
where
    TF: Fn(&[FrameRecord]) -> Result<M>,
    PF: Fn(&M, &FrameRecord) -> Result<Label>,
{
    if let Some(r) = test.iter().find(|r| r.label.is_none()) {
        return Err(Error::InvalidInput(format!(
            "test frame {}@{} has no ground truth",
            r.session_id, r.t
        )));
    }
    let model = train_fn(train)?;
    let preds: Vec<Label> = test.iter().map(|r| predict_fn(&model, r)).collect::<Result<_>>()?;
    Ok(EvalReport::from_pairs(
        preds
            .into_iter()
            .zip(test)
            .map(|(p, r)| (p, r.label.expect("checked above"), r.illumination.as_deref())),
    ))
}
