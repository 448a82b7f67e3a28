//! Evaluation (confusion counts, MCC, TNR, cross-validation protocols) and
//! attention analytics over prediction timelines.

mod eval;
mod timeline;

pub use eval::{
    confusion, cross_dataset_eval, evaluate_predictions, fold_splits, loocv_by_participant, mcc, tnr,
    ConfusionMatrix, EvalReport, FoldResult, FoldSplit, LoocvReport, StratumReport,
};
pub use timeline::{
    aggregate_reports, attention_report, build_timeline, AttentionReport, Block, Focus, PrimaryFocus, SpanStats,
    Timeline,
};
