//! Interpretable intrusion detection from coherent feature patterns.
//!
//! Training symbolizes every record at several z-score rounding
//! precisions, drops contradictory records, and mines, per precision
//! layer, the pairwise intersections of same-class records that no
//! opposite-class record contains. Inference sums `freq * len^2` over the
//! patterns a record contains, per class, and labels it with three
//! auditable rules. Every verdict can be traced back to the exact patterns
//! that produced it.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod dataset;
pub mod discretizer;
pub mod error;
pub mod eval;
pub mod miner;
pub mod model_file;
pub mod pipeline;
pub mod scalar;
pub mod scorer;
pub mod store;

pub use dataset::{
    binarize_labels, compute_stats, load_csv, read_csv, split, AttributeStats, AttributeValue,
    Instance, Label, LabelColumn, RawDataset,
};
pub use discretizer::{
    anti_contradiction_filter, discretize_instance, discretize_value, zscore, Discretizer,
    PrecisionSet, PrecisionTag, Symbol, SymbolicInstance,
};
pub use error::{Error, Result};
pub use eval::{
    auc, confusion, evaluate_split, metrics, run_split_grid, Confusion, GridReport, Metrics,
};
pub use miner::{build_store, coherence_filter, count_frequency, mine_candidates, reference_mine};
pub use model_file::{load_model, save_model, LoadedModel};
pub use pipeline::{train, TrainOutcome};
pub use scalar::Scalar;
pub use scorer::{
    calibrate_guard_band, classify, explain, ranking_score, score, Explanation, GuardBand, Rule,
    ScorePair, Verdict,
};
pub use store::{Pattern, PatternRecord, PatternStore};

pub type Model = PatternStore<f64>;
pub type ModelF32 = PatternStore<f32>;
pub type Dataset = RawDataset<f64>;
pub type Record = Instance<f64>;
pub type Guard = GuardBand<f64>;
pub type Decision = Verdict<f64>;
pub type Report = GridReport<f64>;
