//! End-to-end training: statistics, discretization, contradiction
//! filtering, mining and guard-band calibration.

use crate::dataset::{compute_stats, Instance, Label};
use crate::discretizer::{anti_contradiction_filter, Discretizer, PrecisionSet, SymbolicInstance};
use crate::error::Result;
use crate::miner::build_store;
use crate::scalar::Scalar;
use crate::scorer::calibrate_guard_band;
use crate::store::PatternStore;

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub store: PatternStore<T>,
    /// Training instances that survived the contradiction filter.
    pub kept: usize,
    /// Ids of instances dropped as contradictory.
    pub removed: Vec<usize>,
}

pub fn train<T: Scalar>(
    train: &[Instance<T>],
    attribute_names: &[String],
    precisions: PrecisionSet,
    r: T,
) -> Result<TrainOutcome<T>> {
    let stats = compute_stats(train);
    let discretizer = Discretizer::new(attribute_names, stats, precisions);
    let symbolic = discretizer.discretize_all(train);
    let (kept, removed) = anti_contradiction_filter(symbolic);
    if !removed.is_empty() {
        tracing::info!(
            removed = removed.len(),
            "contradictory training instances removed"
        );
    }
    let store = build_store(&kept, discretizer)?;
    let normals: Vec<SymbolicInstance> = kept
        .iter()
        .filter(|i| i.label == Label::Normal)
        .cloned()
        .collect();
    let guard_band = calibrate_guard_band(&normals, &store, r)?;
    Ok(TrainOutcome {
        store: store.with_guard_band(guard_band),
        kept: kept.len(),
        removed: removed.iter().map(|i| i.id).collect(),
    })
}
