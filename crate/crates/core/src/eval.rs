//! Confusion-matrix metrics, rank-based AUC and the nine-ratio split grid.
//!
//! Anomalous is the positive class everywhere in this module.

use std::fmt::Write as _;

use crate::dataset::{split, Instance, Label};
use crate::discretizer::PrecisionSet;
use crate::error::{Error, Result};
use crate::pipeline::train;
use crate::scalar::{mean_std, Scalar};
use crate::scorer::{classify, ranking_score, score_all};
use crate::store::LayerSummary;

/// Train:test ratios of the grid, 1:9 through 9:1.
pub const RATIOS: [(u32, u32); 9] = [
    (1, 9),
    (2, 8),
    (3, 7),
    (4, 6),
    (5, 5),
    (6, 4),
    (7, 3),
    (8, 2),
    (9, 1),
];

pub fn ratio_fraction((train, test): (u32, u32)) -> f64 {
    train as f64 / (train + test) as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(truth: &[Label], predicted: &[Label]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch(truth.len(), predicted.len()));
    }
    let mut c = Confusion::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (Label::Anomalous, Label::Anomalous) => c.tp += 1,
            (Label::Normal, Label::Anomalous) => c.fp += 1,
            (Label::Normal, Label::Normal) => c.tn += 1,
            (Label::Anomalous, Label::Normal) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Accuracy, precision and recall. Undefined ratios are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    pub accuracy: Option<T>,
    pub precision: Option<T>,
    pub recall: Option<T>,
}

fn ratio<T: Scalar>(num: usize, den: usize) -> Option<T> {
    (den > 0).then(|| T::from_count(num) / T::from_count(den))
}

pub fn metrics<T: Scalar>(c: &Confusion) -> Metrics<T> {
    Metrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
    }
}

/// Mann-Whitney AUC: the fraction of (anomalous, normal) pairs in which
/// the anomalous score is higher, ties counting one half. `None` when
/// either class is absent.
pub fn auc<T: Scalar>(scores: &[T], truth: &[Label]) -> Result<Option<T>> {
    if scores.len() != truth.len() {
        return Err(Error::LengthMismatch(truth.len(), scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));

    // Twice the U statistic, kept integral so the only rounding is the
    // final division.
    let mut twice_u: u128 = 0;
    let mut normals_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            match truth[order[j]] {
                Label::Anomalous => pos += 1,
                Label::Normal => neg += 1,
            }
            j += 1;
        }
        twice_u += 2 * pos * normals_below + pos * neg;
        normals_below += neg;
        i = j;
    }
    let positives = truth.iter().filter(|&&l| l == Label::Anomalous).count() as u128;
    let negatives = truth.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }
    let num = T::from_u128(twice_u).expect("representable");
    let den = T::from_u128(2 * positives * negatives).expect("representable");
    Ok(Some(num / den))
}

/// Outcome of training on one split and scoring its test side.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult<T> {
    pub n_train: usize,
    pub n_test: usize,
    /// Training instances removed as contradictory.
    pub removed: usize,
    pub confusion: Confusion,
    pub metrics: Metrics<T>,
    pub auc: Option<T>,
    pub pool: Vec<LayerSummary>,
}

impl<T: Scalar> SplitResult<T> {
    pub fn error_rate(&self) -> Option<T> {
        self.metrics.accuracy.map(|a| T::one() - a)
    }
}

/// Runs the full pipeline on `train` and evaluates it on `test`.
pub fn evaluate_split<T: Scalar>(
    train_set: &[Instance<T>],
    test_set: &[Instance<T>],
    attribute_names: &[String],
    precisions: &PrecisionSet,
    r: T,
) -> Result<SplitResult<T>> {
    let outcome = train(train_set, attribute_names, precisions.clone(), r)?;
    let store = &outcome.store;
    let gb = *store
        .guard_band()
        .expect("pipeline calibrates a guard band");
    let symbolic = store.discretizer().discretize_all(test_set);
    let pairs = score_all(&symbolic, store)?;
    let truth: Vec<Label> = test_set.iter().map(|i| i.label).collect();
    let ranking: Vec<T> = pairs.iter().map(ranking_score).collect();
    let predicted: Vec<Label> = pairs
        .into_iter()
        .map(|sp| classify(sp, &gb).label)
        .collect();
    let c = confusion(&truth, &predicted)?;
    Ok(SplitResult {
        n_train: train_set.len(),
        n_test: test_set.len(),
        removed: outcome.removed.len(),
        confusion: c,
        metrics: metrics(&c),
        auc: auc(&ranking, &truth)?,
        pool: store.summary(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell<T> {
    pub ratio: (u32, u32),
    pub repeat: usize,
    pub seed: u64,
    pub result: SplitResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport<T> {
    pub precisions: PrecisionSet,
    pub r: T,
    pub seed: u64,
    pub repeats: usize,
    /// Ordered by ratio, then repeat.
    pub cells: Vec<GridCell<T>>,
}

/// Trains and evaluates every ratio of [`RATIOS`] from scratch, `repeats`
/// times each with seeds `seed, seed + 1, ...`.
pub fn run_split_grid<T: Scalar>(
    instances: &[Instance<T>],
    attribute_names: &[String],
    precisions: &PrecisionSet,
    r: T,
    seed: u64,
    repeats: usize,
) -> Result<GridReport<T>> {
    let mut cells = Vec::with_capacity(RATIOS.len() * repeats);
    for ratio in RATIOS {
        for repeat in 0..repeats {
            let cell_seed = seed.wrapping_add(repeat as u64);
            let run = || -> Result<SplitResult<T>> {
                let (tr, te) = split(instances, ratio_fraction(ratio), cell_seed)?;
                evaluate_split(&tr, &te, attribute_names, precisions, r)
            };
            let result = run().map_err(|e| Error::GridCell {
                ratio: format!("{}:{}", ratio.0, ratio.1),
                source: Box::new(e),
            })?;
            tracing::info!(
                ratio = %format!("{}:{}", ratio.0, ratio.1),
                repeat,
                accuracy = ?result.metrics.accuracy.and_then(|a| a.to_f64()),
                "grid cell done"
            );
            cells.push(GridCell {
                ratio,
                repeat,
                seed: cell_seed,
                result,
            });
        }
    }
    Ok(GridReport {
        precisions: precisions.clone(),
        r,
        seed,
        repeats,
        cells,
    })
}

/// Column order of the report CSV.
pub const REPORT_COLUMNS: [&str; 18] = [
    "precisions",
    "ratio",
    "train_fraction",
    "repeat",
    "seed",
    "n_train",
    "n_test",
    "removed",
    "tp",
    "fp",
    "tn",
    "fn",
    "accuracy",
    "recall",
    "precision",
    "auc",
    "error_rate",
    "patterns",
];

fn fmt_metric<T: Scalar>(v: Option<T>, digits: usize) -> String {
    v.and_then(|v| v.to_f64())
        .map_or_else(String::new, |v| format!("{v:.digits$}"))
}

fn fmt_pool(pool: &[LayerSummary]) -> String {
    pool.iter()
        .map(|l| {
            format!(
                "normal@{}={};anomalous@{}={}",
                l.precision, l.normal, l.precision, l.anomalous
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Mean and population std of a metric over repeats; `None` when any
/// repeat left it undefined.
fn summarize<T: Scalar>(values: &[Option<T>]) -> Option<(T, T)> {
    let v: Option<Vec<T>> = values.iter().copied().collect();
    mean_std(&v?)
}

impl<T: Scalar> GridReport<T> {
    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",")
    }

    /// One line per cell, then `mean` and `std` lines per ratio when
    /// repeats > 1. No header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for ratio in RATIOS {
            let cells: Vec<&GridCell<T>> = self.cells.iter().filter(|c| c.ratio == ratio).collect();
            for c in &cells {
                let r = &c.result;
                let _ = writeln!(
                    out,
                    "\"{}\",{}:{},{:.6},{},{},{},{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
                    self.precisions,
                    ratio.0,
                    ratio.1,
                    ratio_fraction(ratio),
                    c.repeat,
                    c.seed,
                    r.n_train,
                    r.n_test,
                    r.removed,
                    r.confusion.tp,
                    r.confusion.fp,
                    r.confusion.tn,
                    r.confusion.fn_,
                    fmt_metric(r.metrics.accuracy, 6),
                    fmt_metric(r.metrics.recall, 6),
                    fmt_metric(r.metrics.precision, 6),
                    fmt_metric(r.auc, 6),
                    fmt_metric(r.error_rate(), 6),
                    fmt_pool(&r.pool),
                );
            }
            if cells.len() > 1 {
                let stats = self.ratio_summary(ratio);
                for (tag, pick) in [("mean", 0usize), ("std", 1)] {
                    let get = |m: Option<(T, T)>| m.map(|(mu, sd)| if pick == 0 { mu } else { sd });
                    let _ = writeln!(
                        out,
                        "\"{}\",{}:{},{:.6},{},,,,,,,,,{},{},{},{},{},",
                        self.precisions,
                        ratio.0,
                        ratio.1,
                        ratio_fraction(ratio),
                        tag,
                        fmt_metric(get(stats.accuracy), 6),
                        fmt_metric(get(stats.recall), 6),
                        fmt_metric(get(stats.precision), 6),
                        fmt_metric(get(stats.auc), 6),
                        fmt_metric(get(stats.error_rate), 6),
                    );
                }
            }
        }
        out
    }

    pub fn ratio_summary(&self, ratio: (u32, u32)) -> RatioSummary<T> {
        let cells: Vec<&SplitResult<T>> = self
            .cells
            .iter()
            .filter(|c| c.ratio == ratio)
            .map(|c| &c.result)
            .collect();
        let col = |f: &dyn Fn(&SplitResult<T>) -> Option<T>| -> Option<(T, T)> {
            summarize(&cells.iter().map(|c| f(c)).collect::<Vec<_>>())
        };
        RatioSummary {
            accuracy: col(&|c| c.metrics.accuracy),
            recall: col(&|c| c.metrics.recall),
            precision: col(&|c| c.metrics.precision),
            auc: col(&|c| c.auc),
            error_rate: col(&|c| c.error_rate()),
        }
    }

    /// Text table in the Accuracy / Recall / Precision / AUC layout, one
    /// row per ratio (mean ± std when repeats > 1).
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "precisions {}  r {}  seed {}  repeats {}",
            self.precisions, self.r, self.seed, self.repeats
        );
        let _ = writeln!(
            out,
            "{:<7} {:>17} {:>17} {:>17} {:>17}",
            "Ratios", "Accuracy", "Recall", "Precision", "AUC"
        );
        for ratio in RATIOS {
            let s = self.ratio_summary(ratio);
            let cell = |m: Option<(T, T)>| match m.map(|(a, b)| {
                (
                    a.to_f64().unwrap_or(f64::NAN),
                    b.to_f64().unwrap_or(f64::NAN),
                )
            }) {
                None => "-".to_string(),
                Some((mu, _)) if self.repeats <= 1 => format!("{mu:.4}"),
                Some((mu, sd)) => format!("{mu:.4} ± {sd:.4}"),
            };
            let _ = writeln!(
                out,
                "{:<7} {:>17} {:>17} {:>17} {:>17}",
                format!("{} | {}", ratio.0, ratio.1),
                cell(s.accuracy),
                cell(s.recall),
                cell(s.precision),
                cell(s.auc)
            );
        }
        out
    }
}

/// Per-ratio (mean, std) of each metric across repeats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSummary<T> {
    pub accuracy: Option<(T, T)>,
    pub recall: Option<(T, T)>,
    pub precision: Option<(T, T)>,
    pub auc: Option<(T, T)>,
    pub error_rate: Option<(T, T)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Anomalous as A, Normal as N};

    #[test]
    fn confusion_examples() {
        let c = confusion(&[A, A, N, N], &[A, N, A, N]).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        let c = confusion(&[A, N, N], &[A, N, N]).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&[N, N, N], &[A, A, A]).unwrap();
        assert_eq!(c.fp, 3);
        assert!(matches!(
            confusion(&[A], &[A, N]),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn metric_examples() {
        let m: Metrics<f64> = metrics(&Confusion {
            tp: 1,
            fp: 1,
            tn: 1,
            fn_: 1,
        });
        assert_eq!(
            m,
            Metrics {
                accuracy: Some(0.5),
                precision: Some(0.5),
                recall: Some(0.5)
            }
        );
        let m: Metrics<f64> = metrics(&Confusion {
            tp: 0,
            fp: 0,
            tn: 3,
            fn_: 1,
        });
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        let m: Metrics<f64> = metrics(&Confusion {
            tp: 99,
            fp: 1,
            tn: 0,
            fn_: 0,
        });
        assert_eq!((m.precision, m.recall), (Some(0.99), Some(1.0)));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            auc(&[3.0, 2.0, 1.0, 2.0], &[A, A, N, N]).unwrap(),
            Some(0.875)
        );
        assert_eq!(
            auc(&[5.0f32, 6.0, 1.0, 2.0], &[A, A, N, N]).unwrap(),
            Some(1.0)
        );
        assert_eq!(auc(&[1.0; 6], &[A, N, A, N, N, A]).unwrap(), Some(0.5));
        assert_eq!(auc(&[1.0, 2.0], &[A, A]).unwrap(), None);
        assert!(matches!(
            auc(&[f64::NAN, 1.0], &[A, N]),
            Err(Error::NonFiniteScore(0))
        ));
    }
}
