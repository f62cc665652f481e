#![allow(dead_code)]

use std::sync::Arc;

use igmd_core::{
    anti_contradiction_filter, compute_stats, AttributeValue, Discretizer, Instance, Label,
    PatternStore, PrecisionSet, SymbolicInstance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(width: usize) -> Vec<String> {
    (0..width).map(|i| format!("f{i}")).collect()
}

/// Column kinds for small random datasets.
#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Numeric,
    Categorical,
}

pub fn kinds(rng: &mut ChaCha8Rng, width: usize) -> Vec<Kind> {
    (0..width)
        .map(|_| {
            if rng.gen_bool(0.7) {
                Kind::Numeric
            } else {
                Kind::Categorical
            }
        })
        .collect()
}

/// One value drawn from a tiny alphabet so that intersections are common.
pub fn value(rng: &mut ChaCha8Rng, kind: Kind) -> AttributeValue<f64> {
    if rng.gen_bool(0.05) {
        return AttributeValue::Missing;
    }
    match kind {
        Kind::Numeric => AttributeValue::Numeric(rng.gen_range(0..4) as f64 * 1.5),
        Kind::Categorical => {
            AttributeValue::Categorical(["a", "b", "c"][rng.gen_range(0..3)].into())
        }
    }
}

pub fn instance(rng: &mut ChaCha8Rng, id: usize, kinds: &[Kind]) -> Instance<f64> {
    Instance {
        id,
        label: if rng.gen_bool(0.5) {
            Label::Normal
        } else {
            Label::Anomalous
        },
        values: kinds.iter().map(|&k| value(rng, k)).collect(),
    }
}

/// A dataset of at most `max_n` rows and `max_width` attributes.
pub fn small_dataset(
    seed: u64,
    max_n: usize,
    max_width: usize,
) -> (Vec<String>, Vec<Kind>, Vec<Instance<f64>>) {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_n);
    let width = r.gen_range(1..=max_width);
    let k = kinds(&mut r, width);
    let data = (0..n).map(|i| instance(&mut r, i, &k)).collect();
    (names(width), k, data)
}

/// Discretizes and filters a training set the way the pipeline does.
pub fn prepare(
    attrs: &[String],
    data: &[Instance<f64>],
    precisions: &[u32],
) -> (Discretizer<f64>, Vec<SymbolicInstance>) {
    let d = Discretizer::new(
        attrs,
        compute_stats(data),
        PrecisionSet::new(precisions.to_vec()).unwrap(),
    );
    let (kept, _) = anti_contradiction_filter(d.discretize_all(data));
    (d, kept)
}

/// NS and AS by brute force: scan every stored pattern and test containment
/// against the instance's layer of the same precision.
pub fn naive_score(store: &PatternStore<f64>, t: &SymbolicInstance) -> (u64, u64) {
    let (mut ns, mut as_) = (0, 0);
    for rec in store.records() {
        let layer = t.layer(rec.layer).expect("layer present");
        if rec.symbols.iter().all(|s| layer.symbols.contains(s)) {
            let len = rec.symbols.len() as u64;
            match rec.class {
                Label::Normal => ns += rec.freq * len * len,
                Label::Anomalous => as_ += rec.freq * len * len,
            }
        }
    }
    (ns, as_)
}

/// Exhaustive pairwise AUC.
pub fn pairwise_auc(scores: &[f64], truth: &[Label]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0usize;
    for (i, &ti) in truth.iter().enumerate() {
        if ti != Label::Anomalous {
            continue;
        }
        for (j, &tj) in truth.iter().enumerate() {
            if tj != Label::Normal {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

/// Records whose classes differ only in the first decimal of one
/// attribute's z-score: `x = 20 * base + 3` for normal rows and
/// `20 * base - 3` for anomalous rows, with `base` in {-1, 0, 1} shared by
/// both classes, plus three categorical columns drawn identically for
/// both classes. At zero decimals the classes are indistinguishable.
pub fn first_decimal_dataset(n_per_class: usize, seed: u64) -> (Vec<String>, Vec<Instance<f64>>) {
    let mut r = rng(seed);
    let mut data = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let label = if i % 2 == 0 {
            Label::Normal
        } else {
            Label::Anomalous
        };
        let base = ((i / 2) % 3) as f64 - 1.0;
        let offset = if label == Label::Normal { 3.0 } else { -3.0 };
        let mut values = vec![AttributeValue::Numeric(20.0 * base + offset)];
        for _ in 0..3 {
            values.push(AttributeValue::Categorical(
                ["a", "b", "c"][r.gen_range(0..3)].into(),
            ));
        }
        data.push(Instance {
            id: i,
            label,
            values,
        });
    }
    (
        vec!["x".into(), "c1".into(), "c2".into(), "c3".into()],
        data,
    )
}

/// Flow-like records: numeric columns with class-dependent location,
/// a few categorical columns and sporadic missing values.
pub fn flow_dataset(n: usize, width: usize, seed: u64) -> (Vec<String>, Vec<Instance<f64>>) {
    let mut r = rng(seed);
    let data = (0..n)
        .map(|id| {
            let label = if r.gen_bool(0.4) {
                Label::Anomalous
            } else {
                Label::Normal
            };
            let shift = if label == Label::Anomalous { 0.8 } else { 0.0 };
            let values = (0..width)
                .map(|c| {
                    if r.gen_bool(0.02) {
                        AttributeValue::Missing
                    } else if c % 5 == 4 {
                        let k = r.gen_range(0..4) + if label == Label::Anomalous { 1 } else { 0 };
                        AttributeValue::Categorical(format!("v{k}"))
                    } else {
                        let g: f64 = (0..4).map(|_| r.gen::<f64>()).sum::<f64>() - 2.0;
                        AttributeValue::Numeric(100.0 * (c as f64 + 1.0) + 10.0 * (g + shift))
                    }
                })
                .collect();
            Instance { id, label, values }
        })
        .collect();
    (names(width), data)
}

pub fn arc(name: &str) -> Arc<str> {
    Arc::from(name)
}
