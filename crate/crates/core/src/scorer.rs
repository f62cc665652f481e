//! Normal/anomalous scoring, guard-band calibration, the three decision
//! rules and per-verdict explanations.

use std::fmt;

use rayon::prelude::*;

use crate::dataset::{Instance, Label};
use crate::discretizer::{Symbol, SymbolicInstance};
use crate::error::{Error, Result};
use crate::scalar::{mean_std, Scalar};
use crate::store::{ClassPatterns, PatternStore, SymbolId};

/// One pattern that fired for a scored instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    /// Position of the pattern's layer in the store's precision set.
    pub layer_slot: usize,
    pub layer: u32,
    pub class: Label,
    /// Index of the pattern within its (layer, class) collection.
    pub index: u32,
    /// `freq * len^2`.
    pub contribution: u64,
}

/// Normal and anomalous scores with the patterns that produced them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScorePair {
    pub ns: u64,
    pub as_: u64,
    pub matched_normal: Vec<Match>,
    pub matched_anomalous: Vec<Match>,
}

/// `mu_n - r * sigma_n` over the normal scores of the training normals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardBand<T> {
    pub mu_n: T,
    pub sigma_n: T,
    pub r: T,
    /// Number of normal training instances calibrated over. Zero disables
    /// the band.
    pub samples: usize,
}

impl<T: Scalar> GuardBand<T> {
    pub fn disabled(r: T) -> Self {
        GuardBand {
            mu_n: T::zero(),
            sigma_n: T::zero(),
            r,
            samples: 0,
        }
    }

    pub fn threshold(&self) -> T {
        if self.samples == 0 {
            T::neg_infinity()
        } else {
            self.mu_n - self.r * self.sigma_n
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    ScoreDominance,
    DoubleZero,
    StatisticalDeviation,
    NormalDefault,
}

impl Rule {
    pub fn label(self) -> Label {
        match self {
            Rule::NormalDefault => Label::Normal,
            _ => Label::Anomalous,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::ScoreDominance => "ScoreDominance",
            Rule::DoubleZero => "DoubleZero",
            Rule::StatisticalDeviation => "StatisticalDeviation",
            Rule::NormalDefault => "NormalDefault",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<T> {
    pub label: Label,
    pub rule: Rule,
    pub scores: ScorePair,
    /// Guard-band threshold the verdict was decided against.
    pub threshold: T,
}

fn matches_in(
    patterns: &ClassPatterns,
    ids: &[SymbolId],
    layer_slot: usize,
    layer: u32,
    class: Label,
    out: &mut Vec<Match>,
) -> u64 {
    let mut total = 0;
    for index in patterns.subsets_of(ids) {
        let contribution = patterns.patterns()[index as usize].weight();
        total += contribution;
        out.push(Match {
            layer_slot,
            layer,
            class,
            index,
            contribution,
        });
    }
    total
}

/// Sums `freq * len^2` over every stored pattern contained in the
/// instance's matching layer, for each class.
pub fn score<T: Scalar>(t: &SymbolicInstance, store: &PatternStore<T>) -> Result<ScorePair> {
    let levels = store.discretizer().precisions.levels();
    if t.precisions() != levels {
        return Err(Error::PrecisionMismatch {
            expected: levels.to_vec(),
            found: t.precisions(),
        });
    }
    let mut sp = ScorePair::default();
    for (slot, (layer, stored)) in t.layers.iter().zip(store.layers()).enumerate() {
        let ids = store.symbols().encode(&layer.symbols);
        sp.ns += matches_in(
            &stored.normal,
            &ids,
            slot,
            layer.precision,
            Label::Normal,
            &mut sp.matched_normal,
        );
        sp.as_ += matches_in(
            &stored.anomalous,
            &ids,
            slot,
            layer.precision,
            Label::Anomalous,
            &mut sp.matched_anomalous,
        );
    }
    Ok(sp)
}

pub fn score_all<T: Scalar>(
    instances: &[SymbolicInstance],
    store: &PatternStore<T>,
) -> Result<Vec<ScorePair>> {
    instances.par_iter().map(|t| score(t, store)).collect()
}

/// Population mean and std of the normal scores of `normal_train`.
pub fn calibrate_guard_band<T: Scalar>(
    normal_train: &[SymbolicInstance],
    store: &PatternStore<T>,
    r: T,
) -> Result<GuardBand<T>> {
    let scores: Vec<T> = score_all(normal_train, store)?
        .into_iter()
        .map(|sp| T::from_score(sp.ns))
        .collect();
    Ok(match mean_std(&scores) {
        Some((mu_n, sigma_n)) => GuardBand {
            mu_n,
            sigma_n,
            r,
            samples: scores.len(),
        },
        None => {
            tracing::warn!("no normal training instances; statistical deviation rule disabled");
            GuardBand::disabled(r)
        }
    })
}

/// Applies the decision rules. Both scores zero is attributed to
/// `DoubleZero`; otherwise `as_ >= ns` is `ScoreDominance`; otherwise a
/// normal score strictly below the guard band is `StatisticalDeviation`.
pub fn classify<T: Scalar>(sp: ScorePair, gb: &GuardBand<T>) -> Verdict<T> {
    let threshold = gb.threshold();
    let rule = if sp.ns == 0 && sp.as_ == 0 {
        Rule::DoubleZero
    } else if sp.as_ >= sp.ns {
        Rule::ScoreDominance
    } else if T::from_score(sp.ns) < threshold {
        Rule::StatisticalDeviation
    } else {
        Rule::NormalDefault
    };
    Verdict {
        label: rule.label(),
        rule,
        scores: sp,
        threshold,
    }
}

/// `as_ - ns`; higher is more anomalous. AUC is computed over this.
pub fn ranking_score<T: Scalar>(sp: &ScorePair) -> T {
    T::from_score(sp.as_) - T::from_score(sp.ns)
}

impl<T: Scalar> PatternStore<T> {
    /// Discretizes, scores and classifies one raw instance.
    pub fn predict(&self, inst: &Instance<T>) -> Result<Verdict<T>> {
        let symbolic = self.discretizer().discretize(inst);
        let sp = score(&symbolic, self)?;
        let gb = self
            .guard_band()
            .copied()
            .unwrap_or_else(|| GuardBand::disabled(T::zero()));
        Ok(classify(sp, &gb))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRow {
    pub class: Label,
    pub layer: u32,
    pub freq: u64,
    pub length: usize,
    pub contribution: u64,
    pub symbols: Vec<Symbol>,
}

/// Human-readable account of one verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation<T> {
    pub label: Label,
    pub rule: Rule,
    pub ns: u64,
    pub as_: u64,
    pub threshold: T,
    /// Sorted by contribution, largest first.
    pub rows: Vec<ExplanationRow>,
}

pub fn explain<T: Scalar>(verdict: &Verdict<T>, store: &PatternStore<T>) -> Explanation<T> {
    let mut rows: Vec<ExplanationRow> = verdict
        .scores
        .matched_normal
        .iter()
        .chain(&verdict.scores.matched_anomalous)
        .map(|m| {
            let p = store.pattern(m.layer_slot, m.class, m.index);
            ExplanationRow {
                class: m.class,
                layer: m.layer,
                freq: p.freq,
                length: p.len(),
                contribution: m.contribution,
                symbols: store.resolve(p),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.contribution
            .cmp(&a.contribution)
            .then(a.class.cmp(&b.class))
            .then(a.layer.cmp(&b.layer))
            .then_with(|| a.symbols.cmp(&b.symbols))
    });
    Explanation {
        label: verdict.label,
        rule: verdict.rule,
        ns: verdict.scores.ns,
        as_: verdict.scores.as_,
        threshold: verdict.threshold,
        rows,
    }
}

impl<T: Scalar> Explanation<T> {
    /// Distinct layers that contributed, ascending.
    pub fn layers(&self) -> Vec<u32> {
        let mut l: Vec<u32> = self.rows.iter().map(|r| r.layer).collect();
        l.sort_unstable();
        l.dedup();
        l
    }
}

impl<T: Scalar> fmt::Display for Explanation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {} (rule {})", self.label, self.rule)?;
        writeln!(f, "normal score NS = {}", self.ns)?;
        writeln!(f, "anomalous score AS = {}", self.as_)?;
        writeln!(f, "guard band threshold = {}", self.threshold)?;
        if self.rows.is_empty() {
            return writeln!(f, "no coherent pattern matched");
        }
        for layer in self.layers() {
            let rows: Vec<&ExplanationRow> =
                self.rows.iter().filter(|r| r.layer == layer).collect();
            let sum = |c: Label| -> u64 {
                rows.iter()
                    .filter(|r| r.class == c)
                    .map(|r| r.contribution)
                    .sum()
            };
            writeln!(
                f,
                "\nlayer p={layer}: normal {} / anomalous {}",
                sum(Label::Normal),
                sum(Label::Anomalous)
            )?;
            writeln!(
                f,
                "  {:<9} {:>8} {:>6} {:>12}  symbols",
                "class", "freq", "len", "contrib"
            )?;
            for r in rows {
                let symbols: Vec<String> = r
                    .symbols
                    .iter()
                    .map(|s| format!("{}[{}]={}", s.attribute, s.precision, s.code))
                    .collect();
                writeln!(
                    f,
                    "  {:<9} {:>8} {:>6} {:>12}  {}",
                    r.class.to_string(),
                    r.freq,
                    r.length,
                    r.contribution,
                    symbols.join(" ")
                )?;
            }
        }
        Ok(())
    }
}
