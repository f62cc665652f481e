//! Coherent pattern discovery.
//!
//! For each precision layer and class, every pair of same-class instances
//! is intersected; an intersection survives if no opposite-class instance
//! contains it, and its frequency is the number of same-class instances
//! that contain it.
//!
//! Instances are interned to sorted id vectors. Identical rows are grouped
//! before the pair stage, so a group of `k` duplicates costs one row plus
//! its self-intersection. Containment and frequency queries run over
//! per-symbol bitsets of rows, intersected rarest-symbol first.

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use crate::dataset::Label;
use crate::discretizer::{Discretizer, Symbol, SymbolicInstance};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::store::{Pattern, PatternRecord, PatternStore, SymbolId, SymbolTable};

/// Largest training set [`reference_mine`] accepts.
pub const ORACLE_LIMIT: usize = 16;

/// Distinct rows of one class at one layer with their multiplicities.
struct Rows {
    sets: Vec<Vec<SymbolId>>,
    counts: Vec<u64>,
}

impl Rows {
    fn new(encoded: Vec<Vec<SymbolId>>) -> Self {
        let mut counts: HashMap<Vec<SymbolId>, u64> = HashMap::new();
        for set in encoded {
            *counts.entry(set).or_default() += 1;
        }
        let mut pairs: Vec<(Vec<SymbolId>, u64)> = counts.into_iter().collect();
        pairs.sort_unstable();
        let (sets, counts) = pairs.into_iter().unzip();
        Rows { sets, counts }
    }

    fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Row bitsets per symbol, for containment and frequency queries.
struct Postings {
    bits: HashMap<SymbolId, FixedBitSet>,
    weights: Vec<u64>,
}

impl Postings {
    fn new(rows: &Rows) -> Self {
        let n = rows.sets.len();
        let mut bits: HashMap<SymbolId, FixedBitSet> = HashMap::new();
        for (r, set) in rows.sets.iter().enumerate() {
            for &s in set {
                bits.entry(s)
                    .or_insert_with(|| FixedBitSet::with_capacity(n))
                    .insert(r);
            }
        }
        Postings {
            bits,
            weights: rows.counts.clone(),
        }
    }

    /// Rows containing every symbol of `pattern`, or `None` when some symbol
    /// occurs in no row.
    fn containing(&self, pattern: &[SymbolId]) -> Option<FixedBitSet> {
        let mut lists = Vec::with_capacity(pattern.len());
        for s in pattern {
            lists.push(self.bits.get(s)?);
        }
        lists.sort_by_key(|b| b.count_ones(..));
        let (first, rest) = lists.split_first()?;
        let mut acc = (*first).clone();
        for b in rest {
            acc.intersect_with(b);
            if acc.is_clear() {
                break;
            }
        }
        Some(acc)
    }

    fn contained_anywhere(&self, pattern: &[SymbolId]) -> bool {
        self.containing(pattern).is_some_and(|b| !b.is_clear())
    }

    fn frequency(&self, pattern: &[SymbolId]) -> u64 {
        self.containing(pattern)
            .map_or(0, |b| b.ones().map(|r| self.weights[r]).sum())
    }
}

fn intersect_sorted(a: &[SymbolId], b: &[SymbolId], out: &mut Vec<SymbolId>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

/// All distinct non-empty pairwise intersections, sorted.
fn pair_candidates(rows: &Rows) -> Vec<Vec<SymbolId>> {
    let sets = &rows.sets;
    let mut found: HashSet<Vec<SymbolId>> = (0..sets.len())
        .into_par_iter()
        .fold(
            || (HashSet::new(), Vec::new()),
            |(mut acc, mut buf): (HashSet<Vec<SymbolId>>, Vec<SymbolId>), i| {
                if rows.counts[i] >= 2 && !sets[i].is_empty() {
                    acc.insert(sets[i].clone());
                }
                for j in i + 1..sets.len() {
                    intersect_sorted(&sets[i], &sets[j], &mut buf);
                    if !buf.is_empty() && !acc.contains(&buf) {
                        acc.insert(buf.clone());
                    }
                }
                (acc, buf)
            },
        )
        .map(|(acc, _)| acc)
        .reduce(HashSet::new, |a, b| {
            let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            big.extend(small);
            big
        });
    let mut out: Vec<Vec<SymbolId>> = found.drain().collect();
    out.sort_unstable();
    out
}

/// Mines one class at one layer against the opposite class.
fn mine_class(class: Label, layer: u32, same: &Rows, opposite: &Rows) -> Vec<Pattern> {
    if same.total() < 2 {
        tracing::warn!(%class, layer, "fewer than two instances; no patterns mined");
        return Vec::new();
    }
    let candidates = pair_candidates(same);
    let opposite = Postings::new(opposite);
    let same = Postings::new(same);
    candidates
        .into_par_iter()
        .filter(|c| !opposite.contained_anywhere(c))
        .map(|symbols| {
            let freq = same.frequency(&symbols);
            Pattern {
                symbols,
                class,
                layer,
                freq,
            }
        })
        .collect()
}

fn layer_sets(
    instances: &[SymbolicInstance],
    layer: u32,
) -> impl Iterator<Item = (&SymbolicInstance, &[Symbol])> {
    instances.iter().map(move |inst| {
        let symbols = inst.layer(layer).map_or(&[][..], |l| l.symbols.as_slice());
        (inst, symbols)
    })
}

fn encode_rows<'a, I>(table: &SymbolTable, sets: I) -> Rows
where
    I: Iterator<Item = &'a [Symbol]>,
{
    Rows::new(sets.map(|s| table.encode(s)).collect())
}

fn check_layers(train: &[SymbolicInstance], levels: &[u32]) -> Result<()> {
    match train.iter().find(|i| i.precisions() != levels) {
        Some(bad) => Err(Error::PrecisionMismatch {
            expected: levels.to_vec(),
            found: bad.precisions(),
        }),
        None => Ok(()),
    }
}

/// Mines every layer of the discretizer's precision set independently and
/// returns the immutable store (without a guard band).
pub fn build_store<T: Scalar>(
    train: &[SymbolicInstance],
    discretizer: Discretizer<T>,
) -> Result<PatternStore<T>> {
    let levels = discretizer.precisions.levels().to_vec();
    check_layers(train, &levels)?;
    let table = SymbolTable::from_symbols(
        train
            .iter()
            .flat_map(|i| i.layers.iter().flat_map(|l| l.symbols.iter().cloned())),
    );
    let layers = levels
        .par_iter()
        .map(|&layer| {
            let rows_of = |class: Label| {
                encode_rows(
                    &table,
                    layer_sets(train, layer)
                        .filter(|(i, _)| i.label == class)
                        .map(|(_, s)| s),
                )
            };
            let normal = rows_of(Label::Normal);
            let anomalous = rows_of(Label::Anomalous);
            let (cnp, cap) = rayon::join(
                || mine_class(Label::Normal, layer, &normal, &anomalous),
                || mine_class(Label::Anomalous, layer, &anomalous, &normal),
            );
            (cnp, cap)
        })
        .collect();
    Ok(PatternStore::assemble(discretizer, table, layers))
}

/// Table over every symbol of `instances` at `layer` plus `extra`.
fn local_table<'a>(
    instances: &'a [SymbolicInstance],
    layer: u32,
    extra: impl Iterator<Item = &'a Symbol>,
) -> SymbolTable {
    SymbolTable::from_symbols(
        layer_sets(instances, layer)
            .flat_map(|(_, s)| s.iter())
            .chain(extra)
            .cloned(),
    )
}

/// Distinct non-empty pairwise intersections of the instances' layer sets,
/// each sorted canonically, in canonical order.
pub fn mine_candidates(class_instances: &[SymbolicInstance], layer: u32) -> Vec<Vec<Symbol>> {
    if class_instances.len() < 2 {
        tracing::warn!(layer, "fewer than two instances; no candidates");
        return Vec::new();
    }
    let table = local_table(class_instances, layer, std::iter::empty());
    let rows = encode_rows(&table, layer_sets(class_instances, layer).map(|(_, s)| s));
    pair_candidates(&rows)
        .into_iter()
        .map(|c| c.iter().map(|&s| table.symbol(s).clone()).collect())
        .collect()
}

/// Keeps the candidates that no opposite-class instance contains at `layer`.
pub fn coherence_filter(
    candidates: Vec<Vec<Symbol>>,
    opposite_instances: &[SymbolicInstance],
    layer: u32,
) -> Vec<Vec<Symbol>> {
    let table = local_table(opposite_instances, layer, std::iter::empty());
    let rows = encode_rows(
        &table,
        layer_sets(opposite_instances, layer).map(|(_, s)| s),
    );
    let postings = Postings::new(&rows);
    candidates
        .into_iter()
        .filter(|c| {
            // A symbol no opposite instance has makes the candidate coherent.
            let ids: Vec<SymbolId> = c.iter().filter_map(|s| table.id(s)).collect();
            ids.len() < c.len() || !postings.contained_anywhere(&ids)
        })
        .collect()
}

/// Number of instances whose `layer` set contains `pattern`.
pub fn count_frequency(
    pattern: &[Symbol],
    class_instances: &[SymbolicInstance],
    layer: u32,
) -> u64 {
    let table = local_table(class_instances, layer, pattern.iter());
    let rows = encode_rows(&table, layer_sets(class_instances, layer).map(|(_, s)| s));
    Postings::new(&rows).frequency(&table.encode(pattern))
}

/// Naive miner used as an independent oracle for [`build_store`]: a plain
/// triple loop over symbol sets with no interning, grouping or indexing.
pub fn reference_mine<T: Scalar>(
    train: &[SymbolicInstance],
    discretizer: Discretizer<T>,
) -> Result<PatternStore<T>> {
    if train.len() > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            limit: ORACLE_LIMIT,
            got: train.len(),
        });
    }
    let levels = discretizer.precisions.levels().to_vec();
    check_layers(train, &levels)?;
    let mut records = Vec::new();
    for &layer in &levels {
        for class in [Label::Normal, Label::Anomalous] {
            let same: Vec<&[Symbol]> = layer_sets(train, layer)
                .filter(|(i, _)| i.label == class)
                .map(|(_, s)| s)
                .collect();
            let opposite: Vec<&[Symbol]> = layer_sets(train, layer)
                .filter(|(i, _)| i.label != class)
                .map(|(_, s)| s)
                .collect();
            let contains = |set: &[Symbol], pat: &[Symbol]| pat.iter().all(|s| set.contains(s));
            let mut found: Vec<Vec<Symbol>> = Vec::new();
            for i in 0..same.len() {
                for j in i + 1..same.len() {
                    let inter: Vec<Symbol> = same[i]
                        .iter()
                        .filter(|s| same[j].contains(s))
                        .cloned()
                        .collect();
                    if inter.is_empty() || found.contains(&inter) {
                        continue;
                    }
                    if opposite.iter().any(|o| contains(o, &inter)) {
                        continue;
                    }
                    found.push(inter);
                }
            }
            for symbols in found {
                let freq = same.iter().filter(|s| contains(s, &symbols)).count() as u64;
                records.push(PatternRecord {
                    class,
                    layer,
                    symbols,
                    freq,
                });
            }
        }
    }
    PatternStore::from_records(discretizer, records)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::discretizer::{Layer, PrecisionSet, PrecisionTag};

    fn sym(code: &str) -> Symbol {
        Symbol {
            column: 0,
            attribute: Arc::from("x"),
            precision: PrecisionTag::Categorical,
            code: code.into(),
        }
    }

    fn inst(id: usize, label: Label, codes: &str) -> SymbolicInstance {
        let mut symbols: Vec<Symbol> = codes.chars().map(|c| sym(&c.to_string())).collect();
        symbols.sort();
        SymbolicInstance {
            id,
            label,
            layers: vec![Layer {
                precision: 0,
                symbols,
            }],
        }
    }

    fn set(codes: &str) -> Vec<Symbol> {
        let mut v: Vec<Symbol> = codes.chars().map(|c| sym(&c.to_string())).collect();
        v.sort();
        v
    }

    fn normals(rows: &[&str]) -> Vec<SymbolicInstance> {
        rows.iter()
            .enumerate()
            .map(|(i, r)| inst(i, Label::Normal, r))
            .collect()
    }

    fn single_layer() -> Discretizer<f64> {
        Discretizer {
            attributes: vec![Arc::from("x")],
            stats: vec![None],
            precisions: PrecisionSet::new(vec![0]).unwrap(),
        }
    }

    #[test]
    fn candidate_examples() {
        assert_eq!(
            mine_candidates(&normals(&["abc", "abd"]), 0),
            vec![set("ab")]
        );
        assert!(mine_candidates(&normals(&["a", "b"]), 0).is_empty());
        assert_eq!(
            mine_candidates(&normals(&["ab", "ac", "ad"]), 0),
            vec![set("a")]
        );
        assert!(mine_candidates(&normals(&["ab"]), 0).is_empty());
        // Duplicates intersect to themselves.
        assert_eq!(mine_candidates(&normals(&["ab", "ab"]), 0), vec![set("ab")]);
    }

    #[test]
    fn coherence_examples() {
        let opp = |r: &str| vec![inst(0, Label::Anomalous, r)];
        assert_eq!(
            coherence_filter(vec![set("ab")], &opp("ae"), 0),
            vec![set("ab")]
        );
        assert!(coherence_filter(vec![set("ab")], &opp("abz"), 0).is_empty());
        assert_eq!(coherence_filter(vec![set("ab")], &[], 0), vec![set("ab")]);
    }

    #[test]
    fn frequency_examples() {
        assert_eq!(
            count_frequency(&set("ab"), &normals(&["abc", "abd", "ae"]), 0),
            2
        );
        assert_eq!(count_frequency(&set("ab"), &normals(&["ab", "ab"]), 0), 2);
        assert_eq!(
            count_frequency(&set("a"), &normals(&["ab", "ac", "ad"]), 0),
            3
        );
        assert_eq!(count_frequency(&set("q"), &normals(&["ab"]), 0), 0);
    }

    #[test]
    fn store_example() {
        let train = vec![
            inst(0, Label::Normal, "abc"),
            inst(1, Label::Normal, "abd"),
            inst(2, Label::Anomalous, "ae"),
            inst(3, Label::Anomalous, "ef"),
        ];
        let store = build_store(&train, single_layer()).unwrap();
        let rec = store.records();
        assert_eq!(
            rec,
            vec![
                PatternRecord {
                    class: Label::Normal,
                    layer: 0,
                    symbols: set("ab"),
                    freq: 2
                },
                PatternRecord {
                    class: Label::Anomalous,
                    layer: 0,
                    symbols: set("e"),
                    freq: 2
                },
            ]
        );
        assert_eq!(
            reference_mine(&train, single_layer()).unwrap().records(),
            rec
        );
    }

    #[test]
    fn empty_class_gives_empty_layer() {
        let train = normals(&["ab", "ac", "bc"]);
        let store = build_store(&train, single_layer()).unwrap();
        assert!(store.layers()[0].anomalous.is_empty());
        assert_eq!(
            store.records(),
            reference_mine(&train, single_layer()).unwrap().records()
        );
    }

    #[test]
    fn oracle_size_bound() {
        let rows: Vec<String> = (0..=ORACLE_LIMIT).map(|_| "ab".to_string()).collect();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        assert!(matches!(
            reference_mine(&normals(&refs), single_layer()),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn index_lists_every_pattern_symbol() {
        let train = vec![
            inst(0, Label::Normal, "abc"),
            inst(1, Label::Normal, "abd"),
            inst(2, Label::Normal, "bcd"),
            inst(3, Label::Anomalous, "ae"),
            inst(4, Label::Anomalous, "ef"),
        ];
        let store = build_store(&train, single_layer()).unwrap();
        for layer in store.layers() {
            for class in [Label::Normal, Label::Anomalous] {
                let cp = layer.class(class);
                for (i, p) in cp.patterns().iter().enumerate() {
                    for &s in &p.symbols {
                        assert!(cp.postings(s).contains(&(i as u32)));
                    }
                }
            }
        }
    }
}
