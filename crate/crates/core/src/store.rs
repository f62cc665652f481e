//! The trained model: per-layer coherent pattern collections with an
//! inverted index from symbol to pattern.

use std::collections::HashMap;

use crate::dataset::Label;
use crate::discretizer::{Discretizer, Symbol};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scorer::GuardBand;

pub type SymbolId = u32;

/// Interning table. Ids follow canonical symbol order, so sorting by id
/// and sorting by symbol agree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    symbols: Vec<Symbol>,
    ids: HashMap<Symbol, SymbolId>,
}

impl SymbolTable {
    pub fn from_symbols<I: IntoIterator<Item = Symbol>>(symbols: I) -> Self {
        let mut symbols: Vec<Symbol> = symbols.into_iter().collect();
        symbols.sort();
        symbols.dedup();
        let ids = symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as SymbolId))
            .collect();
        SymbolTable { symbols, ids }
    }

    pub fn id(&self, symbol: &Symbol) -> Option<SymbolId> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id as usize]
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Sorted ids of the known symbols in `symbols`; unknown ones are skipped.
    pub fn encode<'a, I: IntoIterator<Item = &'a Symbol>>(&self, symbols: I) -> Vec<SymbolId> {
        let mut ids: Vec<SymbolId> = symbols.into_iter().filter_map(|s| self.id(s)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// A coherent pattern: symbol ids sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub symbols: Vec<SymbolId>,
    pub class: Label,
    pub layer: u32,
    pub freq: u64,
}

impl Pattern {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `freq * len^2`.
    pub fn weight(&self) -> u64 {
        let len = self.symbols.len() as u64;
        self.freq * len * len
    }
}

/// A pattern with its symbols resolved, used for comparison and output.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PatternRecord {
    pub class: Label,
    pub layer: u32,
    pub symbols: Vec<Symbol>,
    pub freq: u64,
}

/// Set-enumeration trie over sorted pattern id vectors, flattened into
/// arrays. A subset query only descends into children whose symbol the
/// query contains, so its cost follows the number of stored prefixes that
/// are subsets of the query rather than the number of stored patterns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubsetTrie {
    /// Children of node `n` are `child_symbol/child_node[first_child[n]..first_child[n + 1]]`,
    /// sorted by symbol.
    first_child: Vec<u32>,
    child_symbol: Vec<SymbolId>,
    child_node: Vec<u32>,
    /// Pattern ending at each node, or `u32::MAX`.
    terminal: Vec<u32>,
}

impl SubsetTrie {
    fn new(patterns: &[Pattern]) -> Self {
        let mut children: Vec<Vec<(SymbolId, u32)>> = vec![Vec::new()];
        let mut terminal = vec![u32::MAX];
        for (i, p) in patterns.iter().enumerate() {
            let mut node = 0usize;
            for &s in &p.symbols {
                node = match children[node].iter().find(|(c, _)| *c == s) {
                    Some(&(_, next)) => next as usize,
                    None => {
                        let next = children.len();
                        children.push(Vec::new());
                        terminal.push(u32::MAX);
                        children[node].push((s, next as u32));
                        next
                    }
                };
            }
            terminal[node] = i as u32;
        }
        let mut first_child = Vec::with_capacity(children.len() + 1);
        let mut child_symbol = Vec::new();
        let mut child_node = Vec::new();
        for mut c in children {
            c.sort_unstable();
            first_child.push(child_symbol.len() as u32);
            for (s, n) in c {
                child_symbol.push(s);
                child_node.push(n);
            }
        }
        first_child.push(child_symbol.len() as u32);
        SubsetTrie {
            first_child,
            child_symbol,
            child_node,
            terminal,
        }
    }

    /// Calls `hit` with the index of every stored pattern that is a subset
    /// of `query` (sorted ascending).
    pub fn for_each_subset(&self, query: &[SymbolId], mut hit: impl FnMut(u32)) {
        if self.terminal.is_empty() {
            return;
        }
        let mut stack: Vec<(u32, usize)> = vec![(0, 0)];
        while let Some((node, from)) = stack.pop() {
            let t = self.terminal[node as usize];
            if t != u32::MAX {
                hit(t);
            }
            let lo = self.first_child[node as usize] as usize;
            let hi = self.first_child[node as usize + 1] as usize;
            let syms = &self.child_symbol[lo..hi];
            if syms.is_empty() {
                continue;
            }
            for (qi, q) in query.iter().enumerate().skip(from) {
                if let Ok(k) = syms.binary_search(q) {
                    stack.push((self.child_node[lo + k], qi + 1));
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassPatterns {
    pub(crate) patterns: Vec<Pattern>,
    /// Symbol id -> indices into `patterns` that contain it.
    pub(crate) index: Vec<Vec<u32>>,
    pub(crate) trie: SubsetTrie,
}

impl ClassPatterns {
    fn new(mut patterns: Vec<Pattern>, table_len: usize) -> Self {
        patterns.sort_by(|a, b| a.symbols.cmp(&b.symbols));
        patterns.dedup_by(|a, b| a.symbols == b.symbols);
        let mut index = vec![Vec::new(); table_len];
        for (i, p) in patterns.iter().enumerate() {
            for &s in &p.symbols {
                index[s as usize].push(i as u32);
            }
        }
        let trie = SubsetTrie::new(&patterns);
        ClassPatterns {
            patterns,
            index,
            trie,
        }
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Patterns containing `symbol`.
    pub fn postings(&self, symbol: SymbolId) -> &[u32] {
        self.index.get(symbol as usize).map_or(&[], Vec::as_slice)
    }

    /// Indices of the patterns contained in `query` (sorted ids), ascending.
    pub fn subsets_of(&self, query: &[SymbolId]) -> Vec<u32> {
        let mut out = Vec::new();
        self.trie.for_each_subset(query, |p| out.push(p));
        out.sort_unstable();
        out
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerPatterns {
    pub precision: u32,
    pub normal: ClassPatterns,
    pub anomalous: ClassPatterns,
}

impl LayerPatterns {
    pub fn class(&self, class: Label) -> &ClassPatterns {
        match class {
            Label::Normal => &self.normal,
            Label::Anomalous => &self.anomalous,
        }
    }
}

/// Pattern counts for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSummary {
    pub precision: u32,
    pub normal: usize,
    pub anomalous: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternStore<T> {
    discretizer: Discretizer<T>,
    symbols: SymbolTable,
    layers: Vec<LayerPatterns>,
    guard_band: Option<GuardBand<T>>,
}

impl<T: Scalar> PatternStore<T> {
    /// Assembles a store from per-layer `(normal, anomalous)` pattern lists
    /// whose ids refer to `symbols`. Layers must follow the discretizer's
    /// precision order.
    pub(crate) fn assemble(
        discretizer: Discretizer<T>,
        symbols: SymbolTable,
        layers: Vec<(Vec<Pattern>, Vec<Pattern>)>,
    ) -> Self {
        let n = symbols.len();
        let layers = discretizer
            .precisions
            .levels()
            .iter()
            .zip(layers)
            .map(|(&precision, (normal, anomalous))| LayerPatterns {
                precision,
                normal: ClassPatterns::new(normal, n),
                anomalous: ClassPatterns::new(anomalous, n),
            })
            .collect();
        PatternStore {
            discretizer,
            symbols,
            layers,
            guard_band: None,
        }
    }

    /// Builds a store from resolved pattern records.
    pub fn from_records(discretizer: Discretizer<T>, records: Vec<PatternRecord>) -> Result<Self> {
        let levels = discretizer.precisions.levels().to_vec();
        for r in &records {
            if !levels.contains(&r.layer) {
                return Err(Error::InvalidPrecisionSet(format!(
                    "pattern layer {} not in {:?}",
                    r.layer, levels
                )));
            }
            if r.symbols.is_empty() || r.symbols.iter().any(|s| !s.precision.fits_layer(r.layer)) {
                return Err(Error::InvalidPrecisionSet(format!(
                    "pattern at layer {} has empty or foreign-precision symbols",
                    r.layer
                )));
            }
        }
        let table =
            SymbolTable::from_symbols(records.iter().flat_map(|r| r.symbols.iter().cloned()));
        let mut layers: Vec<(Vec<Pattern>, Vec<Pattern>)> = vec![Default::default(); levels.len()];
        for r in records {
            let slot = levels
                .iter()
                .position(|&l| l == r.layer)
                .expect("validated");
            let pattern = Pattern {
                symbols: table.encode(&r.symbols),
                class: r.class,
                layer: r.layer,
                freq: r.freq,
            };
            match r.class {
                Label::Normal => layers[slot].0.push(pattern),
                Label::Anomalous => layers[slot].1.push(pattern),
            }
        }
        Ok(Self::assemble(discretizer, table, layers))
    }

    pub fn with_guard_band(mut self, guard_band: GuardBand<T>) -> Self {
        self.guard_band = Some(guard_band);
        self
    }

    pub fn guard_band(&self) -> Option<&GuardBand<T>> {
        self.guard_band.as_ref()
    }

    pub fn discretizer(&self) -> &Discretizer<T> {
        &self.discretizer
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn layers(&self) -> &[LayerPatterns] {
        &self.layers
    }

    pub fn pattern(&self, layer_slot: usize, class: Label, index: u32) -> &Pattern {
        &self.layers[layer_slot].class(class).patterns[index as usize]
    }

    pub fn resolve(&self, pattern: &Pattern) -> Vec<Symbol> {
        pattern
            .symbols
            .iter()
            .map(|&s| self.symbols.symbol(s).clone())
            .collect()
    }

    /// Every pattern, resolved and in canonical order
    /// (class, layer, symbols).
    pub fn records(&self) -> Vec<PatternRecord> {
        let mut out: Vec<PatternRecord> = self
            .layers
            .iter()
            .flat_map(|l| l.normal.patterns.iter().chain(&l.anomalous.patterns))
            .map(|p| PatternRecord {
                class: p.class,
                layer: p.layer,
                symbols: self.resolve(p),
                freq: p.freq,
            })
            .collect();
        out.sort();
        out
    }

    pub fn summary(&self) -> Vec<LayerSummary> {
        self.layers
            .iter()
            .map(|l| LayerSummary {
                precision: l.precision,
                normal: l.normal.len(),
                anomalous: l.anomalous.len(),
            })
            .collect()
    }

    pub fn pattern_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.normal.len() + l.anomalous.len())
            .sum()
    }
}
