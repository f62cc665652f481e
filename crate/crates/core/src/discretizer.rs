//! Multi-granular symbolization: every numeric value becomes one rounded
//! z-score code per precision level; categorical and missing values become
//! the same symbol in every layer.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::dataset::{AttributeStats, AttributeValue, Instance, Label, MISSING_TOKEN};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported number of decimal places.
pub const MAX_PRECISION: u32 = 12;

/// Decimal places at which z-scores are rounded; strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrecisionSet(Vec<u32>);

impl PrecisionSet {
    pub fn new(levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidPrecisionSet("empty".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPrecisionSet(format!(
                "{levels:?} is not strictly increasing"
            )));
        }
        if let Some(p) = levels.iter().find(|&&p| p > MAX_PRECISION) {
            return Err(Error::InvalidPrecisionSet(format!(
                "{p} exceeds the maximum of {MAX_PRECISION} decimal places"
            )));
        }
        Ok(PrecisionSet(levels))
    }

    pub fn levels(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for PrecisionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for PrecisionSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let levels = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidPrecisionSet(format!("bad level {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        PrecisionSet::new(levels)
    }
}

/// Granularity tag carried by a symbol. Ordered decimals first, then
/// categorical, then missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrecisionTag {
    Decimals(u32),
    Categorical,
    Missing,
}

impl PrecisionTag {
    /// Whether a symbol with this tag may belong to the layer at `level`.
    pub fn fits_layer(self, level: u32) -> bool {
        match self {
            PrecisionTag::Decimals(p) => p == level,
            _ => true,
        }
    }
}

impl fmt::Display for PrecisionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionTag::Decimals(p) => write!(f, "{p}"),
            PrecisionTag::Categorical => f.write_str("cat"),
            PrecisionTag::Missing => f.write_str("nan"),
        }
    }
}

impl FromStr for PrecisionTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cat" => Ok(PrecisionTag::Categorical),
            "nan" => Ok(PrecisionTag::Missing),
            _ => s
                .parse()
                .map(PrecisionTag::Decimals)
                .map_err(|_| Error::InvalidPrecisionSet(format!("bad tag {s:?}"))),
        }
    }
}

/// One discretized feature value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub column: usize,
    pub attribute: Arc<str>,
    pub precision: PrecisionTag,
    pub code: String,
}

impl Symbol {
    pub fn missing(column: usize, attribute: Arc<str>) -> Self {
        Symbol {
            column,
            attribute,
            precision: PrecisionTag::Missing,
            code: MISSING_TOKEN.to_string(),
        }
    }
}

// Canonical order: column, then precision tag, then code.
impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.column
            .cmp(&other.column)
            .then(self.precision.cmp(&other.precision))
            .then_with(|| self.code.cmp(&other.code))
            .then_with(|| self.attribute.cmp(&other.attribute))
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}#{}@{}={}",
            self.attribute, self.column, self.precision, self.code
        )
    }
}

/// All symbols of one instance at one precision level, canonically sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layer {
    pub precision: u32,
    pub symbols: Vec<Symbol>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicInstance {
    pub id: usize,
    pub label: Label,
    pub layers: Vec<Layer>,
}

impl SymbolicInstance {
    /// Union of all layers. Categorical and missing symbols appear once.
    pub fn merged(&self) -> BTreeSet<Symbol> {
        self.layers
            .iter()
            .flat_map(|l| l.symbols.iter().cloned())
            .collect()
    }

    pub fn layer(&self, precision: u32) -> Option<&Layer> {
        self.layers.iter().find(|l| l.precision == precision)
    }

    pub fn precisions(&self) -> Vec<u32> {
        self.layers.iter().map(|l| l.precision).collect()
    }
}

/// `(v - mean) / std`, or 0 when the attribute is constant.
pub fn zscore<T: Scalar>(v: T, stats: &AttributeStats<T>) -> T {
    if stats.std == T::zero() {
        T::zero()
    } else {
        (v - stats.mean) / stats.std
    }
}

/// Rounds `z` half-to-even at `decimals` places, using the exact binary
/// value of `z`, and renders it with exactly that many decimals. Negative
/// zero is rendered without a sign.
pub fn render_code<T: Scalar>(z: T, decimals: u32) -> String {
    let x = z.to_f64().expect("finite scalar converts to f64");
    let text = format!("{:.*}", decimals as usize, x);
    match text.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => text,
    }
}

pub fn discretize_value<T: Scalar>(
    value: &AttributeValue<T>,
    column: usize,
    attribute: &Arc<str>,
    stats: Option<&AttributeStats<T>>,
    precision: u32,
) -> Symbol {
    match (value, stats) {
        (AttributeValue::Numeric(v), Some(stats)) => Symbol {
            column,
            attribute: attribute.clone(),
            precision: PrecisionTag::Decimals(precision),
            code: render_code(zscore(*v, stats), precision),
        },
        (AttributeValue::Categorical(text), _) => Symbol {
            column,
            attribute: attribute.clone(),
            precision: PrecisionTag::Categorical,
            code: text.clone(),
        },
        (AttributeValue::Missing, _) | (AttributeValue::Numeric(_), None) => {
            Symbol::missing(column, attribute.clone())
        }
    }
}

pub fn discretize_instance<T: Scalar>(
    inst: &Instance<T>,
    attributes: &[Arc<str>],
    stats: &[Option<AttributeStats<T>>],
    precisions: &PrecisionSet,
) -> SymbolicInstance {
    let layers = precisions
        .levels()
        .iter()
        .map(|&p| {
            let mut symbols: Vec<Symbol> = inst
                .values
                .iter()
                .enumerate()
                .map(|(col, v)| {
                    discretize_value(
                        v,
                        col,
                        &attributes[col],
                        stats.get(col).and_then(Option::as_ref),
                        p,
                    )
                })
                .collect();
            symbols.sort();
            Layer {
                precision: p,
                symbols,
            }
        })
        .collect();
    SymbolicInstance {
        id: inst.id,
        label: inst.label,
        layers,
    }
}

/// Everything needed to symbolize unseen instances the same way the
/// training set was.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer<T> {
    pub attributes: Vec<Arc<str>>,
    pub stats: Vec<Option<AttributeStats<T>>>,
    pub precisions: PrecisionSet,
}

impl<T: Scalar> Discretizer<T> {
    pub fn new(
        attribute_names: &[String],
        mut stats: Vec<Option<AttributeStats<T>>>,
        precisions: PrecisionSet,
    ) -> Self {
        // An empty training set yields no stats at all.
        stats.resize(attribute_names.len(), None);
        Discretizer {
            attributes: attribute_names
                .iter()
                .map(|n| Arc::from(n.as_str()))
                .collect(),
            stats,
            precisions,
        }
    }

    pub fn discretize(&self, inst: &Instance<T>) -> SymbolicInstance {
        discretize_instance(inst, &self.attributes, &self.stats, &self.precisions)
    }

    pub fn discretize_all(&self, instances: &[Instance<T>]) -> Vec<SymbolicInstance> {
        instances.iter().map(|i| self.discretize(i)).collect()
    }
}

/// Drops every group of instances that share one merged symbol set but
/// carry both labels. Both outputs keep input order.
pub fn anti_contradiction_filter(
    train: Vec<SymbolicInstance>,
) -> (Vec<SymbolicInstance>, Vec<SymbolicInstance>) {
    let keys: Vec<Vec<Symbol>> = train
        .iter()
        .map(|i| i.merged().into_iter().collect())
        .collect();
    let mut seen: HashMap<&[Symbol], [bool; 2]> = HashMap::new();
    for (key, inst) in keys.iter().zip(&train) {
        seen.entry(key.as_slice()).or_default()[inst.label as usize] = true;
    }
    let contradictory: Vec<bool> = keys
        .iter()
        .map(|k| seen[k.as_slice()] == [true, true])
        .collect();
    drop(seen);

    let (removed, kept): (Vec<_>, Vec<_>) = train
        .into_iter()
        .zip(contradictory)
        .partition(|(_, bad)| *bad);
    let kept: Vec<SymbolicInstance> = kept.into_iter().map(|(i, _)| i).collect();
    let removed: Vec<SymbolicInstance> = removed.into_iter().map(|(i, _)| i).collect();
    if kept.is_empty() && !removed.is_empty() {
        tracing::warn!(
            removed = removed.len(),
            "anti-contradiction filter removed every instance"
        );
    }
    (kept, removed)
}
