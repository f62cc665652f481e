//! CSV ingestion, label binarization, attribute statistics and stratified
//! train/test splitting.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{mean_std, Scalar};

/// Literal cell text that denotes a missing value.
pub const MISSING_TOKEN: &str = "NaN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn opposite(self) -> Label {
        match self {
            Label::Normal => Label::Anomalous,
            Label::Anomalous => Label::Normal,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Normal => "Normal",
            Label::Anomalous => "Anomalous",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue<T> {
    Numeric(T),
    Categorical(String),
    Missing,
}

impl<T: Scalar> AttributeValue<T> {
    /// Parses one trimmed CSV cell. Empty cells and the exact token `NaN`
    /// are missing; finite decimal numbers are numeric; anything else
    /// (including `inf` or lowercase `nan`) is categorical.
    pub fn parse(cell: &str) -> Self {
        if cell.is_empty() || cell == MISSING_TOKEN {
            return AttributeValue::Missing;
        }
        match cell.parse::<T>() {
            Ok(v) if v.is_finite() => AttributeValue::Numeric(v),
            _ => AttributeValue::Categorical(cell.to_string()),
        }
    }
}

/// Which column of the CSV holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// A header name, or a zero-based index when no header matches.
    Named(String),
    Index(usize),
    #[default]
    Last,
    /// The file carries no label column; every label cell reads as empty.
    Absent,
}

impl LabelColumn {
    fn resolve(&self, header: &[String]) -> Result<Option<usize>> {
        let width = header.len();
        let found = match self {
            LabelColumn::Absent => return Ok(None),
            LabelColumn::Last => width.checked_sub(1),
            LabelColumn::Index(i) => Some(*i).filter(|&i| i < width),
            LabelColumn::Named(name) => header
                .iter()
                .position(|h| h == name)
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < width)),
        };
        found
            .map(Some)
            .ok_or_else(|| Error::MissingLabelColumn(self.to_string()))
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Named(n) => f.write_str(n),
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Absent => f.write_str("none"),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            "none" => LabelColumn::Absent,
            _ => LabelColumn::Named(s.to_string()),
        })
    }
}

/// Parsed CSV contents with the label column split off.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset<T> {
    /// Names of the non-label columns, in file order.
    pub attribute_names: Vec<String>,
    /// Empty when the file has no label column.
    pub label_name: String,
    /// Index of the label column in the original file.
    pub label_column: Option<usize>,
    pub rows: Vec<Vec<AttributeValue<T>>>,
    pub labels: Vec<String>,
}

impl<T> RawDataset<T> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn load_csv<T: Scalar>(
    path: &Path,
    label_column: &LabelColumn,
    has_header: bool,
) -> Result<RawDataset<T>> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column, has_header)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<T: Scalar, R: Read>(
    reader: R,
    label_column: &LabelColumn,
    has_header: bool,
) -> Result<RawDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let mut header: Option<Vec<String>> = None;
    let mut first_data: Option<csv::StringRecord> = None;
    if let Some(first) = records.next() {
        let first = first?;
        if has_header {
            header = Some(first.iter().map(str::to_string).collect());
        } else {
            first_data = Some(first);
        }
    }
    let header = match header {
        Some(h) => h,
        None => {
            let width = first_data.as_ref().map_or(0, |r| r.len());
            (0..width).map(|i| format!("col{i}")).collect()
        }
    };
    let label_idx = label_column.resolve(&header)?;
    let width = header.len();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    // Row numbers are 1-based file lines.
    let offset = if has_header { 2 } else { 1 };
    let data = first_data.into_iter().map(Ok).chain(records);
    for (i, record) in data.enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::RaggedRow {
                row: i + offset,
                expected: width,
                found: record.len(),
            });
        }
        let mut values = Vec::with_capacity(width);
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_idx {
                labels.push(cell.to_string());
            } else {
                values.push(AttributeValue::parse(cell));
            }
        }
        if label_idx.is_none() {
            labels.push(String::new());
        }
        rows.push(values);
    }

    let label_name = label_idx.map_or_else(String::new, |i| header[i].clone());
    let attribute_names = header
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != label_idx)
        .map(|(_, h)| h)
        .collect();
    Ok(RawDataset {
        attribute_names,
        label_name,
        label_column: label_idx,
        rows,
        labels,
    })
}

/// One labelled record.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<T> {
    /// Ordinal of the row within its source file.
    pub id: usize,
    pub label: Label,
    pub values: Vec<AttributeValue<T>>,
}

/// Every label other than `normal_label` (exact, case-sensitive) becomes
/// [`Label::Anomalous`].
pub fn binarize_labels<T: Clone>(raw: &RawDataset<T>, normal_label: &str) -> Vec<Instance<T>> {
    let instances: Vec<Instance<T>> = raw
        .rows
        .iter()
        .zip(&raw.labels)
        .enumerate()
        .map(|(id, (values, label))| Instance {
            id,
            label: if label == normal_label {
                Label::Normal
            } else {
                Label::Anomalous
            },
            values: values.clone(),
        })
        .collect();
    if !instances.is_empty() && !instances.iter().any(|i| i.label == Label::Normal) {
        tracing::warn!(normal_label, "no instance carries the normal label");
    }
    instances
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributeStats<T> {
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
    /// Number of non-missing numeric values the moments were taken over.
    pub count: usize,
}

/// Per-attribute moments over the numeric, non-missing training values of
/// both classes. Attributes with no numeric value get `None`.
pub fn compute_stats<T: Scalar>(train: &[Instance<T>]) -> Vec<Option<AttributeStats<T>>> {
    let width = train.first().map_or(0, |i| i.values.len());
    (0..width)
        .map(|col| {
            let values: Vec<T> = train
                .iter()
                .filter_map(|inst| match inst.values[col] {
                    AttributeValue::Numeric(v) => Some(v),
                    _ => None,
                })
                .collect();
            mean_std(&values).map(|(mean, std)| AttributeStats {
                mean,
                std,
                count: values.len(),
            })
        })
        .collect()
}

/// Number of class members placed in the training side: round half up.
pub fn train_count(class_size: usize, train_fraction: f64) -> usize {
    let c = (class_size as f64 * train_fraction + 0.5).floor() as usize;
    c.min(class_size)
}

/// Stratified split. Each class is shuffled with one ChaCha8 stream seeded
/// from `seed` (Normal first, then Anomalous) and cut at
/// `round_half_up(class_size * train_fraction)`. Both halves keep input
/// order.
pub fn split<T: Clone>(
    instances: &[Instance<T>],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Instance<T>>, Vec<Instance<T>>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; instances.len()];
    for class in [Label::Normal, Label::Anomalous] {
        let mut members: Vec<usize> = instances
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..train_count(members.len(), train_fraction)] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<_>, Vec<_>) =
        instances.iter().zip(in_train).partition(|(_, keep)| *keep);
    Ok((
        train.into_iter().map(|(i, _)| i.clone()).collect(),
        test.into_iter().map(|(i, _)| i.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelled(labels: &[Label]) -> Vec<Instance<f64>> {
        labels
            .iter()
            .enumerate()
            .map(|(id, &label)| Instance {
                id,
                label,
                values: vec![AttributeValue::Numeric(id as f64)],
            })
            .collect()
    }

    #[test]
    fn parses_cells_by_rule() {
        let raw: RawDataset<f64> = read_csv(
            "port,proto,bytes,class\n80,tcp,NaN,Normal\n3.5e2,udp,,DoS\n".as_bytes(),
            &LabelColumn::Named("class".into()),
            true,
        )
        .unwrap();
        assert_eq!(raw.attribute_names, ["port", "proto", "bytes"]);
        assert_eq!(raw.label_column, Some(3));
        assert_eq!(
            raw.rows[0],
            vec![
                AttributeValue::Numeric(80.0),
                AttributeValue::Categorical("tcp".into()),
                AttributeValue::Missing
            ]
        );
        assert_eq!(raw.rows[1][0], AttributeValue::Numeric(350.0));
        assert_eq!(raw.rows[1][2], AttributeValue::Missing);
        assert_eq!(raw.labels, ["Normal", "DoS"]);
    }

    #[test]
    fn non_finite_text_is_categorical() {
        assert_eq!(
            AttributeValue::<f64>::parse("inf"),
            AttributeValue::Categorical("inf".into())
        );
        assert_eq!(
            AttributeValue::<f64>::parse("nan"),
            AttributeValue::Categorical("nan".into())
        );
    }

    #[test]
    fn header_only_file_is_empty() {
        let raw: RawDataset<f64> =
            read_csv("a,b,label\n".as_bytes(), &LabelColumn::Last, true).unwrap();
        assert!(raw.is_empty());
        assert_eq!(raw.attribute_names, ["a", "b"]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = read_csv::<f64, _>(
            "a,b,label\n1,2,N\n1,N\n".as_bytes(),
            &LabelColumn::Last,
            true,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::RaggedRow {
                row: 3,
                expected: 3,
                found: 2
            }
        ));
    }

    #[test]
    fn missing_label_column() {
        let err = read_csv::<f64, _>(
            "a,b\n1,2\n".as_bytes(),
            &LabelColumn::Named("class".into()),
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingLabelColumn(_)));
    }

    #[test]
    fn label_by_index_without_header() {
        let raw: RawDataset<f64> = read_csv(
            "Normal,1\nDoS,2\n".as_bytes(),
            &LabelColumn::Named("0".into()),
            false,
        )
        .unwrap();
        assert_eq!(raw.attribute_names, ["col1"]);
        assert_eq!(raw.labels, ["Normal", "DoS"]);
    }

    #[test]
    fn unlabelled_file() {
        let raw: RawDataset<f64> =
            read_csv("a,b\n1,x\n".as_bytes(), &LabelColumn::Absent, true).unwrap();
        assert_eq!(raw.attribute_names, ["a", "b"]);
        assert_eq!(raw.labels, [""]);
        assert_eq!(raw.label_column, None);
    }

    #[test]
    fn binarize_is_exact_and_case_sensitive() {
        let raw: RawDataset<f64> = read_csv(
            "x,l\n1,Normal\n2,DoS\n3,Probe\n4,normal\n".as_bytes(),
            &LabelColumn::Last,
            true,
        )
        .unwrap();
        let labels: Vec<Label> = binarize_labels(&raw, "Normal")
            .iter()
            .map(|i| i.label)
            .collect();
        use Label::*;
        assert_eq!(labels, [Normal, Anomalous, Anomalous, Anomalous]);
    }

    #[test]
    fn stats_examples() {
        let mk = |vals: Vec<AttributeValue<f64>>| -> Vec<Instance<f64>> {
            vals.into_iter()
                .enumerate()
                .map(|(id, v)| Instance {
                    id,
                    label: Label::Normal,
                    values: vec![v],
                })
                .collect()
        };
        use AttributeValue::*;
        let s = compute_stats(&mk(vec![Numeric(2.0), Numeric(4.0)]))[0].unwrap();
        assert_eq!((s.mean, s.std, s.count), (3.0, 1.0, 2));
        let s = compute_stats(&mk(vec![Numeric(5.0), Numeric(5.0), Numeric(5.0)]))[0].unwrap();
        assert_eq!((s.mean, s.std), (5.0, 0.0));
        let s = compute_stats(&mk(vec![Numeric(1.0), Missing, Numeric(3.0)]))[0].unwrap();
        assert_eq!((s.mean, s.std, s.count), (2.0, 1.0, 2));
        assert!(compute_stats(&mk(vec![Missing, Categorical("x".into())]))[0].is_none());
    }

    #[test]
    fn stratified_counts() {
        let mut labels = vec![Label::Normal; 10];
        labels.extend(vec![Label::Anomalous; 10]);
        let data = labelled(&labels);
        let (train, test) = split(&data, 0.1, 42).unwrap();
        assert_eq!(train.iter().filter(|i| i.label == Label::Normal).count(), 1);
        assert_eq!(
            train.iter().filter(|i| i.label == Label::Anomalous).count(),
            1
        );
        assert_eq!(test.len(), 18);
        assert_eq!(split(&data, 0.1, 42).unwrap().0, train);
    }

    #[test]
    fn round_half_up_counts() {
        assert_eq!(train_count(5, 0.5), 3);
        assert_eq!(train_count(3, 0.5), 2);
        assert_eq!(train_count(10, 0.25), 3);
        assert_eq!(train_count(2, 0.1), 0);
    }

    #[test]
    fn split_refuses_tiny_class() {
        let data = labelled(&[Label::Normal, Label::Normal, Label::Anomalous]);
        assert!(matches!(
            split(&data, 0.5, 1),
            Err(Error::ClassTooSmall {
                class: Label::Anomalous,
                count: 1
            })
        ));
        assert!(matches!(
            split(&data, 1.0, 1),
            Err(Error::InvalidFraction(_))
        ));
    }
}
