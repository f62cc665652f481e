//! Versioned, checksummed text serialization of a trained [`PatternStore`].
//!
//! ```text
//! igmd-model 1
//! scalar f64
//! precisions 0,1
//! attributes 2
//! attribute 0 =duration stats 12.5 3.25 400
//! attribute 1 =proto none
//! guard 118.2 40.1 3 400
//! meta =seed =42
//! patterns 1
//! p N 0 7 0:0:=1 1:cat:=tcp
//! checksum sha256 <hex of every preceding byte>
//! ```
//!
//! Text fields are written as `=` followed by the percent-encoded value.
//! Floats use the shortest representation that parses back exactly, and
//! patterns are listed in canonical order, so saving a loaded model
//! reproduces the original bytes.

use std::str::FromStr;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use sha2::{Digest, Sha256};

use crate::dataset::{AttributeStats, Label};
use crate::discretizer::{Discretizer, PrecisionSet, PrecisionTag, Symbol};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scorer::GuardBand;
use crate::store::{PatternRecord, PatternStore};

pub const MAGIC: &str = "igmd-model";
pub const VERSION: &str = "1";

const ESCAPED: &AsciiSet = &CONTROLS.add(b' ').add(b'%').add(b'=').add(b':');

fn enc(s: &str) -> String {
    format!("={}", utf8_percent_encode(s, ESCAPED))
}

fn dec(token: &str, line: usize) -> Result<String> {
    let body = token
        .strip_prefix('=')
        .ok_or_else(|| parse_err(line, "expected =text field"))?;
    percent_decode_str(body)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| parse_err(line, "invalid UTF-8 in text field"))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::ModelParse {
        line,
        message: message.into(),
    }
}

/// Hex SHA-256 of `bytes`.
pub fn checksum(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serializes the store with `metadata` (key, value) pairs embedded in
/// the given order.
pub fn save_model<T: Scalar>(store: &PatternStore<T>, metadata: &[(String, String)]) -> String {
    let d = store.discretizer();
    let mut out = String::new();
    out.push_str(&format!("{MAGIC} {VERSION}\n"));
    out.push_str(&format!("scalar {}\n", T::NAME));
    out.push_str(&format!("precisions {}\n", d.precisions));
    out.push_str(&format!("attributes {}\n", d.attributes.len()));
    for (i, (name, stats)) in d.attributes.iter().zip(&d.stats).enumerate() {
        match stats {
            Some(s) => out.push_str(&format!(
                "attribute {i} {} stats {} {} {}\n",
                enc(name),
                s.mean,
                s.std,
                s.count
            )),
            None => out.push_str(&format!("attribute {i} {} none\n", enc(name))),
        }
    }
    match store.guard_band() {
        Some(g) => out.push_str(&format!(
            "guard {} {} {} {}\n",
            g.mu_n, g.sigma_n, g.r, g.samples
        )),
        None => out.push_str("guard none\n"),
    }
    for (k, v) in metadata {
        out.push_str(&format!("meta {} {}\n", enc(k), enc(v)));
    }
    let records = store.records();
    out.push_str(&format!("patterns {}\n", records.len()));
    for r in &records {
        let class = match r.class {
            Label::Normal => 'N',
            Label::Anomalous => 'A',
        };
        out.push_str(&format!("p {class} {} {}", r.layer, r.freq));
        for s in &r.symbols {
            out.push_str(&format!(" {}:{}:{}", s.column, s.precision, enc(&s.code)));
        }
        out.push('\n');
    }
    let sum = checksum(out.as_bytes());
    out.push_str(&format!("checksum sha256 {sum}\n"));
    out
}

/// A loaded model with its embedded metadata.
#[derive(Debug, Clone)]
pub struct LoadedModel<T> {
    pub store: PatternStore<T>,
    pub metadata: Vec<(String, String)>,
    pub checksum: String,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let (i, line) = self
            .inner
            .next()
            .ok_or_else(|| parse_err(self.last + 1, format!("missing {keyword} line")))?;
        self.last = i + 1;
        let fields: Vec<&str> = line.split(' ').collect();
        if fields[0] != keyword {
            return Err(parse_err(
                i + 1,
                format!("expected {keyword}, found {:?}", fields[0]),
            ));
        }
        Ok((i + 1, fields))
    }

    fn peek_is(&self, keyword: &str) -> bool {
        self.inner
            .clone()
            .next()
            .is_some_and(|(_, l)| l.split(' ').next() == Some(keyword))
    }
}

fn field<F: FromStr>(fields: &[&str], i: usize, line: usize) -> Result<F> {
    fields
        .get(i)
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| parse_err(line, format!("bad or missing field {i}")))
}

pub fn load_model<T: Scalar>(text: &str) -> Result<LoadedModel<T>> {
    let first = text.lines().next().unwrap_or_default();
    match first.split_once(' ') {
        Some((MAGIC, VERSION)) => {}
        Some((MAGIC, v)) => return Err(Error::ModelVersion(v.to_string())),
        _ => return Err(Error::ModelVersion(first.to_string())),
    }

    // The checksum line must be the last line and cover every byte before it.
    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or(Error::ModelChecksum)?;
    let (body, tail) = text.split_at(body_end);
    let stated = tail
        .trim_end()
        .strip_prefix("checksum sha256 ")
        .ok_or(Error::ModelChecksum)?;
    let actual = checksum(body.as_bytes());
    if stated != actual {
        return Err(Error::ModelChecksum);
    }

    let mut lines = Lines {
        inner: body.lines().enumerate(),
        last: 0,
    };
    lines.next(MAGIC)?;
    let (_, f) = lines.next("scalar")?;
    let scalar = f.get(1).copied().unwrap_or_default();
    if scalar != T::NAME {
        return Err(Error::ModelScalar {
            expected: T::NAME.into(),
            found: scalar.into(),
        });
    }
    let (n, f) = lines.next("precisions")?;
    let precisions: PrecisionSet = f
        .get(1)
        .ok_or_else(|| parse_err(n, "missing levels"))?
        .parse()
        .map_err(|e: Error| parse_err(n, e.to_string()))?;
    let (n, f) = lines.next("attributes")?;
    let width: usize = field(&f, 1, n)?;
    let mut names = Vec::with_capacity(width);
    let mut stats = Vec::with_capacity(width);
    for i in 0..width {
        let (n, f) = lines.next("attribute")?;
        if field::<usize>(&f, 1, n)? != i {
            return Err(parse_err(n, "attributes out of order"));
        }
        names.push(dec(f.get(2).copied().unwrap_or_default(), n)?);
        stats.push(match f.get(3).copied() {
            Some("none") => None,
            Some("stats") => Some(AttributeStats {
                mean: field(&f, 4, n)?,
                std: field(&f, 5, n)?,
                count: field(&f, 6, n)?,
            }),
            _ => return Err(parse_err(n, "expected stats or none")),
        });
    }
    let (n, f) = lines.next("guard")?;
    let guard = if f.get(1) == Some(&"none") {
        None
    } else {
        Some(GuardBand {
            mu_n: field(&f, 1, n)?,
            sigma_n: field(&f, 2, n)?,
            r: field(&f, 3, n)?,
            samples: field(&f, 4, n)?,
        })
    };
    let mut metadata = Vec::new();
    while lines.peek_is("meta") {
        let (n, f) = lines.next("meta")?;
        metadata.push((
            dec(f.get(1).copied().unwrap_or_default(), n)?,
            dec(f.get(2).copied().unwrap_or_default(), n)?,
        ));
    }
    let discretizer = Discretizer::new(&names, stats, precisions);
    let (n, f) = lines.next("patterns")?;
    let count: usize = field(&f, 1, n)?;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, f) = lines.next("p")?;
        let class = match f.get(1).copied() {
            Some("N") => Label::Normal,
            Some("A") => Label::Anomalous,
            _ => return Err(parse_err(n, "bad class")),
        };
        let layer: u32 = field(&f, 2, n)?;
        let freq: u64 = field(&f, 3, n)?;
        let mut symbols = Vec::with_capacity(f.len().saturating_sub(4));
        for tok in &f[4..] {
            let mut parts = tok.splitn(3, ':');
            let (col, tag, code) = match (parts.next(), parts.next(), parts.next()) {
                (Some(c), Some(t), Some(v)) => (c, t, v),
                _ => return Err(parse_err(n, format!("bad symbol {tok:?}"))),
            };
            let column: usize = col.parse().map_err(|_| parse_err(n, "bad column"))?;
            let attribute = discretizer
                .attributes
                .get(column)
                .ok_or_else(|| parse_err(n, "column out of range"))?
                .clone();
            symbols.push(Symbol {
                column,
                attribute,
                precision: PrecisionTag::from_str(tag).map_err(|e| parse_err(n, e.to_string()))?,
                code: dec(code, n)?,
            });
        }
        symbols.sort();
        records.push(PatternRecord {
            class,
            layer,
            symbols,
            freq,
        });
    }
    if let Some((i, _)) = lines.inner.next() {
        return Err(parse_err(i + 1, "trailing content"));
    }
    let mut store = PatternStore::from_records(discretizer, records)
        .map_err(|e| parse_err(n, e.to_string()))?;
    if let Some(g) = guard {
        store = store.with_guard_band(g);
    }
    Ok(LoadedModel {
        store,
        metadata,
        checksum: stated.to_string(),
    })
}
