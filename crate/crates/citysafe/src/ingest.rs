//! CSV ingestion and cleaning.
//!
//! Source tables arrive as RFC-4180 CSV with a header row. Parsing is
//! schema-driven: each named column is coerced to a declared kind and cells
//! that fail to parse become explicit nulls rather than errors. Cleaning is
//! split into orthogonal passes (deduplication, missing-value policy,
//! category mapping) so each dataset's pipeline stays auditable.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Read;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty: no header row found")]
    EmptyInput,
    #[error("schema names column {column:?} which is not in the header")]
    SchemaMismatch { column: String },
    #[error("{context} references unknown column {column:?}")]
    UnknownColumn { column: String, context: &'static str },
    #[error("zero-fill requires a numeric column, {column:?} is {kind}")]
    ZeroFillNonNumeric { column: String, kind: ColumnKind },
    #[error("column {column:?} appears in both zero_fill_columns and drop_null_columns")]
    PolicyOverlap { column: String },
    #[error("duplicate rule priority {priority}")]
    DuplicatePriority { priority: i64 },
    #[error("category rule list is empty")]
    EmptyRules,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Declared cell type of one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Text,
    Integer,
    Real,
    Date,
    LatlonPair,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnKind::Text => "text",
            ColumnKind::Integer => "integer",
            ColumnKind::Real => "real",
            ColumnKind::Date => "date",
            ColumnKind::LatlonPair => "latlon-pair",
        };
        f.write_str(s)
    }
}

/// A single typed cell. `Null` is an explicit missing value.
///
/// Equality and hashing compare floats bitwise, which is what the
/// deduplication contract wants: two rows are duplicates only when every
/// cell is byte-identical after trimming.
#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Text(String),
    Int(i64),
    Real(f64),
    Date(NaiveDate),
    LatLon(f64, f64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Text(a), Value::Text(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            (Value::Date(a), Value::Date(b)) => a == b,
            (Value::LatLon(a1, a2), Value::LatLon(b1, b2)) => {
                a1.to_bits() == b1.to_bits() && a2.to_bits() == b2.to_bits()
            }
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Value::Null => {}
            Value::Text(s) => s.hash(state),
            Value::Int(i) => i.hash(state),
            Value::Real(r) => r.to_bits().hash(state),
            Value::Date(d) => d.hash(state),
            Value::LatLon(a, b) => {
                a.to_bits().hash(state);
                b.to_bits().hash(state);
            }
        }
    }
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// Numeric view: integers and reals only.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_date(&self) -> Option<NaiveDate> {
        match self {
            Value::Date(d) => Some(*d),
            _ => None,
        }
    }

    /// CSV cell representation; `Null` serializes to the empty string.
    pub fn to_cell(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Real(r) => format!("{r}"),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
            Value::LatLon(lat, lon) => format!("({lat}, {lon})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Maps column names to their declared kinds. Header columns not named
/// here default to `text`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TableSchema(pub BTreeMap<String, ColumnKind>);

impl TableSchema {
    pub fn new() -> Self {
        Self(BTreeMap::new())
    }

    pub fn with(mut self, name: &str, kind: ColumnKind) -> Self {
        self.0.insert(name.to_string(), kind);
        self
    }
}

/// A typed, named table: the cleaned form of one source CSV.
///
/// Every row holds exactly one value (or explicit null) per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_kind(&self, name: &str) -> Option<ColumnKind> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.kind)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Iterate one column's cells in row order.
    pub fn column_values(&self, idx: usize) -> impl Iterator<Item = &Value> {
        self.rows.iter().map(move |r| &r[idx])
    }

    /// Append a column. `values` must have one entry per existing row.
    pub fn push_column(&mut self, name: impl Into<String>, kind: ColumnKind, values: Vec<Value>) {
        assert_eq!(values.len(), self.rows.len(), "column length mismatch");
        self.columns.push(Column {
            name: name.into(),
            kind,
        });
        for (row, v) in self.rows.iter_mut().zip(values) {
            row.push(v);
        }
    }

    /// Serialize back to CSV with a header row.
    pub fn to_csv_string(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        wtr.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::to_cell).collect();
            wtr.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8")
    }
}

pub(crate) fn parse_date(cell: &str) -> Option<NaiveDate> {
    for fmt in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(cell, fmt) {
            return Some(d);
        }
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y/%m/%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(dt.date());
        }
    }
    // Year-month forms bucket to the first of the month.
    for fmt in ["%Y-%m", "%Y/%m"] {
        if let Ok(d) = NaiveDate::parse_from_str(&format!("{cell}-01"), &format!("{fmt}-%d")) {
            return Some(d);
        }
    }
    None
}

fn parse_latlon(cell: &str) -> Option<(f64, f64)> {
    let inner = cell.trim();
    // WKT points carry lon before lat.
    if let Some(body) = inner
        .strip_prefix("POINT (")
        .or_else(|| inner.strip_prefix("POINT("))
    {
        let body = body.strip_suffix(')')?;
        let mut it = body.split_whitespace();
        let lon: f64 = it.next()?.parse().ok()?;
        let lat: f64 = it.next()?.parse().ok()?;
        return check_bounds(lat, lon);
    }
    let body = inner
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .unwrap_or(inner);
    let mut it = body.split(',');
    let lat: f64 = it.next()?.trim().parse().ok()?;
    let lon: f64 = it.next()?.trim().parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    check_bounds(lat, lon)
}

fn check_bounds(lat: f64, lon: f64) -> Option<(f64, f64)> {
    if lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
    {
        Some((lat, lon))
    } else {
        None
    }
}

fn parse_cell(cell: &str, kind: ColumnKind) -> Value {
    let cell = cell.trim();
    if cell.is_empty() {
        return Value::Null;
    }
    match kind {
        ColumnKind::Text => Value::Text(cell.to_string()),
        ColumnKind::Integer => cell.parse::<i64>().map_or(Value::Null, Value::Int),
        ColumnKind::Real => match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Value::Real(v),
            _ => Value::Null,
        },
        ColumnKind::Date => parse_date(cell).map_or(Value::Null, Value::Date),
        ColumnKind::LatlonPair => {
            parse_latlon(cell).map_or(Value::Null, |(lat, lon)| Value::LatLon(lat, lon))
        }
    }
}

/// Parse a CSV byte stream into a typed [`Dataset`].
///
/// The header row names the columns; `schema` assigns kinds by name and any
/// column it does not mention is read as text. Cells that fail to parse under
/// their declared kind become explicit nulls. Row order is preserved and
/// duplicates are kept (deduplication is [`drop_duplicates`]).
pub fn parse_table<R: Read>(
    raw_csv: R,
    name: &str,
    schema: &TableSchema,
) -> Result<Dataset, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(raw_csv);

    let header: Vec<String> = match rdr.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].trim().is_empty()) => {
            h.iter().map(|s| s.trim().to_string()).collect()
        }
        Ok(_) => return Err(IngestError::EmptyInput),
        Err(e) => {
            if matches!(e.kind(), csv::ErrorKind::Io(ioe) if ioe.kind() == std::io::ErrorKind::UnexpectedEof)
            {
                return Err(IngestError::EmptyInput);
            }
            return Err(e.into());
        }
    };

    for declared in schema.0.keys() {
        if !header.iter().any(|h| h == declared) {
            return Err(IngestError::SchemaMismatch {
                column: declared.clone(),
            });
        }
    }

    let columns: Vec<Column> = header
        .iter()
        .map(|h| Column {
            name: h.clone(),
            kind: schema.0.get(h).copied().unwrap_or(ColumnKind::Text),
        })
        .collect();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row: Vec<Value> = columns
            .iter()
            .enumerate()
            .map(|(i, col)| {
                record
                    .get(i)
                    .map_or(Value::Null, |cell| parse_cell(cell, col.kind))
            })
            .collect();
        rows.push(row);
    }

    Ok(Dataset {
        name: name.to_string(),
        columns,
        rows,
    })
}

/// Remove exact duplicate rows, keeping the first occurrence.
pub fn drop_duplicates(d: &Dataset) -> Dataset {
    let mut seen: HashSet<&Vec<Value>> = HashSet::with_capacity(d.rows.len());
    let mut rows = Vec::with_capacity(d.rows.len());
    for row in &d.rows {
        if seen.insert(row) {
            rows.push(row.clone());
        }
    }
    Dataset {
        name: d.name.clone(),
        columns: d.columns.clone(),
        rows,
    }
}

/// Per-dataset missing-value policy.
///
/// Nulls in `zero_fill_columns` become 0; rows with a null in any of
/// `drop_null_columns` are removed; every other null is left alone.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CleaningPolicy {
    #[serde(default)]
    pub zero_fill_columns: BTreeSet<String>,
    #[serde(default)]
    pub drop_null_columns: BTreeSet<String>,
    #[serde(default = "default_true")]
    pub dedup: bool,
}

fn default_true() -> bool {
    true
}

impl CleaningPolicy {
    pub fn validate(&self) -> Result<(), IngestError> {
        if let Some(col) = self.zero_fill_columns.intersection(&self.drop_null_columns).next() {
            return Err(IngestError::PolicyOverlap {
                column: col.clone(),
            });
        }
        Ok(())
    }
}

/// Apply a [`CleaningPolicy`] to a dataset.
pub fn impute_missing(d: &Dataset, policy: &CleaningPolicy) -> Result<Dataset, IngestError> {
    policy.validate()?;

    let mut zero_fill = Vec::new();
    for name in &policy.zero_fill_columns {
        let idx = d
            .column_index(name)
            .ok_or_else(|| IngestError::UnknownColumn {
                column: name.clone(),
                context: "zero_fill_columns",
            })?;
        let kind = d.columns[idx].kind;
        let fill = match kind {
            ColumnKind::Integer => Value::Int(0),
            ColumnKind::Real => Value::Real(0.0),
            _ => {
                return Err(IngestError::ZeroFillNonNumeric {
                    column: name.clone(),
                    kind,
                })
            }
        };
        zero_fill.push((idx, fill));
    }

    let mut drop_null = Vec::new();
    for name in &policy.drop_null_columns {
        let idx = d
            .column_index(name)
            .ok_or_else(|| IngestError::UnknownColumn {
                column: name.clone(),
                context: "drop_null_columns",
            })?;
        drop_null.push(idx);
    }

    let mut rows = Vec::with_capacity(d.rows.len());
    for row in &d.rows {
        if drop_null.iter().any(|&i| row[i].is_null()) {
            continue;
        }
        let mut row = row.clone();
        for (idx, fill) in &zero_fill {
            if row[*idx].is_null() {
                row[*idx] = fill.clone();
            }
        }
        rows.push(row);
    }

    Ok(Dataset {
        name: d.name.clone(),
        columns: d.columns.clone(),
        rows,
    })
}

/// Label fallback when no keyword rule matches a description.
pub const DEFAULT_CATEGORY: &str = "Traffic Incident";

/// One keyword-to-category mapping. Lower `priority` ranks are tried first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryRule {
    pub keyword: String,
    pub category: String,
    pub priority: i64,
}

/// Validated, priority-ordered rule list.
#[derive(Debug, Clone)]
pub struct CategoryRuleSet {
    rules: Vec<CategoryRule>,
}

impl CategoryRuleSet {
    pub fn new(mut rules: Vec<CategoryRule>) -> Result<Self, IngestError> {
        if rules.is_empty() {
            return Err(IngestError::EmptyRules);
        }
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.priority) {
                return Err(IngestError::DuplicatePriority {
                    priority: r.priority,
                });
            }
        }
        rules.sort_by_key(|r| r.priority);
        for r in &mut rules {
            r.keyword = r.keyword.to_lowercase();
        }
        Ok(Self { rules })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        let rules: Vec<CategoryRule> = serde_json::from_slice(bytes)?;
        Self::new(rules).map_err(serde::de::Error::custom)
    }

    /// Keyword list for the common traffic-description categories,
    /// user-overridable via `--category-rules`.
    pub fn default_rules() -> Self {
        let specs = [
            ("2 vehicle", "2 vehicle incident"),
            ("multi vehicle", "Multi-vehicle incident"),
            ("single vehicle", "Single vehicle incident"),
            ("pedestrian", "Pedestrian involved"),
            ("blocking", "Blocking"),
            ("stalled", "Stalled vehicle"),
            ("lrt", "LRT incident"),
            ("signal", "Traffic signal issue"),
            ("injuries", "Incident with injuries"),
        ];
        let rules = specs
            .iter()
            .enumerate()
            .map(|(i, (kw, cat))| CategoryRule {
                keyword: (*kw).to_string(),
                category: (*cat).to_string(),
                priority: i as i64,
            })
            .collect();
        Self::new(rules).expect("built-in rules are valid")
    }

    pub fn rules(&self) -> &[CategoryRule] {
        &self.rules
    }
}

const NUMBER_WORDS: [(&str, &str); 10] = [
    ("one", "1"),
    ("two", "2"),
    ("three", "3"),
    ("four", "4"),
    ("five", "5"),
    ("six", "6"),
    ("seven", "7"),
    ("eight", "8"),
    ("nine", "9"),
    ("ten", "10"),
];

/// Lowercase the text and replace spelled-out numbers with digits so
/// keyword rules like "2 vehicle" match "Two vehicle ...".
fn normalize_description(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    let mut word = String::new();
    let flush = |out: &mut String, word: &mut String| {
        if !word.is_empty() {
            match NUMBER_WORDS.iter().find(|(w, _)| w == word) {
                Some((_, digit)) => out.push_str(digit),
                None => out.push_str(word),
            }
            word.clear();
        }
    };
    for ch in lower.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            flush(&mut out, &mut word);
            out.push(ch);
        }
    }
    flush(&mut out, &mut word);
    out
}

/// Map a free-text description to a category label.
///
/// Rules are tried in priority order; a rule matches when its keyword is a
/// case-insensitive substring of the normalized description. Falls back to
/// [`DEFAULT_CATEGORY`].
pub fn map_incident_category(description: &str, rules: &CategoryRuleSet) -> String {
    let normalized = normalize_description(description);
    for rule in &rules.rules {
        if normalized.contains(rule.keyword.as_str()) {
            return rule.category.clone();
        }
    }
    DEFAULT_CATEGORY.to_string()
}
