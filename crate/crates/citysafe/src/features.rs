//! Community-level feature aggregation and temporal series.
//!
//! Geocoded datasets collapse into one table with a row per community:
//! counts, sums, and means of the safety-relevant indicators, plus census
//! pass-through columns. Temporal helpers bucket record datasets by month
//! or year with zero-fill over the observed span.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geocode::BoundarySet;
use crate::ingest::{parse_date, Dataset, Value};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("dataset {dataset:?} has no column {column:?}")]
    UnknownColumn { dataset: String, column: String },
    #[error("column {column:?} is not numeric")]
    NotNumeric { column: String },
}

/// What a source dataset contributes to the community table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum DatasetRole {
    /// Produces streetlight_count, mean_wattage, total_wattage. Null
    /// wattages are excluded from the mean and the sum but still count
    /// as lights.
    Streetlights { wattage_column: String },
    /// Produces tree_count.
    Trees,
    /// Produces traffic_incident_count.
    TrafficIncidents,
    /// Produces crime_total plus one crime_<category> column per observed
    /// category. With a count column the rows are pre-aggregated tallies;
    /// without one each row counts as a single incident.
    Crime {
        #[serde(default)]
        category_column: Option<String>,
        #[serde(default)]
        count_column: Option<String>,
    },
    /// Produces disorder_count.
    Disorder,
    /// Produces pet_total, cat_count, dog_count.
    Pets {
        species_column: String,
        #[serde(default = "default_cat_label")]
        cat_label: String,
        #[serde(default = "default_dog_label")]
        dog_label: String,
    },
    /// Keyed by community name rather than coordinates; contributes
    /// population, male_female_ratio, dwelling_count, apartment_count and
    /// any configured pass-through columns verbatim.
    Census {
        #[serde(default)]
        population_column: Option<String>,
        #[serde(default)]
        male_column: Option<String>,
        #[serde(default)]
        female_column: Option<String>,
        #[serde(default)]
        dwelling_column: Option<String>,
        #[serde(default)]
        apartment_column: Option<String>,
        #[serde(default)]
        passthrough: Vec<String>,
    },
}

fn default_cat_label() -> String {
    "Cats".into()
}

fn default_dog_label() -> String {
    "Dogs".into()
}

/// One row per community, one column per indicator. Column-major storage;
/// missing values are explicit `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityFeatureTable {
    pub communities: Vec<String>,
    pub columns: Vec<String>,
    pub data: Vec<Vec<Option<f64>>>,
}

impl CommunityFeatureTable {
    pub fn new(communities: Vec<String>) -> Self {
        Self {
            communities,
            columns: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.communities.len()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.communities.len(), "column length mismatch");
        self.columns.push(name.into());
        self.data.push(values);
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn get(&self, row: usize, column: &str) -> Option<f64> {
        self.column(column).and_then(|col| col[row])
    }

    /// Rows as (community, values-in-column-order), for exports.
    pub fn to_csv_string(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["community_name".to_string()];
        header.extend(self.columns.iter().cloned());
        wtr.write_record(&header).expect("in-memory write");
        for (r, name) in self.communities.iter().enumerate() {
            let mut rec = vec![name.clone()];
            for col in &self.data {
                rec.push(col[r].map_or(String::new(), |v| format!("{v}")));
            }
            wtr.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf8")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .communities
            .iter()
            .enumerate()
            .map(|(r, name)| {
                let mut obj = serde_json::Map::new();
                obj.insert("community_name".into(), serde_json::json!(name));
                for (c, col) in self.columns.iter().enumerate() {
                    obj.insert(col.clone(), serde_json::json!(self.data[c][r]));
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

fn slug(category: &str) -> String {
    let mut out = String::with_capacity(category.len());
    let mut last_underscore = false;
    for ch in category.trim().to_lowercase().chars() {
        if ch.is_alphanumeric() {
            out.push(ch);
            last_underscore = false;
        } else if !last_underscore && !out.is_empty() {
            out.push('_');
            last_underscore = true;
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

/// Row index into the community table for each dataset row, resolved
/// case-insensitively. Rows with a null or unknown community are skipped
/// (the unknown ones with a warning).
fn community_rows<'a>(
    d: &'a Dataset,
    b: &BoundarySet,
    index_of: &BTreeMap<String, usize>,
    community_column: &str,
) -> Vec<(usize, &'a [Value])> {
    let Some(name_idx) = d.column_index(community_column) else {
        log::warn!(
            "dataset {:?} has no {community_column:?} column; contributing nothing",
            d.name
        );
        return Vec::new();
    };
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::with_capacity(d.rows.len());
    for row in &d.rows {
        let Some(name) = row[name_idx].as_text() else {
            continue; // flagged-null rows stay out of community aggregates
        };
        match b.find(name).and_then(|c| index_of.get(&c.name)) {
            Some(&r) => out.push((r, row.as_slice())),
            None => {
                unknown.insert(name.to_string());
            }
        }
    }
    if !unknown.is_empty() {
        log::warn!(
            "dataset {:?}: {} community name(s) not in the boundary set, rows excluded: {:?}",
            d.name,
            unknown.len(),
            unknown
        );
    }
    out
}

/// Build the community feature table from geocoded datasets.
///
/// Every community in the boundary set gets a row. Counts default to zero
/// where a source has no records; means and ratios stay null.
pub fn aggregate_by_community(
    datasets: &[(Dataset, DatasetRole)],
    b: &BoundarySet,
    community_column: &str,
) -> Result<CommunityFeatureTable, FeatureError> {
    let communities: Vec<String> = b.communities.iter().map(|c| c.name.clone()).collect();
    let index_of: BTreeMap<String, usize> = communities
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let n = communities.len();
    let mut table = CommunityFeatureTable::new(communities);

    let require = |d: &Dataset, column: &str| -> Result<usize, FeatureError> {
        d.column_index(column).ok_or_else(|| FeatureError::UnknownColumn {
            dataset: d.name.clone(),
            column: column.to_string(),
        })
    };

    for (d, role) in datasets {
        let rows = community_rows(d, b, &index_of, community_column);
        match role {
            DatasetRole::Streetlights { wattage_column } => {
                let w_idx = require(d, wattage_column)?;
                let mut count = vec![0.0; n];
                let mut total = vec![0.0; n];
                let mut with_wattage = vec![0u64; n];
                for (r, row) in &rows {
                    count[*r] += 1.0;
                    if let Some(w) = row[w_idx].as_f64() {
                        total[*r] += w;
                        with_wattage[*r] += 1;
                    }
                }
                let mean: Vec<Option<f64>> = total
                    .iter()
                    .zip(&with_wattage)
                    .map(|(t, &m)| (m > 0).then(|| t / m as f64))
                    .collect();
                table.push_column("streetlight_count", count.into_iter().map(Some).collect());
                table.push_column("mean_wattage", mean);
                table.push_column("total_wattage", total.into_iter().map(Some).collect());
            }
            DatasetRole::Trees => {
                table.push_column("tree_count", count_rows(&rows, n));
            }
            DatasetRole::TrafficIncidents => {
                table.push_column("traffic_incident_count", count_rows(&rows, n));
            }
            DatasetRole::Disorder => {
                table.push_column("disorder_count", count_rows(&rows, n));
            }
            DatasetRole::Crime {
                category_column,
                count_column,
            } => {
                let cat_idx = category_column
                    .as_deref()
                    .map(|c| require(d, c))
                    .transpose()?;
                let count_idx = count_column
                    .as_deref()
                    .map(|c| require(d, c))
                    .transpose()?;
                let mut total = vec![0.0; n];
                let mut per_category: BTreeMap<String, Vec<f64>> = BTreeMap::new();
                for (r, row) in &rows {
                    // A null tally in a count column means zero crime.
                    let weight = match count_idx {
                        Some(ci) => row[ci].as_f64().unwrap_or(0.0),
                        None => 1.0,
                    };
                    total[*r] += weight;
                    if let Some(ci) = cat_idx {
                        if let Some(cat) = row[ci].as_text() {
                            per_category
                                .entry(slug(cat))
                                .or_insert_with(|| vec![0.0; n])[*r] += weight;
                        }
                    }
                }
                table.push_column("crime_total", total.into_iter().map(Some).collect());
                for (cat, counts) in per_category {
                    table.push_column(
                        format!("crime_{cat}"),
                        counts.into_iter().map(Some).collect(),
                    );
                }
            }
            DatasetRole::Pets {
                species_column,
                cat_label,
                dog_label,
            } => {
                let s_idx = require(d, species_column)?;
                let mut total = vec![0.0; n];
                let mut cats = vec![0.0; n];
                let mut dogs = vec![0.0; n];
                for (r, row) in &rows {
                    total[*r] += 1.0;
                    if let Some(species) = row[s_idx].as_text() {
                        if species.eq_ignore_ascii_case(cat_label) {
                            cats[*r] += 1.0;
                        } else if species.eq_ignore_ascii_case(dog_label) {
                            dogs[*r] += 1.0;
                        }
                    }
                }
                table.push_column("pet_total", total.into_iter().map(Some).collect());
                table.push_column("cat_count", cats.into_iter().map(Some).collect());
                table.push_column("dog_count", dogs.into_iter().map(Some).collect());
            }
            DatasetRole::Census {
                population_column,
                male_column,
                female_column,
                dwelling_column,
                apartment_column,
                passthrough,
            } => {
                // One census row per community; the first row wins when a
                // community repeats.
                let mut first_row: Vec<Option<&[Value]>> = vec![None; n];
                for (r, row) in &rows {
                    if first_row[*r].is_none() {
                        first_row[*r] = Some(row);
                    }
                }
                let pull = |column: &Option<String>| -> Result<Option<Vec<Option<f64>>>, FeatureError> {
                    let Some(col) = column else { return Ok(None) };
                    let idx = require(d, col)?;
                    Ok(Some(
                        first_row
                            .iter()
                            .map(|row| row.and_then(|r| r[idx].as_f64()))
                            .collect(),
                    ))
                };
                if let Some(values) = pull(population_column)? {
                    table.push_column("population", values);
                }
                if let (Some(m), Some(f)) = (male_column, female_column) {
                    let m_idx = require(d, m)?;
                    let f_idx = require(d, f)?;
                    let ratio = first_row
                        .iter()
                        .map(|row| {
                            row.and_then(|r| {
                                let male = r[m_idx].as_f64()?;
                                let female = r[f_idx].as_f64()?;
                                (female != 0.0).then(|| male / female)
                            })
                        })
                        .collect();
                    table.push_column("male_female_ratio", ratio);
                }
                if let Some(values) = pull(dwelling_column)? {
                    table.push_column("dwelling_count", values);
                }
                if let Some(values) = pull(apartment_column)? {
                    table.push_column("apartment_count", values);
                }
                for col in passthrough {
                    let idx = require(d, col)?;
                    let values = first_row
                        .iter()
                        .map(|row| row.and_then(|r| r[idx].as_f64()))
                        .collect();
                    table.push_column(col.clone(), values);
                }
            }
        }
    }

    Ok(table)
}

fn count_rows(rows: &[(usize, &[Value])], n: usize) -> Vec<Option<f64>> {
    let mut count = vec![0.0; n];
    for (r, _) in rows {
        count[*r] += 1.0;
    }
    count.into_iter().map(Some).collect()
}

/// One time bucket, optionally per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesEntry {
    pub year: i32,
    pub month: u32,
    pub category: Option<String>,
    pub count: u64,
}

/// Monthly counts with zero-filled gaps, sorted by (category, year, month).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeries {
    pub entries: Vec<SeriesEntry>,
    /// Rows whose date failed to parse (reported, not fatal).
    pub skipped_rows: usize,
}

fn row_date(v: &Value) -> Option<(i32, u32)> {
    use chrono::Datelike;
    match v {
        Value::Date(d) => Some((d.year(), d.month())),
        Value::Text(s) => parse_date(s).map(|d| (d.year(), d.month())),
        _ => None,
    }
}

fn next_month(y: i32, m: u32) -> (i32, u32) {
    if m == 12 {
        (y + 1, 1)
    } else {
        (y, m + 1)
    }
}

/// Count records per (year, month[, category]).
///
/// Every month between the earliest and latest parsed date appears in the
/// output for every category, holding 0 where nothing was recorded.
pub fn monthly_series(
    d: &Dataset,
    date_column: &str,
    category_column: Option<&str>,
) -> Result<TimeSeries, FeatureError> {
    let date_idx = d
        .column_index(date_column)
        .ok_or_else(|| FeatureError::UnknownColumn {
            dataset: d.name.clone(),
            column: date_column.to_string(),
        })?;
    let cat_idx = category_column
        .map(|c| {
            d.column_index(c).ok_or_else(|| FeatureError::UnknownColumn {
                dataset: d.name.clone(),
                column: c.to_string(),
            })
        })
        .transpose()?;

    let mut counts: BTreeMap<(Option<String>, i32, u32), u64> = BTreeMap::new();
    let mut skipped = 0usize;
    let mut span: Option<((i32, u32), (i32, u32))> = None;
    for row in &d.rows {
        let Some((y, m)) = row_date(&row[date_idx]) else {
            skipped += 1;
            continue;
        };
        let category = cat_idx
            .and_then(|ci| row[ci].as_text())
            .map(str::to_string);
        *counts.entry((category, y, m)).or_insert(0) += 1;
        span = Some(match span {
            None => ((y, m), (y, m)),
            Some((lo, hi)) => (lo.min((y, m)), hi.max((y, m))),
        });
    }
    if skipped > 0 {
        log::warn!(
            "dataset {:?}: skipped {skipped} row(s) with unparseable {date_column:?}",
            d.name
        );
    }

    let Some((lo, hi)) = span else {
        return Ok(TimeSeries {
            entries: Vec::new(),
            skipped_rows: skipped,
        });
    };
    let categories: BTreeSet<Option<String>> =
        counts.keys().map(|(c, _, _)| c.clone()).collect();
    let mut entries = Vec::new();
    for category in categories {
        let mut cur = lo;
        loop {
            let count = counts
                .get(&(category.clone(), cur.0, cur.1))
                .copied()
                .unwrap_or(0);
            entries.push(SeriesEntry {
                year: cur.0,
                month: cur.1,
                category: category.clone(),
                count,
            });
            if cur == hi {
                break;
            }
            cur = next_month(cur.0, cur.1);
        }
    }
    Ok(TimeSeries {
        entries,
        skipped_rows: skipped,
    })
}

/// Mean count per calendar month across the years of the observed span.
///
/// Categories are summed per bucket first. Months that never occur inside
/// the span (short series) come back as `None`. An empty series is all
/// `None`.
pub fn monthly_averages(ts: &TimeSeries) -> [Option<f64>; 12] {
    let mut totals: BTreeMap<(i32, u32), u64> = BTreeMap::new();
    for e in &ts.entries {
        *totals.entry((e.year, e.month)).or_insert(0) += e.count;
    }
    let mut sums = [0u64; 12];
    let mut years = [0u32; 12];
    for (&(_, m), &count) in &totals {
        sums[(m - 1) as usize] += count;
        years[(m - 1) as usize] += 1;
    }
    std::array::from_fn(|i| (years[i] > 0).then(|| sums[i] as f64 / years[i] as f64))
}

/// Top-`k` communities by a numeric column, descending, ties broken by
/// community name ascending. Communities with a null metric are skipped.
pub fn top_k(
    table: &CommunityFeatureTable,
    metric_column: &str,
    k: usize,
) -> Result<Vec<(String, f64)>, FeatureError> {
    let col = table
        .column(metric_column)
        .ok_or_else(|| FeatureError::UnknownColumn {
            dataset: "community features".into(),
            column: metric_column.to_string(),
        })?;
    let mut ranked: Vec<(String, f64)> = table
        .communities
        .iter()
        .zip(col)
        .filter_map(|(name, v)| v.map(|v| (name.clone(), v)))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(k);
    Ok(ranked)
}

/// Yearly counts per category with zero-filled years inside the span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct YearEntry {
    pub year: i32,
    pub category: Option<String>,
    pub count: u64,
}

pub fn yearly_by_category(
    d: &Dataset,
    date_column: &str,
    category_column: Option<&str>,
) -> Result<(Vec<YearEntry>, usize), FeatureError> {
    let monthly = monthly_series(d, date_column, category_column)?;
    let mut totals: BTreeMap<(Option<String>, i32), u64> = BTreeMap::new();
    for e in &monthly.entries {
        *totals.entry((e.category.clone(), e.year)).or_insert(0) += e.count;
    }
    let entries = totals
        .into_iter()
        .map(|((category, year), count)| YearEntry {
            year,
            category,
            count,
        })
        .collect();
    Ok((entries, monthly.skipped_rows))
}
