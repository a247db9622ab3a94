//! Survey response matrices and loaders.
//!
//! Likert responses arrive as CSV in either a wide layout (header row of item
//! ids, one row per respondent) or a long layout of `(respondent, item,
//! response)` triples. Values are five-point Likert codes 1..=5; empty cells
//! and `NA` are treated as missing. [`dichotomize`] maps them to the binary
//! matrix the model consumes: a response counts as positive when it is at
//! least the threshold (default 4).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CSV layout of a response file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Header row of item ids, one row per respondent; first column holds
    /// the respondent id.
    Wide,
    /// One `(respondent_id, item_id, response)` triple per row.
    Long,
}

/// Five-point Likert responses, optionally missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LikertMatrix {
    respondent_ids: Vec<String>,
    item_ids: Vec<String>,
    /// Row-major N x P; `None` marks a missing response.
    values: Vec<Option<u8>>,
}

/// Binary (dichotomized) responses, optionally missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub respondent_ids: Vec<String>,
    pub item_ids: Vec<String>,
    /// Row-major N x P; `None` marks a missing response.
    values: Vec<Option<u8>>,
    pub group_label: Option<String>,
}

fn check_ids(kind: &str, ids: &[String]) -> Result<()> {
    if ids.len() < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 {kind}s, got {}",
            ids.len()
        )));
    }
    let mut seen = HashMap::new();
    for (idx, id) in ids.iter().enumerate() {
        if let Some(prev) = seen.insert(id.as_str(), idx) {
            return Err(Error::Conflict(format!(
                "duplicate {kind} id {id:?} (positions {prev} and {idx})"
            )));
        }
    }
    Ok(())
}

impl LikertMatrix {
    pub fn new(
        respondent_ids: Vec<String>,
        item_ids: Vec<String>,
        values: Vec<Option<u8>>,
    ) -> Result<Self> {
        check_ids("respondent", &respondent_ids)?;
        check_ids("item", &item_ids)?;
        if values.len() != respondent_ids.len() * item_ids.len() {
            return Err(Error::Contract(format!(
                "value count {} does not match {}x{}",
                values.len(),
                respondent_ids.len(),
                item_ids.len()
            )));
        }
        for v in values.iter().flatten() {
            if !(1..=5).contains(v) {
                return Err(Error::Contract(format!(
                    "Likert value {v} outside 1..=5"
                )));
            }
        }
        Ok(Self {
            respondent_ids,
            item_ids,
            values,
        })
    }

    pub fn n_respondents(&self) -> usize {
        self.respondent_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn respondent_ids(&self) -> &[String] {
        &self.respondent_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn get(&self, respondent: usize, item: usize) -> Option<u8> {
        self.values[respondent * self.item_ids.len() + item]
    }
}

impl ResponseMatrix {
    pub fn new(
        respondent_ids: Vec<String>,
        item_ids: Vec<String>,
        values: Vec<Option<u8>>,
        group_label: Option<String>,
    ) -> Result<Self> {
        check_ids("respondent", &respondent_ids)?;
        check_ids("item", &item_ids)?;
        if values.len() != respondent_ids.len() * item_ids.len() {
            return Err(Error::Contract(format!(
                "value count {} does not match {}x{}",
                values.len(),
                respondent_ids.len(),
                item_ids.len()
            )));
        }
        for v in values.iter().flatten() {
            if *v > 1 {
                return Err(Error::Contract(format!("binary value {v} outside {{0,1}}")));
            }
        }
        Ok(Self {
            respondent_ids,
            item_ids,
            values,
            group_label,
        })
    }

    pub fn n_respondents(&self) -> usize {
        self.respondent_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn get(&self, respondent: usize, item: usize) -> Option<u8> {
        self.values[respondent * self.item_ids.len() + item]
    }

    pub fn values(&self) -> &[Option<u8>] {
        &self.values
    }

    /// Dense cells with `-1` marking missing entries; row-major N x P.
    pub fn dense(&self) -> Vec<i8> {
        self.values
            .iter()
            .map(|v| v.map_or(-1, |x| x as i8))
            .collect()
    }

    /// Indices of respondents with no observed response at all.
    pub fn all_missing_rows(&self) -> Vec<usize> {
        (0..self.n_respondents())
            .filter(|&k| (0..self.n_items()).all(|i| self.get(k, i).is_none()))
            .collect()
    }

    /// Indices of items with no observed response at all.
    pub fn all_missing_cols(&self) -> Vec<usize> {
        (0..self.n_items())
            .filter(|&i| (0..self.n_respondents()).all(|k| self.get(k, i).is_none()))
            .collect()
    }
}

fn parse_cell(raw: &str, path: &str, line: usize, column: usize) -> Result<Option<u8>> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: i64 = t.parse().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: format!("expected integer Likert response, got {t:?}"),
    })?;
    if !(1..=5).contains(&v) {
        return Err(Error::Parse {
            path: path.to_string(),
            line,
            column,
            message: format!("Likert response {v} outside 1..=5"),
        });
    }
    Ok(Some(v as u8))
}

/// Load Likert responses from a CSV file in the given layout.
pub fn load_responses(path: &Path, layout: Layout) -> Result<LikertMatrix> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    match layout {
        Layout::Wide => load_wide(&mut reader, &display),
        Layout::Long => load_long(&mut reader, &display),
    }
}

fn load_wide<R: std::io::Read>(reader: &mut csv::Reader<R>, path: &str) -> Result<LikertMatrix> {
    let headers = reader.headers()?.clone();
    if headers.len() < 3 {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            column: 1,
            message: "wide layout needs a respondent-id column and at least 2 item columns".into(),
        });
    }
    let item_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut respondent_ids = Vec::new();
    let mut values = Vec::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = rec_idx + 2; // header is line 1
        if record.len() != headers.len() {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                column: record.len(),
                message: format!(
                    "expected {} fields, got {}",
                    headers.len(),
                    record.len()
                ),
            });
        }
        respondent_ids.push(record[0].trim().to_string());
        for (j, raw) in record.iter().skip(1).enumerate() {
            values.push(parse_cell(raw, path, line, j + 2)?);
        }
    }
    LikertMatrix::new(respondent_ids, item_ids, values)
}

fn load_long<R: std::io::Read>(reader: &mut csv::Reader<R>, path: &str) -> Result<LikertMatrix> {
    let headers = reader.headers()?.clone();
    if headers.len() != 3 {
        return Err(Error::Parse {
            path: path.to_string(),
            line: 1,
            column: 1,
            message: format!(
                "long layout needs exactly 3 columns (respondent, item, response), got {}",
                headers.len()
            ),
        });
    }
    let mut respondent_ids: Vec<String> = Vec::new();
    let mut item_ids: Vec<String> = Vec::new();
    let mut respondent_index: HashMap<String, usize> = HashMap::new();
    let mut item_index: HashMap<String, usize> = HashMap::new();
    let mut triples: HashMap<(usize, usize), Option<u8>> = HashMap::new();
    for (rec_idx, record) in reader.records().enumerate() {
        let record = record?;
        let line = rec_idx + 2;
        if record.len() != 3 {
            return Err(Error::Parse {
                path: path.to_string(),
                line,
                column: record.len(),
                message: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let rid = record[0].trim().to_string();
        let iid = record[1].trim().to_string();
        let value = parse_cell(&record[2], path, line, 3)?;
        let k = *respondent_index.entry(rid.clone()).or_insert_with(|| {
            respondent_ids.push(rid);
            respondent_ids.len() - 1
        });
        let i = *item_index.entry(iid.clone()).or_insert_with(|| {
            item_ids.push(iid);
            item_ids.len() - 1
        });
        if triples.insert((k, i), value).is_some() {
            return Err(Error::Conflict(format!(
                "{path}:{line}: duplicate (respondent, item) pair ({}, {})",
                respondent_ids[k], item_ids[i]
            )));
        }
    }
    let n = respondent_ids.len();
    let p = item_ids.len();
    let mut values = vec![None; n * p];
    for ((k, i), v) in triples {
        values[k * p + i] = v;
    }
    LikertMatrix::new(respondent_ids, item_ids, values)
}

/// Map Likert responses to binary: a value is positive when `>= threshold`.
///
/// Missing responses stay missing; ids are preserved. The threshold must lie
/// in 2..=5.
pub fn dichotomize(m: &LikertMatrix, threshold: u8) -> Result<ResponseMatrix> {
    if !(2..=5).contains(&threshold) {
        return Err(Error::Config(format!(
            "dichotomize_threshold must be in 2..=5, got {threshold}"
        )));
    }
    let values = m
        .values
        .iter()
        .map(|v| v.map(|x| u8::from(x >= threshold)))
        .collect();
    ResponseMatrix::new(
        m.respondent_ids.clone(),
        m.item_ids.clone(),
        values,
        None,
    )
}
