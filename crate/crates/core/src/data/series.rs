use std::fmt;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row key of a raw series: an integer index or a calendar time.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Timestamp {
    Index(i64),
    Time(NaiveDateTime),
}

impl Timestamp {
    pub fn parse(raw: &str) -> Result<Self> {
        let s = raw.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Timestamp::Index(i));
        }
        if let Ok(t) = DateTime::parse_from_rfc3339(s) {
            return Ok(Timestamp::Time(t.naive_utc()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
            if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp::Time(t));
            }
        }
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(Timestamp::Time(d.and_hms_opt(0, 0, 0).expect("midnight")));
        }
        Err(Error::data(format!("unparseable timestamp `{raw}`")))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Timestamp::Index(i) => write!(f, "{i}"),
            Timestamp::Time(t) => write!(f, "{}", t.format("%Y-%m-%dT%H:%M:%S")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

/// A multivariate time series as read from disk, possibly with gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSeries {
    pub timestamps: Vec<Timestamp>,
    pub columns: Vec<Column>,
    pub target_name: String,
}

impl RawSeries {
    pub fn new(timestamps: Vec<Timestamp>, columns: Vec<Column>, target_name: &str) -> Result<Self> {
        let len = timestamps.len();
        if let Some(c) = columns.iter().find(|c| c.values.len() != len) {
            return Err(Error::data(format!(
                "column `{}` has {} values but there are {len} timestamps",
                c.name,
                c.values.len()
            )));
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::data(format!(
                "timestamps must be strictly increasing (row {} = {} is not after {})",
                w + 1,
                timestamps[w + 1],
                timestamps[w]
            )));
        }
        if !columns.iter().any(|c| c.name == target_name) {
            return Err(Error::usage(format!("target column `{target_name}` not found")));
        }
        Ok(Self {
            timestamps,
            columns,
            target_name: target_name.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.name == self.target_name)
            .expect("target validated at construction")
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.values.iter().any(Option::is_none))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// Column holding the row key; the first column when unset.
    pub timestamp_column: Option<String>,
    /// Numeric value that marks a missing reading.
    pub missing_sentinel: Option<f64>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            timestamp_column: None,
            missing_sentinel: Some(-200.0),
        }
    }
}

fn parse_cell(raw: &str, sentinel: Option<f64>, column: &str, row: usize) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| Error::data(format!("non-numeric value `{raw}` in column `{column}`, row {row}")))?;
    if !v.is_finite() || sentinel == Some(v) {
        return Ok(None);
    }
    Ok(Some(v))
}

/// Reads a CSV with a header row into a [`RawSeries`].
pub fn read_csv(path: &Path, target: &str, options: &CsvOptions) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(Error::data("CSV needs a timestamp column and at least one attribute"));
    }
    let ts_idx = match &options.timestamp_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::usage(format!("timestamp column `{name}` not found")))?,
        None => 0,
    };
    if !headers.iter().enumerate().any(|(i, h)| i != ts_idx && h == target) {
        return Err(Error::usage(format!("target column `{target}` not found in {}", path.display())));
    }

    let mut timestamps = Vec::new();
    let mut columns: Vec<Column> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ts_idx)
        .map(|(_, h)| Column {
            name: h.clone(),
            values: Vec::new(),
        })
        .collect();

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::data(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
        }
        timestamps.push(Timestamp::parse(&record[ts_idx])?);
        let mut col = 0;
        for (i, cell) in record.iter().enumerate() {
            if i == ts_idx {
                continue;
            }
            let name = &columns[col].name;
            let v = parse_cell(cell, options.missing_sentinel, name, row)?;
            columns[col].values.push(v);
            col += 1;
        }
    }
    RawSeries::new(timestamps, columns, target)
}

/// Fills gaps linearly between the nearest present neighbours; leading and
/// trailing gaps take the nearest present value.
pub fn interpolate_missing(series: &RawSeries) -> Result<RawSeries> {
    let mut out = series.clone();
    for col in &mut out.columns {
        let present: Vec<usize> = (0..col.values.len())
            .filter(|&i| col.values[i].is_some())
            .collect();
        let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
            return Err(Error::data(format!("column `{}` has no values", col.name)));
        };
        let vals = &mut col.values;
        let head = vals[first];
        for v in &mut vals[..first] {
            *v = head;
        }
        let tail = vals[last];
        for v in &mut vals[last + 1..] {
            *v = tail;
        }
        for pair in present.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b - a < 2 {
                continue;
            }
            let (va, vb) = (vals[a].unwrap(), vals[b].unwrap());
            let span = (b - a) as f64;
            for k in a + 1..b {
                let frac = (k - a) as f64 / span;
                vals[k] = Some(va + (vb - va) * frac);
            }
        }
    }
    Ok(out)
}
