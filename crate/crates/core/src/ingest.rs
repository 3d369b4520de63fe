//! CSV ingestion of the curated CAN export, with the normalization rules for
//! dates, countries and amounts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::countries;
use crate::error::IngestError;
use crate::schema::{fields, DataType, Schema};
use crate::store::{ColumnStore, StoreBuilder, Value};

/// Default hyperlink pattern for notice ids.
pub const DEFAULT_LINK_TEMPLATE: &str = "https://ted.europa.eu/udl?uri=TED:NOTICE:{id}:TEXT:EN:HTML";

/// Fields whose values are dates in `DD-MON-YY` form.
pub const DATE_FIELDS: [&str; 2] = [fields::DT_DISPATCH, fields::DT_AWARD];
/// Fields whose values are two-letter country codes.
pub const COUNTRY_FIELDS: [&str; 2] = [fields::ISO_COUNTRY_CODE, fields::WIN_COUNTRY_CODE];

/// Number of distinct values below which a field qualifies as a Factor.
pub const FACTOR_THRESHOLD: usize = 300;

const MONTHS: [&str; 12] = [
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Malformed {
    pub kind: &'static str,
    pub raw: String,
}

impl fmt::Display for Malformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed {}: {:?}", self.kind, self.raw)
    }
}

fn is_blank(raw: Option<&str>) -> Option<&str> {
    raw.map(str::trim).filter(|s| !s.is_empty())
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        2 if (year.is_multiple_of(4) && !year.is_multiple_of(100)) || year.is_multiple_of(400) => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

fn check_date(raw: &str, year: u32, month: u32, day: u32) -> Result<String, Malformed> {
    if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
        return Err(Malformed {
            kind: "date",
            raw: raw.to_string(),
        });
    }
    Ok(format!("{year:04}-{month:02}-{day:02}"))
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// `DD-MON-YY` → `YYYY-MM-DD`. Two-digit years from 90 map to the 1900s,
/// the rest to the 2000s. Already-normalized `YYYY-MM-DD` text is validated
/// and passed through, so re-ingesting an export is lossless.
pub fn normalize_date(raw: Option<&str>) -> Result<Option<String>, Malformed> {
    let Some(s) = is_blank(raw) else {
        return Ok(None);
    };
    let bad = || Malformed {
        kind: "date",
        raw: s.to_string(),
    };
    let parts: Vec<&str> = s.split('-').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    if parts[0].len() == 4 && parts[1].len() == 2 && parts[2].len() == 2 {
        if !parts.iter().all(|p| all_digits(p)) {
            return Err(bad());
        }
        let y: u32 = parts[0].parse().map_err(|_| bad())?;
        let m: u32 = parts[1].parse().map_err(|_| bad())?;
        let d: u32 = parts[2].parse().map_err(|_| bad())?;
        return check_date(s, y, m, d).map(Some);
    }
    let (day, mon, yy) = (parts[0], parts[1], parts[2]);
    if !(1..=2).contains(&day.len()) || !all_digits(day) || yy.len() != 2 || !all_digits(yy) {
        return Err(bad());
    }
    let month = MONTHS
        .iter()
        .position(|m| m.eq_ignore_ascii_case(mon))
        .ok_or_else(bad)? as u32
        + 1;
    let yy: u32 = yy.parse().map_err(|_| bad())?;
    let year = if yy >= 90 { 1900 + yy } else { 2000 + yy };
    let day: u32 = day.parse().map_err(|_| bad())?;
    check_date(s, year, month, day).map(Some)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CountryLookup {
    Null,
    Known(&'static str),
    /// Not in the table; the raw text is kept.
    Unknown(String),
}

impl CountryLookup {
    pub fn into_value(self) -> Option<String> {
        match self {
            CountryLookup::Null => None,
            CountryLookup::Known(n) => Some(n.to_string()),
            CountryLookup::Unknown(raw) => Some(raw),
        }
    }
}

/// Two-letter code → full English name. Full names already in the table
/// pass through as known.
pub fn expand_country(code: Option<&str>) -> CountryLookup {
    let Some(code) = is_blank(code) else {
        return CountryLookup::Null;
    };
    if let Some(name) = countries::country_name(code) {
        return CountryLookup::Known(name);
    }
    match countries::find_name(code) {
        Some(name) => CountryLookup::Known(name),
        None => CountryLookup::Unknown(code.to_string()),
    }
}

/// Decimal text → integer, rounding to nearest with ties away from zero.
pub fn to_integer_value(raw: Option<&str>) -> Result<Option<i64>, Malformed> {
    let Some(s) = is_blank(raw) else {
        return Ok(None);
    };
    let bad = || Malformed {
        kind: "number",
        raw: s.to_string(),
    };
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    if body.contains(['e', 'E']) {
        let v: f64 = s.parse().map_err(|_| bad())?;
        let r = v.round();
        if !r.is_finite() || r.abs() >= 9.2e18 {
            return Err(bad());
        }
        return Ok(Some(r as i64));
    }
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if (int_part.is_empty() && frac_part.is_empty())
        || !int_part.bytes().all(|b| b.is_ascii_digit())
        || !frac_part.bytes().all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let mut magnitude: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| bad())?
    };
    if frac_part.as_bytes().first().is_some_and(|&d| d >= b'5') {
        magnitude = magnitude.checked_add(1).ok_or_else(bad)?;
    }
    Ok(Some(if negative { -magnitude } else { magnitude }))
}

/// Substitutes every `{id}` in `template`.
pub fn make_notice_link(notice_id: Option<&str>, template: &str) -> Option<String> {
    notice_id.map(|id| template.replace("{id}", id))
}

pub fn infer_factor_eligibility(distinct_count: usize) -> bool {
    distinct_count < FACTOR_THRESHOLD
}

/// Per-file ingestion summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FileReport {
    pub path: PathBuf,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub ignored_columns: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub files: Vec<FileReport>,
    pub null_counts: BTreeMap<String, usize>,
    pub warning_counts: BTreeMap<String, usize>,
    /// First few warnings, for the human-readable report.
    pub warning_samples: Vec<String>,
    /// Factor fields whose distinct count is not below the factor threshold.
    pub factor_inconsistencies: Vec<String>,
}

const MAX_WARNING_SAMPLES: usize = 20;

impl IngestReport {
    fn warn(&mut self, field: &str, message: String) {
        *self.warning_counts.entry(field.to_string()).or_default() += 1;
        if self.warning_samples.len() < MAX_WARNING_SAMPLES {
            self.warning_samples.push(message);
        }
    }

    pub fn total_warnings(&self) -> usize {
        self.warning_counts.values().sum()
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows read: {}, rows kept: {}", self.rows_read, self.rows_kept)?;
        for file in &self.files {
            write!(
                f,
                "  {}: {} read, {} kept",
                file.path.display(),
                file.rows_read,
                file.rows_kept
            )?;
            if !file.ignored_columns.is_empty() {
                write!(f, " (ignored columns: {})", file.ignored_columns.join(", "))?;
            }
            writeln!(f)?;
        }
        if self.total_warnings() > 0 {
            writeln!(f, "normalization warnings: {}", self.total_warnings())?;
            for (field, n) in &self.warning_counts {
                writeln!(f, "  {field}: {n}")?;
            }
            for w in &self.warning_samples {
                writeln!(f, "  e.g. {w}")?;
            }
        }
        for field in &self.factor_inconsistencies {
            writeln!(f, "note: factor field {field} has {FACTOR_THRESHOLD} or more distinct values")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Normalizer {
    Text,
    Date,
    Country,
    Integer,
}

/// Where a CSV column goes.
#[derive(Debug, Clone, Copy)]
enum Target {
    Field(usize),
    /// `ADDITIONAL_CPV1`..`ADDITIONAL_CPV4`, joined into `ADDITIONAL_CPVS`.
    AdditionalCpv(usize),
}

fn resolve_header(schema: &Schema, name: &str) -> Option<Target> {
    let name = name.trim().trim_start_matches('\u{feff}');
    if let Some(idx) = schema.index_of(name) {
        return Some(Target::Field(idx));
    }
    let n = name.strip_prefix("ADDITIONAL_CPV")?;
    if matches!(n, "1" | "2" | "3" | "4") {
        return schema.index_of(fields::ADDITIONAL_CPVS).map(Target::AdditionalCpv);
    }
    None
}

/// Reads CSV exports in order and builds a column store.
pub fn ingest_csv<P: AsRef<Path>>(
    paths: &[P],
    schema: Arc<Schema>,
) -> Result<(ColumnStore, IngestReport), IngestError> {
    if paths.is_empty() {
        return Err(IngestError::NoInput);
    }
    let normalizers: Vec<Normalizer> = schema
        .fields()
        .iter()
        .map(|f| {
            if DATE_FIELDS.contains(&f.source_name) {
                Normalizer::Date
            } else if COUNTRY_FIELDS.contains(&f.source_name) {
                Normalizer::Country
            } else if f.data_type == DataType::Integer {
                Normalizer::Integer
            } else {
                Normalizer::Text
            }
        })
        .collect();

    let mut builder = StoreBuilder::new(schema.clone());
    let mut report = IngestReport::default();
    for path in paths {
        let file_report = ingest_file(path.as_ref(), &schema, &normalizers, &mut builder, &mut report)?;
        report.rows_read += file_report.rows_read;
        report.rows_kept += file_report.rows_kept;
        report.files.push(file_report);
    }
    let store = builder.finish();

    for (field, col) in schema.fields().iter().zip(store.columns()) {
        report
            .null_counts
            .insert(field.source_name.to_string(), col.nulls().count_ones());
        if field.data_type == DataType::Factor {
            let distinct = crate::store::column_distinct_values(&store, field.source_name)
                .map(|v| v.len())
                .unwrap_or(0);
            if !infer_factor_eligibility(distinct) {
                report.factor_inconsistencies.push(field.source_name.to_string());
            }
        }
    }
    Ok((store, report))
}

fn ingest_file(
    path: &Path,
    schema: &Schema,
    normalizers: &[Normalizer],
    builder: &mut StoreBuilder,
    report: &mut IngestReport,
) -> Result<FileReport, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::with_capacity(1 << 20, file));
    let headers = reader.byte_headers().map_err(csv_err)?.clone();

    let mut targets = Vec::with_capacity(headers.len());
    let mut ignored = Vec::new();
    for h in headers.iter() {
        let name = String::from_utf8_lossy(h);
        let t = resolve_header(schema, &name);
        if t.is_none() {
            ignored.push(name.trim().to_string());
        }
        targets.push(t);
    }
    if targets.iter().all(Option::is_none) {
        return Err(IngestError::NoRecognizedFields {
            path: path.to_path_buf(),
        });
    }

    let mut file_report = FileReport {
        path: path.to_path_buf(),
        ignored_columns: ignored,
        ..FileReport::default()
    };
    let mut record = csv::ByteRecord::new();
    let mut raw: Vec<Option<String>> = vec![None; schema.len()];
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(csv_err(e)),
            Err(e) => {
                file_report.rows_read += 1;
                report.warn("(row)", format!("{}: skipped unparseable row: {e}", path.display()));
                continue;
            }
        }
        file_report.rows_read += 1;
        let line = record.position().map(|p| p.line()).unwrap_or(0);

        raw.iter_mut().for_each(|c| *c = None);
        let mut utf8_ok = true;
        for (cell, target) in record.iter().zip(&targets) {
            let Some(target) = target else { continue };
            let Ok(text) = std::str::from_utf8(cell) else {
                utf8_ok = false;
                break;
            };
            match *target {
                Target::Field(idx) => raw[idx] = Some(text.to_string()),
                Target::AdditionalCpv(idx) => {
                    let text = text.trim();
                    if !text.is_empty() {
                        let slot = raw[idx].get_or_insert_with(String::new);
                        if !slot.is_empty() {
                            slot.push(',');
                        }
                        slot.push_str(text);
                    }
                }
            }
        }
        if !utf8_ok {
            report.warn("(row)", format!("{}:{line}: skipped row with invalid UTF-8", path.display()));
            continue;
        }

        let row: Vec<Option<Value>> = raw
            .iter()
            .zip(normalizers)
            .enumerate()
            .map(|(idx, (cell, norm))| {
                let field = schema.field_at(idx).source_name;
                let cell = cell.as_deref();
                match norm {
                    Normalizer::Text => is_blank(cell).map(|_| Value::Text(cell.unwrap().to_string())),
                    Normalizer::Date => match normalize_date(cell) {
                        Ok(v) => v.map(Value::Text),
                        Err(m) => {
                            report.warn(field, format!("{}:{line}: {field}: {m}", path.display()));
                            None
                        }
                    },
                    Normalizer::Country => match expand_country(cell) {
                        CountryLookup::Unknown(raw) => {
                            report.warn(
                                field,
                                format!("{}:{line}: {field}: unknown country code {raw:?}", path.display()),
                            );
                            Some(Value::Text(raw))
                        }
                        other => other.into_value().map(Value::Text),
                    },
                    Normalizer::Integer => match to_integer_value(cell) {
                        Ok(v) => v.map(Value::Int),
                        Err(m) => {
                            report.warn(field, format!("{}:{line}: {field}: {m}", path.display()));
                            None
                        }
                    },
                }
            })
            .collect();
        builder
            .push_row(row)
            .expect("normalized row matches the schema");
        file_report.rows_kept += 1;
    }
    Ok(file_report)
}
