use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::Value as Json;
use thiserror::Error;

use crate::ingest::make_notice_link;
use crate::schema::fields;
use crate::store::{CellRef, Column, ColumnStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    #[serde(alias = "asc")]
    Ascending,
    #[serde(alias = "desc")]
    Descending,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct SortSpec {
    pub field: String,
    pub direction: SortDirection,
}

impl SortSpec {
    pub fn new(field: impl Into<String>, direction: SortDirection) -> Self {
        SortSpec {
            field: field.into(),
            direction,
        }
    }
}

/// `FIELD`, `FIELD:asc` or `FIELD:desc`.
impl FromStr for SortSpec {
    type Err = PageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (field, dir) = match s.rsplit_once(':') {
            Some((f, d)) => (f, d),
            None => (s, "asc"),
        };
        let direction = match dir.to_ascii_lowercase().as_str() {
            "asc" | "ascending" => SortDirection::Ascending,
            "desc" | "descending" => SortDirection::Descending,
            _ => return Err(PageError::BadSortSpec(s.to_string())),
        };
        Ok(SortSpec::new(field, direction))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PageError {
    #[error("unknown sort field {0:?}")]
    UnknownSortField(String),
    #[error("bad sort spec {0:?}, expected FIELD:asc or FIELD:desc")]
    BadSortSpec(String),
    #[error("limit must be ≥ 1")]
    ZeroLimit,
}

/// One result row: display name → cell, in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplayRow(pub Vec<(&'static str, Json)>);

impl DisplayRow {
    pub fn get(&self, display_name: &str) -> Option<&Json> {
        self.0.iter().find(|(k, _)| *k == display_name).map(|(_, v)| v)
    }
}

impl Serialize for DisplayRow {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultPage {
    pub total_matches: usize,
    pub offset: usize,
    pub rows: Vec<DisplayRow>,
}

impl fmt::Display for ResultPage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", serde_json::to_string(self).map_err(|_| fmt::Error)?)
    }
}

fn cmp_cells(a: CellRef<'_>, b: CellRef<'_>) -> Ordering {
    match (a, b) {
        (CellRef::Int(x), CellRef::Int(y)) => x.cmp(&y),
        (CellRef::Text(x), CellRef::Text(y)) => x.cmp(y),
        _ => Ordering::Equal,
    }
}

fn row_order(col: &Column, direction: SortDirection, a: usize, b: usize) -> Ordering {
    let (ca, cb) = (col.get(a), col.get(b));
    let key = match (ca.is_null(), cb.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => match direction {
            SortDirection::Ascending => cmp_cells(ca, cb),
            SortDirection::Descending => cmp_cells(cb, ca),
        },
    };
    key.then(a.cmp(&b))
}

/// Orders `rows` by the sort spec (nulls last either way, row id breaking ties).
/// Only the first `keep` positions are guaranteed sorted.
fn order_rows(
    store: &ColumnStore,
    rows: &mut [usize],
    sort: &SortSpec,
    keep: usize,
) -> Result<(), PageError> {
    let idx = store
        .schema()
        .index_of(&sort.field)
        .ok_or_else(|| PageError::UnknownSortField(sort.field.clone()))?;
    let col = store.column(idx);
    let cmp = |a: &usize, b: &usize| row_order(col, sort.direction, *a, *b);
    if keep > 0 && keep < rows.len() {
        rows.select_nth_unstable_by(keep - 1, cmp);
        rows[..keep].sort_unstable_by(cmp);
    } else {
        rows.sort_unstable_by(cmp);
    }
    Ok(())
}

/// Fully sorted copy of `rows`; without a spec the order is unchanged.
pub fn sorted_rows(
    store: &ColumnStore,
    rows: &[usize],
    sort: Option<&SortSpec>,
) -> Result<Vec<usize>, PageError> {
    let mut out = rows.to_vec();
    if let Some(spec) = sort {
        order_rows(store, &mut out, spec, 0)?;
    }
    Ok(out)
}

/// Renders one row with display names; the notice id becomes a hyperlink.
pub fn display_row(store: &ColumnStore, row: usize, link_template: &str) -> DisplayRow {
    let schema = store.schema();
    DisplayRow(
        schema
            .fields()
            .iter()
            .zip(store.columns())
            .map(|(f, col)| {
                let cell = col.get(row);
                let value = if f.source_name == fields::ID_NOTICE_CAN {
                    make_notice_link(cell.as_text(), link_template)
                        .map(Json::String)
                        .unwrap_or(Json::Null)
                } else {
                    match cell {
                        CellRef::Null => Json::Null,
                        CellRef::Int(v) => Json::from(v),
                        CellRef::Text(s) => Json::String(s.to_string()),
                    }
                };
                (f.display_name, value)
            })
            .collect(),
    )
}

pub fn select_page(
    store: &ColumnStore,
    rows: &[usize],
    sort: Option<&SortSpec>,
    offset: usize,
    limit: usize,
    link_template: &str,
) -> Result<ResultPage, PageError> {
    if limit == 0 {
        return Err(PageError::ZeroLimit);
    }
    let total = rows.len();
    let end = offset.saturating_add(limit).min(total);
    let mut ids = rows.to_vec();
    if let Some(spec) = sort {
        order_rows(store, &mut ids, spec, end)?;
    }
    let page = if offset < end { &ids[offset..end] } else { &[][..] };
    Ok(ResultPage {
        total_matches: total,
        offset,
        rows: page
            .iter()
            .map(|&r| display_row(store, r, link_template))
            .collect(),
    })
}
