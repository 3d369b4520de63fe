//! Lottery-style quests: "who are the suppliers of <division> in <country> in
//! <year>?", with the filter that answers them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cpv::CpvTable;
use crate::error::QuestError;
use crate::filter::{FilterExpr, Literal};
use crate::schema::{fields, Operator};
use crate::store::ColumnStore;

pub const DEFAULT_MIN_SUPPORT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quest {
    pub cpv_division: String,
    pub division_label: String,
    pub country: String,
    pub year: i32,
    pub title: String,
    /// Rows matching the quest's solution filter.
    pub support: usize,
}

fn year_bounds(year: i32) -> (String, String) {
    (format!("{year:04}-01-01"), format!("{year:04}-12-31"))
}

/// Year of an ISO date string that lies within that year's bounds.
fn dispatch_year(date: &str) -> Option<i32> {
    let head = date.get(..4)?;
    if !head.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year: i32 = head.parse().ok()?;
    let (lo, hi) = year_bounds(year);
    (lo.as_str() <= date && date <= hi.as_str()).then_some(year)
}

/// Every (division, country, year) triple with its row count.
pub fn quest_candidates(store: &ColumnStore) -> BTreeMap<(String, String, i32), usize> {
    let schema = store.schema();
    let country = store.column(schema.expect_index(fields::ISO_COUNTRY_CODE));
    let cpv = store.column(schema.expect_index(fields::CPV));
    let date = store.column(schema.expect_index(fields::DT_DISPATCH));
    let mut counts: BTreeMap<(&str, &str, i32), usize> = BTreeMap::new();
    for row in 0..store.row_count() {
        let (Some(c), Some(code), Some(d)) = (
            country.get(row).as_text(),
            cpv.get(row).as_text(),
            date.get(row).as_text(),
        ) else {
            continue;
        };
        let Some(division) = code.get(..2).filter(|p| p.bytes().all(|b| b.is_ascii_digit())) else {
            continue;
        };
        let Some(year) = dispatch_year(d) else { continue };
        *counts.entry((division, c, year)).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|((d, c, y), n)| ((d.to_string(), c.to_string(), y), n))
        .collect()
}

/// Picks uniformly (for a given seed) among triples with at least
/// `min_support` rows whose division has a CPV wording.
pub fn generate_quest(
    store: &ColumnStore,
    cpv: &CpvTable,
    seed: u64,
    min_support: usize,
) -> Result<Quest, QuestError> {
    if store.row_count() == 0 {
        return Err(QuestError::EmptyStore);
    }
    let eligible: Vec<(String, String, i32, usize, String)> = quest_candidates(store)
        .into_iter()
        .filter(|(_, n)| *n >= min_support)
        .filter_map(|((d, c, y), n)| {
            let label = cpv.lookup(&d)?.description.clone();
            Some((d, c, y, n, label))
        })
        .collect();
    if eligible.is_empty() {
        return Err(QuestError::NoQuestAvailable { min_support });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (division, country, year, support, label) = eligible[rng.random_range(0..eligible.len())].clone();
    Ok(Quest {
        title: format!("{label} in {country} in {year}"),
        cpv_division: division,
        division_label: label,
        country,
        year,
        support,
    })
}

/// The prefilled filter that answers a quest.
pub fn solution_filter(q: &Quest) -> FilterExpr {
    let (lo, hi) = year_bounds(q.year);
    FilterExpr::and(vec![
        FilterExpr::condition(
            "Contracting_Authority_Country",
            Operator::Equal,
            vec![Literal::Text(q.country.clone())],
        ),
        FilterExpr::condition(
            "CPV_Code",
            Operator::BeginsWith,
            vec![Literal::Text(q.cpv_division.clone())],
        ),
        FilterExpr::condition(
            "Dispatch_Date",
            Operator::Between,
            vec![Literal::Text(lo), Literal::Text(hi)],
        ),
    ])
}
