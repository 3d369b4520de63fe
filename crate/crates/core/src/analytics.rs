//! Sankey aggregation: contracting authorities on one side, contractors on
//! the other, links weighted by the summed contract value (`VALUE_EURO`).

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::ingest::make_notice_link;
use crate::schema::fields;
use crate::store::ColumnStore;

/// Label for rows whose authority or contractor name is null.
pub const UNKNOWN_PARTY: &str = "(unknown)";

pub const DEFAULT_MAX_LINKS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryStats {
    pub n_authorities: usize,
    pub n_contractors: usize,
    pub n_contracts: usize,
    pub total_value_euros: i128,
    /// Rows counted in `n_contracts` whose value is null (they add 0).
    pub rows_with_null_value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SankeyNode {
    pub name: String,
    pub total_value: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SankeyLink {
    /// Index into `authority_nodes`.
    pub authority: usize,
    /// Index into `contractor_nodes`.
    pub contractor: usize,
    pub value: i128,
    pub contract_count: usize,
    pub notice_links: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SankeyGraph {
    pub authority_nodes: Vec<SankeyNode>,
    pub contractor_nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
    /// Always describes the whole selection, truncated or not.
    pub stats: SummaryStats,
    /// Number of distinct (authority, contractor) pairs before truncation.
    pub total_links: usize,
    pub truncated: bool,
}

struct Columns<'a> {
    authority: &'a crate::store::Column,
    contractor: &'a crate::store::Column,
    value: &'a crate::store::Column,
    notice: &'a crate::store::Column,
}

impl<'a> Columns<'a> {
    fn of(store: &'a ColumnStore) -> Self {
        let col = |name| store.column(store.schema().expect_index(name));
        Columns {
            authority: col(fields::CAE_NAME),
            contractor: col(fields::WIN_NAME),
            value: col(fields::VALUE_EURO),
            notice: col(fields::ID_NOTICE_CAN),
        }
    }
}

pub fn summary_stats(store: &ColumnStore, rows: &[usize]) -> SummaryStats {
    let cols = Columns::of(store);
    let mut authorities = HashSet::new();
    let mut contractors = HashSet::new();
    let mut total: i128 = 0;
    let mut null_values = 0;
    for &row in rows {
        if let Some(a) = cols.authority.get(row).as_text() {
            authorities.insert(a);
        }
        if let Some(c) = cols.contractor.get(row).as_text() {
            contractors.insert(c);
        }
        match cols.value.get(row).as_int() {
            Some(v) => total += v as i128,
            None => null_values += 1,
        }
    }
    SummaryStats {
        n_authorities: authorities.len(),
        n_contractors: contractors.len(),
        n_contracts: rows.len(),
        total_value_euros: total,
        rows_with_null_value: null_values,
    }
}

#[derive(Default)]
struct Flow {
    value: i128,
    count: usize,
    rows: Vec<usize>,
}

/// Groups the selection by exact (authority, contractor) names. Links are
/// ordered by value descending, then authority, then contractor; with
/// `max_links` only that many of the top links are kept. Nodes are ordered by
/// total descending, then name.
pub fn build_sankey(
    store: &ColumnStore,
    rows: &[usize],
    max_links: Option<usize>,
    link_template: &str,
) -> SankeyGraph {
    let cols = Columns::of(store);
    let stats = summary_stats(store, rows);

    let mut flows: BTreeMap<(&str, &str), Flow> = BTreeMap::new();
    for &row in rows {
        let a = cols.authority.get(row).as_text().unwrap_or(UNKNOWN_PARTY);
        let c = cols.contractor.get(row).as_text().unwrap_or(UNKNOWN_PARTY);
        let flow = flows.entry((a, c)).or_default();
        flow.value += cols.value.get(row).as_int().unwrap_or(0) as i128;
        flow.count += 1;
        flow.rows.push(row);
    }
    let total_links = flows.len();

    let mut ranked: Vec<((&str, &str), Flow)> = flows.into_iter().collect();
    // BTreeMap order already sorts by (authority, contractor); stable sort keeps it for ties.
    ranked.sort_by_key(|(_, flow)| std::cmp::Reverse(flow.value));
    let truncated = max_links.is_some_and(|m| ranked.len() > m);
    if let Some(m) = max_links {
        ranked.truncate(m);
    }

    let mut auth_totals: BTreeMap<&str, i128> = BTreeMap::new();
    let mut contr_totals: BTreeMap<&str, i128> = BTreeMap::new();
    for ((a, c), flow) in &ranked {
        *auth_totals.entry(a).or_default() += flow.value;
        *contr_totals.entry(c).or_default() += flow.value;
    }
    let order_nodes = |totals: BTreeMap<&str, i128>| -> Vec<SankeyNode> {
        let mut nodes: Vec<SankeyNode> = totals
            .into_iter()
            .map(|(name, total_value)| SankeyNode {
                name: name.to_string(),
                total_value,
            })
            .collect();
        nodes.sort_by(|a, b| b.total_value.cmp(&a.total_value).then_with(|| a.name.cmp(&b.name)));
        nodes
    };
    let authority_nodes = order_nodes(auth_totals);
    let contractor_nodes = order_nodes(contr_totals);
    let position = |nodes: &[SankeyNode]| -> BTreeMap<String, usize> {
        nodes.iter().enumerate().map(|(i, n)| (n.name.clone(), i)).collect()
    };
    let auth_pos = position(&authority_nodes);
    let contr_pos = position(&contractor_nodes);

    let links = ranked
        .into_iter()
        .map(|((a, c), mut flow)| {
            flow.rows.sort_unstable();
            let mut notice_links: Vec<String> = Vec::new();
            let mut seen = HashSet::new();
            for &row in &flow.rows {
                if let Some(id) = cols.notice.get(row).as_text() {
                    if seen.insert(id) {
                        notice_links.extend(make_notice_link(Some(id), link_template));
                    }
                }
            }
            SankeyLink {
                authority: auth_pos[a],
                contractor: contr_pos[c],
                value: flow.value,
                contract_count: flow.count,
                notice_links,
            }
        })
        .collect();

    SankeyGraph {
        authority_nodes,
        contractor_nodes,
        links,
        stats,
        total_links,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::builtin_schema;
    use crate::store::{StoreBuilder, Value};

    type Row<'a> = (Option<&'a str>, Option<&'a str>, Option<i64>, &'a str);

    fn store(rows: &[Row<'_>]) -> ColumnStore {
        let schema = builtin_schema();
        let mut b = StoreBuilder::new(schema.clone());
        for (a, c, v, id) in rows {
            let mut row = vec![None; schema.len()];
            row[schema.expect_index("CAE_NAME")] = a.map(Value::from);
            row[schema.expect_index("WIN_NAME")] = c.map(Value::from);
            row[schema.expect_index("VALUE_EURO")] = v.map(Value::Int);
            row[schema.expect_index("ID_NOTICE_CAN")] = Some(Value::from(*id));
            b.push_row(row).unwrap();
        }
        b.finish()
    }

    #[test]
    fn single_row() {
        let s = store(&[(Some("A"), Some("B"), Some(100), "n1")]);
        let g = build_sankey(&s, &[0], None, "u/{id}");
        assert_eq!(g.links.len(), 1);
        assert_eq!(g.links[0].value, 100);
        assert_eq!(g.links[0].notice_links, vec!["u/n1"]);
        assert_eq!(
            (g.stats.n_authorities, g.stats.n_contractors, g.stats.n_contracts, g.stats.total_value_euros),
            (1, 1, 1, 100)
        );
    }

    #[test]
    fn same_pair_aggregates() {
        let s = store(&[
            (Some("A"), Some("B"), Some(100), "n1"),
            (Some("A"), Some("B"), Some(200), "n1"),
        ]);
        let g = build_sankey(&s, &[0, 1], None, "{id}");
        assert_eq!(g.links.len(), 1);
        assert_eq!(g.links[0].value, 300);
        assert_eq!(g.links[0].contract_count, 2);
        assert_eq!(g.links[0].notice_links, vec!["n1"]);
    }

    #[test]
    fn nulls_and_unknown_bucket() {
        let s = store(&[
            (None, Some("B"), Some(10), "n1"),
            (Some("A"), None, None, "n2"),
            (None, Some("B"), Some(5), "n3"),
        ]);
        let g = build_sankey(&s, &[0, 1, 2], None, "{id}");
        assert_eq!(g.stats.n_authorities, 1);
        assert_eq!(g.stats.n_contractors, 1);
        assert_eq!(g.stats.n_contracts, 3);
        assert_eq!(g.stats.rows_with_null_value, 1);
        let first = &g.links[0];
        assert_eq!(g.authority_nodes[first.authority].name, UNKNOWN_PARTY);
        assert_eq!(first.value, 15);
        let second = &g.links[1];
        assert_eq!(g.contractor_nodes[second.contractor].name, UNKNOWN_PARTY);
        assert_eq!((second.value, second.contract_count), (0, 1));
    }

    #[test]
    fn truncation_keeps_top_links_and_full_stats() {
        let s = store(&[
            (Some("A"), Some("X"), Some(5), "1"),
            (Some("B"), Some("X"), Some(5), "2"),
            (Some("C"), Some("Y"), Some(9), "3"),
            (Some("D"), Some("Z"), Some(1), "4"),
        ]);
        let g = build_sankey(&s, &[0, 1, 2, 3], Some(2), "{id}");
        assert!(g.truncated);
        assert_eq!(g.total_links, 4);
        let names: Vec<_> = g
            .links
            .iter()
            .map(|l| g.authority_nodes[l.authority].name.as_str())
            .collect();
        assert_eq!(names, vec!["C", "A"]);
        assert_eq!(g.stats.n_contracts, 4);
        assert_eq!(g.stats.total_value_euros, 20);
        for (i, node) in g.contractor_nodes.iter().enumerate() {
            let incident: i128 = g.links.iter().filter(|l| l.contractor == i).map(|l| l.value).sum();
            assert_eq!(node.total_value, incident);
        }
    }

    #[test]
    fn empty_selection() {
        let s = store(&[]);
        assert_eq!(
            summary_stats(&s, &[]),
            SummaryStats {
                n_authorities: 0,
                n_contractors: 0,
                n_contracts: 0,
                total_value_euros: 0,
                rows_with_null_value: 0
            }
        );
        let g = build_sankey(&s, &[], Some(DEFAULT_MAX_LINKS), "{id}");
        assert!(g.links.is_empty() && !g.truncated);
    }

    #[test]
    fn two_rows_one_authority() {
        let s = store(&[
            (Some("A"), Some("X"), Some(3), "1"),
            (Some("A"), Some("Y"), Some(4), "2"),
        ]);
        let st = summary_stats(&s, &[0, 1]);
        assert_eq!((st.n_authorities, st.n_contractors, st.n_contracts, st.total_value_euros), (1, 2, 2, 7));
    }
}
