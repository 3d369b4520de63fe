//! Test-side oracles. Nothing here calls into the engine's evaluation,
//! normalization or aggregation code; only schema metadata is shared.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use opented_core::filter::{Combinator, FilterExpr, Literal};
use opented_core::{DataType, Operator, Schema, Value};
use rand::seq::IndexedRandom;
use rand::Rng;

pub type Row = Vec<Option<Value>>;

/// Admissible operators per type, written out independently of the engine.
pub const TABLE: [(&str, &[&str]); 3] = [
    (
        "String",
        &[
            "equal",
            "not_equal",
            "less",
            "less_or_equal",
            "greater",
            "greater_or_equal",
            "between",
            "in",
            "not_in",
            "begins_with",
            "ends_with",
            "is_null",
            "is_not_null",
        ],
    ),
    ("Factor", &["equal", "not_equal", "is_null", "is_not_null"]),
    (
        "Integer",
        &[
            "equal",
            "not_equal",
            "less",
            "less_or_equal",
            "greater",
            "greater_or_equal",
            "between",
            "in",
            "not_in",
            "is_null",
            "is_not_null",
        ],
    ),
];

pub const ALL_OPS: [&str; 13] = [
    "equal",
    "not_equal",
    "less",
    "less_or_equal",
    "greater",
    "greater_or_equal",
    "between",
    "in",
    "not_in",
    "begins_with",
    "ends_with",
    "is_null",
    "is_not_null",
];

pub fn admissible(type_name: &str, op: &str) -> bool {
    TABLE
        .iter()
        .find(|(t, _)| *t == type_name)
        .is_some_and(|(_, ops)| ops.contains(&op))
}

fn column_of(schema: &Schema, name: &str) -> usize {
    schema
        .fields()
        .iter()
        .position(|f| f.source_name == name || f.display_name == name)
        .unwrap_or_else(|| panic!("oracle: unknown field {name}"))
}

fn cmp_literal(cell: &Value, lit: &Literal) -> Option<std::cmp::Ordering> {
    match (cell, lit) {
        (Value::Int(a), Literal::Int(b)) => Some(a.cmp(b)),
        (Value::Text(a), Literal::Text(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
        _ => None,
    }
}

fn test_condition(cell: &Option<Value>, op: &str, args: &[Literal]) -> bool {
    use std::cmp::Ordering::*;
    match op {
        "is_null" => return cell.is_none(),
        "is_not_null" => return cell.is_some(),
        _ => {}
    }
    let Some(v) = cell else { return false };
    let c = |i: usize| cmp_literal(v, &args[i]).expect("oracle: literal type");
    match op {
        "equal" => c(0) == Equal,
        "not_equal" => c(0) != Equal,
        "less" => c(0) == Less,
        "less_or_equal" => c(0) != Greater,
        "greater" => c(0) == Greater,
        "greater_or_equal" => c(0) != Less,
        "between" => c(0) != Less && c(1) != Greater,
        "in" => (0..args.len()).any(|i| c(i) == Equal),
        "not_in" => (0..args.len()).all(|i| c(i) != Equal),
        "begins_with" | "ends_with" => {
            let (Value::Text(s), Literal::Text(p)) = (v, &args[0]) else {
                panic!("oracle: text op on non-text")
            };
            let (s, p) = (s.as_bytes(), p.as_bytes());
            if p.len() > s.len() {
                false
            } else if op == "begins_with" {
                &s[..p.len()] == p
            } else {
                &s[s.len() - p.len()..] == p
            }
        }
        other => panic!("oracle: operator {other}"),
    }
}

/// Row-at-a-time interpreter.
pub fn naive_match(expr: &FilterExpr, schema: &Schema, row: &Row) -> bool {
    match expr {
        FilterExpr::Group {
            combinator: Combinator::And,
            children,
        } => children.iter().all(|c| naive_match(c, schema, row)),
        FilterExpr::Group {
            combinator: Combinator::Or,
            children,
        } => children.iter().any(|c| naive_match(c, schema, row)),
        FilterExpr::Condition(c) => {
            test_condition(&row[column_of(schema, &c.field)], c.op.as_str(), &c.args)
        }
    }
}

pub fn naive_eval(expr: &FilterExpr, schema: &Schema, rows: &[Row]) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| naive_match(expr, schema, r))
        .map(|(i, _)| i)
        .collect()
}

/// Random filter generation over the values present in `rows`.
pub struct ExprGen<'a> {
    pub schema: &'a Schema,
    pub rows: &'a [Row],
    /// Fields indexed by type name.
    by_type: BTreeMap<&'static str, Vec<usize>>,
    /// (type, op) pairs produced so far.
    pub covered: BTreeSet<(&'static str, &'static str)>,
}

impl<'a> ExprGen<'a> {
    pub fn new(schema: &'a Schema, rows: &'a [Row]) -> Self {
        let mut by_type: BTreeMap<&'static str, Vec<usize>> = BTreeMap::new();
        for (i, f) in schema.fields().iter().enumerate() {
            by_type.entry(f.data_type.as_str()).or_default().push(i);
        }
        ExprGen {
            schema,
            rows,
            by_type,
            covered: BTreeSet::new(),
        }
    }

    fn sample_value<R: Rng>(&self, rng: &mut R, col: usize) -> Option<Value> {
        for _ in 0..8 {
            if let Some(row) = self.rows.choose(rng) {
                if let Some(v) = &row[col] {
                    return Some(v.clone());
                }
            }
        }
        None
    }

    fn literal<R: Rng>(&self, rng: &mut R, col: usize, dt: DataType) -> Literal {
        let sample = self.sample_value(rng, col);
        match dt {
            DataType::Integer => {
                let base = match sample {
                    Some(Value::Int(v)) => v,
                    _ => rng.random_range(-5..5),
                };
                let delta = [0, 0, 0, 1, -1, 1000, -1000][rng.random_range(0..7)];
                Literal::Int(base.saturating_add(delta))
            }
            _ => {
                let base = match sample {
                    Some(Value::Text(s)) => s,
                    _ => String::new(),
                };
                let chars: Vec<char> = base.chars().collect();
                match rng.random_range(0..6) {
                    0..=2 => Literal::Text(base),
                    3 => Literal::Text(chars[..rng.random_range(0..=chars.len())].iter().collect()),
                    4 => Literal::Text(chars[rng.random_range(0..=chars.len())..].iter().collect()),
                    _ => Literal::Text(["", "zz", "B", "Österreich", "Spain", "30"][rng.random_range(0..6)].into()),
                }
            }
        }
    }

    fn args_for<R: Rng>(&self, rng: &mut R, col: usize, dt: DataType, op: &str) -> Vec<Literal> {
        let n = match op {
            "is_null" | "is_not_null" => 0,
            "between" => 2,
            "in" | "not_in" => rng.random_range(1..=4),
            _ => 1,
        };
        (0..n).map(|_| self.literal(rng, col, dt)).collect()
    }

    /// A condition for the given type and operator on a random field of that type.
    pub fn condition_for<R: Rng>(&mut self, rng: &mut R, type_name: &'static str, op: &'static str) -> FilterExpr {
        let col = *self.by_type[type_name].choose(rng).unwrap();
        let f = self.schema.field_at(col);
        let name = if rng.random_bool(0.5) { f.source_name } else { f.display_name };
        let args = self.args_for(rng, col, f.data_type, op);
        self.covered.insert((type_name, op));
        FilterExpr::condition(name, op.parse::<Operator>().unwrap(), args)
    }

    pub fn random_condition<R: Rng>(&mut self, rng: &mut R) -> FilterExpr {
        let (type_name, ops) = TABLE[rng.random_range(0..TABLE.len())];
        let op = ops[rng.random_range(0..ops.len())];
        self.condition_for(rng, type_name, op)
    }

    /// Expression with group depth at most `max_depth`.
    pub fn random_expr<R: Rng>(&mut self, rng: &mut R, max_depth: usize) -> FilterExpr {
        if max_depth == 0 || rng.random_bool(0.3) {
            return self.random_condition(rng);
        }
        let n = rng.random_range(1..=4);
        let children = (0..n).map(|_| self.random_expr(rng, max_depth - 1)).collect();
        if rng.random_bool(0.5) {
            FilterExpr::and(children)
        } else {
            FilterExpr::or(children)
        }
    }
}

pub fn group_depth(e: &FilterExpr) -> usize {
    match e {
        FilterExpr::Condition(_) => 0,
        FilterExpr::Group { children, .. } => 1 + children.iter().map(group_depth).max().unwrap_or(0),
    }
}

/// Days since 0000-03-01 in the proleptic Gregorian calendar.
pub fn day_number(year: i64, month: i64, day: i64) -> i64 {
    let (y, m) = if month <= 2 { (year - 1, month + 9) } else { (year, month - 3) };
    365 * y + y / 4 - y / 100 + y / 400 + (153 * m + 2) / 5 + day - 1
}

pub fn month_lengths(year: i64) -> [i64; 12] {
    let leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    [31, if leap { 29 } else { 28 }, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]
}

pub const MONTH_ABBR: [&str; 12] = [
    "JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC",
];

/// A random valid date in the window a two-digit year can express (1990..=2089).
pub fn random_date<R: Rng>(rng: &mut R) -> (i64, i64, i64) {
    let y = rng.random_range(1990..=2089);
    let m = rng.random_range(1..=12);
    let d = rng.random_range(1..=month_lengths(y)[(m - 1) as usize]);
    (y, m, d)
}

/// `DD-MON-YY`, with random casing of the month and optional zero padding.
pub fn raw_date<R: Rng>(rng: &mut R, (y, m, d): (i64, i64, i64)) -> String {
    let mon: String = MONTH_ABBR[(m - 1) as usize]
        .chars()
        .map(|c| if rng.random_bool(0.3) { c.to_ascii_lowercase() } else { c })
        .collect();
    let day = if d < 10 && rng.random_bool(0.5) { d.to_string() } else { format!("{d:02}") };
    format!("{day}-{mon}-{:02}", y % 100)
}

/// Brute-force Sankey grouping: (authority, contractor) → (value sum, count).
pub fn group_flows(
    schema: &Schema,
    rows: &[Row],
    selection: &[usize],
) -> BTreeMap<(String, String), (i128, usize)> {
    let a = column_of(schema, "CAE_NAME");
    let c = column_of(schema, "WIN_NAME");
    let v = column_of(schema, "VALUE_EURO");
    let name = |cell: &Option<Value>| match cell {
        Some(Value::Text(s)) => s.clone(),
        None => "(unknown)".to_string(),
        Some(Value::Int(_)) => panic!("oracle: name column holds an integer"),
    };
    let mut out: BTreeMap<(String, String), (i128, usize)> = BTreeMap::new();
    for &r in selection {
        let row = &rows[r];
        let e = out.entry((name(&row[a]), name(&row[c]))).or_default();
        if let Some(Value::Int(x)) = &row[v] {
            e.0 += *x as i128;
        }
        e.1 += 1;
    }
    out
}

pub fn distinct_non_null(schema: &Schema, rows: &[Row], selection: &[usize], field: &str) -> usize {
    let col = column_of(schema, field);
    selection
        .iter()
        .filter_map(|&r| rows[r][col].clone())
        .map(|v| format!("{v:?}"))
        .collect::<BTreeSet<_>>()
        .len()
}

pub fn field_value<'r>(schema: &Schema, row: &'r Row, field: &str) -> &'r Option<Value> {
    &row[column_of(schema, field)]
}

/// Stems whose digits after the first `d` are all '0'.
pub fn stem_zeros(stem: &str, d: usize) -> bool {
    stem.chars().skip(d).all(|c| c == '0')
}
