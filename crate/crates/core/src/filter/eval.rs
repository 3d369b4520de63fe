//! Columnar evaluation: each condition scans one column into a bitmap, and
//! groups combine the bitmaps.

use std::cmp::Ordering;

use super::ast::FilterExpr;
use super::validate::{compile, Operands, Plan, ValidationError};
use crate::bitmap::Bitmap;
use crate::schema::Operator;
use crate::store::{Column, ColumnData, ColumnStore};

/// Row ids matching `expr`, ascending. Fails only when `expr` does not validate.
pub fn evaluate(expr: &FilterExpr, store: &ColumnStore) -> Result<Vec<usize>, Vec<ValidationError>> {
    Ok(evaluate_bitmap(expr, store)?.iter_ones().collect())
}

pub fn evaluate_bitmap(expr: &FilterExpr, store: &ColumnStore) -> Result<Bitmap, Vec<ValidationError>> {
    let plan = compile(expr, store.schema())?;
    Ok(run(&plan, store))
}

fn run(plan: &Plan, store: &ColumnStore) -> Bitmap {
    let n = store.row_count();
    match plan {
        Plan::And(children) => {
            let mut acc = Bitmap::full(n);
            for child in children {
                if !acc.any() {
                    break;
                }
                acc.and_with(&run(child, store));
            }
            acc
        }
        Plan::Or(children) => {
            let mut acc = Bitmap::new(n);
            for child in children {
                acc.or_with(&run(child, store));
            }
            acc
        }
        Plan::Cond {
            column,
            op,
            operands,
        } => scan(store.column(*column), *op, operands),
    }
}

fn scan(col: &Column, op: Operator, operands: &Operands) -> Bitmap {
    let n = col.len();
    match op {
        Operator::IsNull => return col.nulls().clone(),
        Operator::IsNotNull => {
            let mut b = Bitmap::full(n);
            b.and_not_with(col.nulls());
            return b;
        }
        _ => {}
    }
    let mut hits = match (col.data(), operands) {
        (ColumnData::Integer(values), Operands::Int(args)) => {
            let pred = IntPredicate::new(op, args);
            values.iter().map(|&v| pred.test(v)).collect()
        }
        (ColumnData::Factor { dictionary, indices }, Operands::Text(args)) => {
            let pred = TextPredicate::new(op, args);
            let per_entry: Vec<bool> = dictionary.iter().map(|d| pred.test(d)).collect();
            if per_entry.iter().any(|&b| b) {
                indices
                    .iter()
                    .enumerate()
                    .map(|(row, &i)| !col.is_null(row) && per_entry[i as usize])
                    .collect()
            } else {
                Bitmap::new(n)
            }
        }
        (ColumnData::Text { .. }, Operands::Text(args)) => {
            let pred = TextPredicate::new(op, args);
            (0..n).map(|row| pred.test(col.raw_text(row))).collect()
        }
        // compile() guarantees operands match the column type
        _ => Bitmap::new(n),
    };
    hits.and_not_with(col.nulls());
    hits
}

struct IntPredicate {
    op: Operator,
    a: i64,
    b: i64,
    set: Vec<i64>,
}

impl IntPredicate {
    fn new(op: Operator, args: &[i64]) -> Self {
        let mut set = args.to_vec();
        set.sort_unstable();
        set.dedup();
        IntPredicate {
            op,
            a: args.first().copied().unwrap_or(0),
            b: args.get(1).copied().unwrap_or(0),
            set,
        }
    }

    #[inline]
    fn test(&self, v: i64) -> bool {
        match self.op {
            Operator::Equal => v == self.a,
            Operator::NotEqual => v != self.a,
            Operator::Less => v < self.a,
            Operator::LessOrEqual => v <= self.a,
            Operator::Greater => v > self.a,
            Operator::GreaterOrEqual => v >= self.a,
            Operator::Between => self.a <= v && v <= self.b,
            Operator::In => self.set.binary_search(&v).is_ok(),
            Operator::NotIn => self.set.binary_search(&v).is_err(),
            _ => false,
        }
    }
}

struct TextPredicate<'a> {
    op: Operator,
    a: &'a str,
    b: &'a str,
    set: Vec<&'a str>,
}

impl<'a> TextPredicate<'a> {
    fn new(op: Operator, args: &'a [String]) -> Self {
        let mut set: Vec<&str> = args.iter().map(String::as_str).collect();
        set.sort_unstable();
        set.dedup();
        TextPredicate {
            op,
            a: args.first().map(String::as_str).unwrap_or(""),
            b: args.get(1).map(String::as_str).unwrap_or(""),
            set,
        }
    }

    #[inline]
    fn test(&self, v: &str) -> bool {
        // str ordering is byte-wise on UTF-8
        match self.op {
            Operator::Equal => v == self.a,
            Operator::NotEqual => v != self.a,
            Operator::Less => v.cmp(self.a) == Ordering::Less,
            Operator::LessOrEqual => v <= self.a,
            Operator::Greater => v > self.a,
            Operator::GreaterOrEqual => v >= self.a,
            Operator::Between => self.a <= v && v <= self.b,
            Operator::In => self.set.binary_search(&v).is_ok(),
            Operator::NotIn => self.set.binary_search(&v).is_err(),
            Operator::BeginsWith => v.starts_with(self.a),
            Operator::EndsWith => v.ends_with(self.a),
            Operator::IsNull | Operator::IsNotNull => false,
        }
    }
}
