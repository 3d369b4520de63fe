//! The filter language: parse, validate and evaluate nested and/or
//! expressions over a [`ColumnStore`](crate::store::ColumnStore), then sort,
//! page and export the matches.

mod ast;
mod eval;
mod export;
mod page;
mod validate;

pub use ast::{parse_filter, parse_filter_json, Combinator, Condition, FilterExpr, Literal, ParseError};
pub use eval::{evaluate, evaluate_bitmap};
pub use export::{export_csv, write_csv_header, write_csv_rows};
pub use page::{
    display_row, select_page, sorted_rows, DisplayRow, PageError, ResultPage, SortDirection, SortSpec,
};
pub use validate::{validate, ValidationError};
