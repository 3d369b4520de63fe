//! "Download selection": the selected rows as RFC 4180 CSV with display-name headers.

use std::io::{self, Write};

use crate::store::{CellRef, ColumnStore};

fn csv_to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Header row of display names.
pub fn write_csv_header<W: Write>(store: &ColumnStore, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(store.schema().fields().iter().map(|f| f.display_name))
        .map_err(csv_to_io)?;
    w.flush()
}

/// Data rows in the given order, without a header. Null cells are empty.
pub fn write_csv_rows<W: Write>(store: &ColumnStore, rows: &[usize], out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut record = csv::StringRecord::new();
    let mut num = String::new();
    for &row in rows {
        record.clear();
        for col in store.columns() {
            match col.get(row) {
                CellRef::Null => record.push_field(""),
                CellRef::Text(s) => record.push_field(s),
                CellRef::Int(v) => {
                    num.clear();
                    use std::fmt::Write as _;
                    let _ = write!(num, "{v}");
                    record.push_field(&num);
                }
            }
        }
        w.write_record(&record).map_err(csv_to_io)?;
    }
    w.flush()
}

pub fn export_csv(store: &ColumnStore, rows: &[usize]) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv_header(store, &mut out).expect("writing to a Vec cannot fail");
    write_csv_rows(store, rows, &mut out).expect("writing to a Vec cannot fail");
    out
}
