//! Immutable columnar snapshot of ingested notices and its OTED v1 file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "OTED" | version u16 = 1 | row_count u64 | column_count u32
//! directory: per column { name_len u32, name, type u8, payload_offset u64, payload_len u64 }
//! payloads:
//!   Integer: null bitset | n x i64
//!   Factor:  dict_count u32 | dict_count x { len u32, bytes } | null bitset | n x u32
//!   String:  null bitset | (n + 1) x u64 offsets | blob
//! ```
//!
//! Null bitsets hold `ceil(n / 8)` bytes, LSB-first, a set bit meaning null.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use crate::bitmap::Bitmap;
use crate::error::StoreError;
use crate::schema::{builtin_schema, DataType, Schema};

pub const MAGIC: [u8; 4] = *b"OTED";
pub const VERSION: u16 = 1;

/// An owned cell value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_ref(&self) -> CellRef<'_> {
        match self {
            Value::Int(v) => CellRef::Int(*v),
            Value::Text(s) => CellRef::Text(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// A borrowed view of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellRef<'a> {
    Null,
    Int(i64),
    Text(&'a str),
}

impl<'a> CellRef<'a> {
    pub fn is_null(&self) -> bool {
        matches!(self, CellRef::Null)
    }

    pub fn as_text(&self) -> Option<&'a str> {
        match self {
            CellRef::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            CellRef::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn to_value(self) -> Option<Value> {
        match self {
            CellRef::Null => None,
            CellRef::Int(v) => Some(Value::Int(v)),
            CellRef::Text(s) => Some(Value::Text(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnData {
    Integer(Vec<i64>),
    Factor {
        dictionary: Vec<String>,
        indices: Vec<u32>,
    },
    Text {
        offsets: Vec<u64>,
        blob: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    nulls: Bitmap,
    data: ColumnData,
}

impl Column {
    pub fn data_type(&self) -> DataType {
        match self.data {
            ColumnData::Integer(_) => DataType::Integer,
            ColumnData::Factor { .. } => DataType::Factor,
            ColumnData::Text { .. } => DataType::String,
        }
    }

    pub fn len(&self) -> usize {
        self.nulls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nulls.is_empty()
    }

    pub fn nulls(&self) -> &Bitmap {
        &self.nulls
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    #[inline]
    pub fn is_null(&self, row: usize) -> bool {
        self.nulls.get(row)
    }

    pub fn get(&self, row: usize) -> CellRef<'_> {
        if self.nulls.get(row) {
            return CellRef::Null;
        }
        match &self.data {
            ColumnData::Integer(v) => CellRef::Int(v[row]),
            ColumnData::Factor { dictionary, indices } => {
                CellRef::Text(&dictionary[indices[row] as usize])
            }
            ColumnData::Text { offsets, blob } => {
                CellRef::Text(&blob[offsets[row] as usize..offsets[row + 1] as usize])
            }
        }
    }

    /// Text of a String column entry, ignoring the null mask.
    #[inline]
    pub(crate) fn raw_text(&self, row: usize) -> &str {
        match &self.data {
            ColumnData::Text { offsets, blob } => {
                &blob[offsets[row] as usize..offsets[row + 1] as usize]
            }
            ColumnData::Factor { dictionary, indices } => &dictionary[indices[row] as usize],
            ColumnData::Integer(_) => "",
        }
    }
}

/// Immutable table of notices, one column per schema field.
#[derive(Debug, Clone)]
pub struct ColumnStore {
    schema: Arc<Schema>,
    row_count: usize,
    columns: Vec<Column>,
}

impl ColumnStore {
    pub fn empty(schema: Arc<Schema>) -> ColumnStore {
        StoreBuilder::new(schema).finish()
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.schema.index_of(name).map(|i| &self.columns[i])
    }

    pub fn cell(&self, row: usize, col: usize) -> CellRef<'_> {
        self.columns[col].get(row)
    }

    /// Owned copy of one row, in schema order.
    pub fn row(&self, row: usize) -> Vec<Option<Value>> {
        self.columns.iter().map(|c| c.get(row).to_value()).collect()
    }
}

/// Logical equality: same schema fields, same row count, same cells
/// (payload under null entries is ignored).
impl PartialEq for ColumnStore {
    fn eq(&self, other: &Self) -> bool {
        self.row_count == other.row_count
            && self.schema.fields() == other.schema.fields()
            && self.columns.iter().zip(&other.columns).all(|(a, b)| {
                a.data_type() == b.data_type() && (0..self.row_count).all(|r| a.get(r) == b.get(r))
            })
    }
}

enum ColumnBuilder {
    Integer {
        nulls: Bitmap,
        values: Vec<i64>,
    },
    Factor {
        nulls: Bitmap,
        lookup: HashMap<String, u32>,
        dictionary: Vec<String>,
        indices: Vec<u32>,
    },
    Text {
        nulls: Bitmap,
        offsets: Vec<u64>,
        blob: String,
    },
}

impl ColumnBuilder {
    fn new(data_type: DataType) -> ColumnBuilder {
        match data_type {
            DataType::Integer => ColumnBuilder::Integer {
                nulls: Bitmap::default(),
                values: Vec::new(),
            },
            DataType::Factor => ColumnBuilder::Factor {
                nulls: Bitmap::default(),
                lookup: HashMap::new(),
                dictionary: Vec::new(),
                indices: Vec::new(),
            },
            DataType::String => ColumnBuilder::Text {
                nulls: Bitmap::default(),
                offsets: vec![0],
                blob: String::new(),
            },
        }
    }

    fn accepts(&self, value: &Option<Value>) -> bool {
        matches!(
            (self, value),
            (_, None)
                | (ColumnBuilder::Integer { .. }, Some(Value::Int(_)))
                | (ColumnBuilder::Factor { .. }, Some(Value::Text(_)))
                | (ColumnBuilder::Text { .. }, Some(Value::Text(_)))
        )
    }

    fn push(&mut self, value: Option<Value>) {
        match self {
            ColumnBuilder::Integer { nulls, values } => {
                nulls.push(value.is_none());
                values.push(match value {
                    Some(Value::Int(v)) => v,
                    _ => 0,
                });
            }
            ColumnBuilder::Factor {
                nulls,
                lookup,
                dictionary,
                indices,
            } => {
                nulls.push(value.is_none());
                let idx = match value {
                    Some(Value::Text(s)) => match lookup.get(&s) {
                        Some(&i) => i,
                        None => {
                            let i = dictionary.len() as u32;
                            dictionary.push(s.clone());
                            lookup.insert(s, i);
                            i
                        }
                    },
                    _ => 0,
                };
                indices.push(idx);
            }
            ColumnBuilder::Text {
                nulls,
                offsets,
                blob,
            } => {
                nulls.push(value.is_none());
                if let Some(Value::Text(s)) = value {
                    blob.push_str(&s);
                }
                offsets.push(blob.len() as u64);
            }
        }
    }

    fn finish(self) -> Column {
        match self {
            ColumnBuilder::Integer { nulls, values } => Column {
                nulls,
                data: ColumnData::Integer(values),
            },
            ColumnBuilder::Factor {
                nulls,
                dictionary,
                indices,
                ..
            } => {
                // Sorted dictionary, so identical content always encodes identically.
                let mut order: Vec<u32> = (0..dictionary.len() as u32).collect();
                order.sort_by(|&a, &b| dictionary[a as usize].cmp(&dictionary[b as usize]));
                let mut remap = vec![0u32; dictionary.len()];
                for (new, &old) in order.iter().enumerate() {
                    remap[old as usize] = new as u32;
                }
                let mut sorted = dictionary;
                sorted.sort();
                let indices = indices
                    .iter()
                    .enumerate()
                    .map(|(row, &i)| if nulls.get(row) { 0 } else { remap[i as usize] })
                    .collect();
                Column {
                    nulls,
                    data: ColumnData::Factor {
                        dictionary: sorted,
                        indices,
                    },
                }
            }
            ColumnBuilder::Text {
                nulls,
                offsets,
                blob,
            } => Column {
                nulls,
                data: ColumnData::Text { offsets, blob },
            },
        }
    }
}

/// Row-at-a-time builder for a [`ColumnStore`].
pub struct StoreBuilder {
    schema: Arc<Schema>,
    columns: Vec<ColumnBuilder>,
    rows: usize,
}

impl StoreBuilder {
    pub fn new(schema: Arc<Schema>) -> StoreBuilder {
        let columns = schema
            .fields()
            .iter()
            .map(|f| ColumnBuilder::new(f.data_type))
            .collect();
        StoreBuilder {
            schema,
            columns,
            rows: 0,
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn row_count(&self) -> usize {
        self.rows
    }

    /// Appends one row given in schema order. Integer fields take
    /// `Value::Int`, String and Factor fields take `Value::Text`.
    pub fn push_row(&mut self, row: Vec<Option<Value>>) -> Result<(), StoreError> {
        if row.len() != self.columns.len() {
            return Err(StoreError::RowWidth {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        for (idx, (col, value)) in self.columns.iter().zip(&row).enumerate() {
            if !col.accepts(value) {
                let field = self.schema.field_at(idx);
                return Err(StoreError::CellType {
                    field: field.source_name.to_string(),
                    value_kind: match value {
                        Some(Value::Int(_)) => "integer",
                        _ => "text",
                    },
                    data_type: field.data_type,
                });
            }
        }
        for (col, value) in self.columns.iter_mut().zip(row) {
            col.push(value);
        }
        self.rows += 1;
        Ok(())
    }

    pub fn finish(self) -> ColumnStore {
        ColumnStore {
            schema: self.schema,
            row_count: self.rows,
            columns: self.columns.into_iter().map(ColumnBuilder::finish).collect(),
        }
    }
}

/// Sorted distinct values of a Factor column, for choice lists.
pub fn column_distinct_values(store: &ColumnStore, field: &str) -> Result<Vec<String>, StoreError> {
    let idx = store
        .schema
        .index_of(field)
        .ok_or_else(|| StoreError::UnknownField(field.to_string()))?;
    let col = &store.columns[idx];
    match &col.data {
        ColumnData::Factor {
            dictionary,
            indices,
        } => {
            let mut used = vec![false; dictionary.len()];
            for (row, &i) in indices.iter().enumerate() {
                if !col.nulls.get(row) {
                    used[i as usize] = true;
                }
            }
            let mut values: Vec<String> = dictionary
                .iter()
                .zip(used)
                .filter(|(_, u)| *u)
                .map(|(v, _)| v.clone())
                .collect();
            values.sort();
            Ok(values)
        }
        _ => Err(StoreError::WrongType {
            field: store.schema.field_at(idx).source_name.to_string(),
            expected: DataType::Factor,
            actual: col.data_type(),
        }),
    }
}

fn encode_payload(col: &Column, out: &mut Vec<u8>) {
    match &col.data {
        ColumnData::Integer(values) => {
            out.extend_from_slice(&col.nulls.to_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        ColumnData::Factor {
            dictionary,
            indices,
        } => {
            out.extend_from_slice(&(dictionary.len() as u32).to_le_bytes());
            for entry in dictionary {
                out.extend_from_slice(&(entry.len() as u32).to_le_bytes());
                out.extend_from_slice(entry.as_bytes());
            }
            out.extend_from_slice(&col.nulls.to_bytes());
            for i in indices {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
        ColumnData::Text { offsets, blob } => {
            out.extend_from_slice(&col.nulls.to_bytes());
            for o in offsets {
                out.extend_from_slice(&o.to_le_bytes());
            }
            out.extend_from_slice(blob.as_bytes());
        }
    }
}

/// Serializes a store to OTED v1 bytes.
pub fn encode_store(store: &ColumnStore) -> Vec<u8> {
    let fields = store.schema.fields();
    let payloads: Vec<Vec<u8>> = store
        .columns
        .iter()
        .map(|c| {
            let mut buf = Vec::new();
            encode_payload(c, &mut buf);
            buf
        })
        .collect();

    let header_len: usize = 4
        + 2
        + 8
        + 4
        + fields
            .iter()
            .map(|f| 4 + f.source_name.len() + 1 + 8 + 8)
            .sum::<usize>();
    let total = header_len + payloads.iter().map(Vec::len).sum::<usize>();

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(store.row_count as u64).to_le_bytes());
    out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    let mut offset = header_len as u64;
    for (f, payload) in fields.iter().zip(&payloads) {
        out.extend_from_slice(&(f.source_name.len() as u32).to_le_bytes());
        out.extend_from_slice(f.source_name.as_bytes());
        out.push(f.data_type.tag());
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        offset += payload.len() as u64;
    }
    for payload in &payloads {
        out.extend_from_slice(payload);
    }
    debug_assert_eq!(out.len(), total);
    out
}

/// Writes the store to `path` (via a sibling temp file and rename).
pub fn write_store(store: &ColumnStore, path: &Path) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bytes = encode_store(store);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp).map_err(io_err)?;
        file.write_all(&bytes).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
    }
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn read_store(path: &Path) -> Result<ColumnStore, StoreError> {
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_store(&bytes, builtin_schema())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| StoreError::Truncated(format!("{} ends early", self.what)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, StoreError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize, StoreError> {
    usize::try_from(v).map_err(|_| StoreError::Corrupt(format!("{what} {v} out of range")))
}

/// Parses OTED v1 bytes. The column directory must match `schema` exactly.
pub fn decode_store(bytes: &[u8], schema: Arc<Schema>) -> Result<ColumnStore, StoreError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let mut r = Reader::new(bytes, "header");
    r.take(4)?;
    let version = r.u16()?;
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let rows = to_usize(r.u64()?, "row count")?;
    let ncols = r.u32()? as usize;
    if ncols != schema.len() {
        return Err(StoreError::SchemaMismatch(format!(
            "file has {ncols} columns, schema has {}",
            schema.len()
        )));
    }
    r.what = "column directory";
    let mut directory = Vec::with_capacity(ncols);
    for expected in schema.fields() {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| StoreError::Corrupt("column name is not UTF-8".into()))?;
        let tag = r.u8()?;
        let data_type = DataType::from_tag(tag)
            .ok_or_else(|| StoreError::Corrupt(format!("column {name}: unknown type tag {tag}")))?;
        let offset = to_usize(r.u64()?, "payload offset")?;
        let len = to_usize(r.u64()?, "payload length")?;
        if name != expected.source_name || data_type != expected.data_type {
            return Err(StoreError::SchemaMismatch(format!(
                "expected {} ({}), found {name} ({data_type})",
                expected.source_name, expected.data_type
            )));
        }
        directory.push((name.to_string(), data_type, offset, len));
    }

    let mut columns = Vec::with_capacity(ncols);
    for (name, data_type, offset, len) in directory {
        let end = offset
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| StoreError::Truncated(format!("payload of column {name} ends early")))?;
        let col = decode_column(&bytes[offset..end], data_type, rows)
            .map_err(|e| match e {
                StoreError::Truncated(m) => StoreError::Truncated(format!("column {name}: {m}")),
                StoreError::Corrupt(m) => StoreError::Corrupt(format!("column {name}: {m}")),
                other => other,
            })?;
        columns.push(col);
    }
    Ok(ColumnStore {
        schema,
        row_count: rows,
        columns,
    })
}

fn decode_column(payload: &[u8], data_type: DataType, rows: usize) -> Result<Column, StoreError> {
    let bitset_len = rows.div_ceil(8);
    let mut r = Reader::new(payload, "payload");
    let read_nulls = |r: &mut Reader| -> Result<Bitmap, StoreError> {
        Bitmap::from_bytes(r.take(bitset_len)?, rows)
            .ok_or_else(|| StoreError::Corrupt("null bitset has bits past the last row".into()))
    };
    let col = match data_type {
        DataType::Integer => {
            let nulls = read_nulls(&mut r)?;
            let raw = r.take(rows.checked_mul(8).ok_or_else(|| StoreError::Corrupt("row count overflow".into()))?)?;
            let values = raw
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Column {
                nulls,
                data: ColumnData::Integer(values),
            }
        }
        DataType::Factor => {
            let count = r.u32()? as usize;
            let mut dictionary = Vec::with_capacity(count.min(r.remaining()));
            for _ in 0..count {
                let len = r.u32()? as usize;
                let s = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| StoreError::Corrupt("dictionary entry is not UTF-8".into()))?;
                dictionary.push(s.to_string());
            }
            let nulls = read_nulls(&mut r)?;
            let raw = r.take(rows.checked_mul(4).ok_or_else(|| StoreError::Corrupt("row count overflow".into()))?)?;
            let indices: Vec<u32> = raw
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            for (row, &i) in indices.iter().enumerate() {
                if !nulls.get(row) && i as usize >= dictionary.len() {
                    return Err(StoreError::Corrupt(format!(
                        "row {row}: dictionary index {i} out of range"
                    )));
                }
            }
            Column {
                nulls,
                data: ColumnData::Factor {
                    dictionary,
                    indices,
                },
            }
        }
        DataType::String => {
            let nulls = read_nulls(&mut r)?;
            let n = rows
                .checked_add(1)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| StoreError::Corrupt("row count overflow".into()))?;
            let offsets: Vec<u64> = r
                .take(n)?
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let blob_bytes = &payload[r.pos..];
            r.pos = payload.len();
            if offsets[0] != 0 {
                return Err(StoreError::Corrupt("first string offset is not 0".into()));
            }
            if offsets.windows(2).any(|w| w[0] > w[1]) {
                return Err(StoreError::Corrupt("string offsets decrease".into()));
            }
            if *offsets.last().unwrap() != blob_bytes.len() as u64 {
                return Err(StoreError::Truncated(format!(
                    "string blob has {} bytes, offsets expect {}",
                    blob_bytes.len(),
                    offsets.last().unwrap()
                )));
            }
            let blob = String::from_utf8(blob_bytes.to_vec())
                .map_err(|_| StoreError::Corrupt("string blob is not UTF-8".into()))?;
            if offsets.iter().any(|&o| !blob.is_char_boundary(o as usize)) {
                return Err(StoreError::Corrupt("string offset splits a character".into()));
            }
            Column {
                nulls,
                data: ColumnData::Text { offsets, blob },
            }
        }
    };
    if r.remaining() != 0 {
        return Err(StoreError::Corrupt(format!(
            "{} trailing bytes in payload",
            r.remaining()
        )));
    }
    Ok(col)
}
