//! Engine for exploring European contract award notices: CSV ingestion and
//! normalization, a columnar snapshot format, a typed filter language,
//! Sankey aggregation of authority to contractor flows, CPV vocabulary
//! search and quest generation.

pub mod analytics;
pub mod bitmap;
mod countries;
pub mod cpv;
pub mod error;
pub mod filter;
pub mod ingest;
pub mod quest;
pub mod schema;
pub mod store;
pub mod synth;

pub use error::{CpvError, IngestError, QuestError, SchemaError, StoreError};
pub use schema::{builtin_schema, DataType, FieldDescriptor, Operator, Schema};
pub use store::{CellRef, ColumnStore, StoreBuilder, Value};
