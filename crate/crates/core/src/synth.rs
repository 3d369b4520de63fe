//! Deterministic synthetic notices for tests, benchmarks and demos.
//!
//! Values come from small vocabularies so that equality filters, groupings
//! and quests find matches; text includes commas, quotes and non-ASCII
//! characters.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::schema::{fields, DataType, Schema};
use crate::store::{ColumnStore, StoreBuilder, Value};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub rows: usize,
    /// Probability that any given cell is null, in `0.0..=1.0`.
    pub null_density: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            rows: 1000,
            null_density: 0.1,
            seed: 0,
        }
    }
}

pub const COUNTRIES: [&str; 8] = [
    "Belgium",
    "France",
    "Germany",
    "Poland",
    "Sweden",
    "United Kingdom",
    "Česko",
    "Österreich",
];

/// Division-level CPV stems used for generated codes.
pub const DIVISIONS: [&str; 8] = ["03", "30", "33", "45", "48", "66", "72", "90"];

const NAME_PARTS: [&str; 10] = [
    "Ville de", "Stad", "Gmina", "Landkreis", "Région", "NHS", "Kommun", "Łódź", "Siemens", "Acme, Ltd",
];

const FACTOR_VALUES: [&str; 5] = ["Y", "N", "1", "2", "\"quoted\""];

fn date(rng: &mut ChaCha8Rng) -> String {
    let year = rng.random_range(2006..=2015);
    let month = rng.random_range(1..=12);
    let day = rng.random_range(1..=28);
    format!("{year:04}-{month:02}-{day:02}")
}

fn cpv_code(rng: &mut ChaCha8Rng) -> String {
    let div = DIVISIONS[rng.random_range(0..DIVISIONS.len())];
    let rest: String = (0..6)
        .map(|i| {
            // shallower codes are more common
            if rng.random_bool(0.4 + 0.1 * i as f64) {
                '0'
            } else {
                char::from(b'0' + rng.random_range(0..10u8))
            }
        })
        .collect();
    format!("{div}{rest}")
}

fn party(rng: &mut ChaCha8Rng, pool: usize) -> String {
    let part = NAME_PARTS[rng.random_range(0..NAME_PARTS.len())];
    format!("{part} {}", rng.random_range(0..pool))
}

fn cell(field: &str, data_type: DataType, rng: &mut ChaCha8Rng) -> Value {
    match field {
        fields::ISO_COUNTRY_CODE | fields::WIN_COUNTRY_CODE => {
            Value::Text(COUNTRIES[rng.random_range(0..COUNTRIES.len())].to_string())
        }
        fields::DT_DISPATCH | fields::DT_AWARD => Value::Text(date(rng)),
        fields::CPV => Value::Text(cpv_code(rng)),
        fields::CAE_NAME => Value::Text(party(rng, 12)),
        fields::WIN_NAME => Value::Text(party(rng, 20)),
        fields::YEAR => Value::Int(rng.random_range(2006..=2015)),
        fields::ID_NOTICE_CAN => Value::Text(format!("{}{:06}", rng.random_range(2006..=2015), rng.random_range(0..1_000_000))),
        fields::VALUE_EURO => Value::Int(rng.random_range(0..5_000_000)),
        _ => match data_type {
            DataType::Integer => Value::Int(match rng.random_range(0..4) {
                0 => rng.random_range(-3..=3),
                1 => rng.random_range(0..100),
                _ => rng.random_range(0..2_000_000),
            }),
            DataType::Factor => Value::Text(FACTOR_VALUES[rng.random_range(0..FACTOR_VALUES.len())].to_string()),
            DataType::String => {
                let len = rng.random_range(0..4);
                let s: String = (0..len)
                    .map(|_| ['a', 'b', 'B', 'z', 'é', ',', '"', ' ', 'ß', '0'][rng.random_range(0..10)])
                    .collect();
                Value::Text(s)
            }
        },
    }
}

/// Rows in schema order.
pub fn synthetic_rows(schema: &Schema, cfg: &SynthConfig) -> Vec<Vec<Option<Value>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let density = cfg.null_density.clamp(0.0, 1.0);
    (0..cfg.rows)
        .map(|_| {
            schema
                .fields()
                .iter()
                .map(|f| {
                    if rng.random_bool(density) {
                        None
                    } else {
                        Some(cell(f.source_name, f.data_type, &mut rng))
                    }
                })
                .collect()
        })
        .collect()
}

pub fn store_from_rows(schema: Arc<Schema>, rows: &[Vec<Option<Value>>]) -> ColumnStore {
    let mut b = StoreBuilder::new(schema);
    for row in rows {
        b.push_row(row.clone()).expect("synthetic rows match the schema");
    }
    b.finish()
}

pub fn synthetic_store(schema: Arc<Schema>, cfg: &SynthConfig) -> ColumnStore {
    let rows = synthetic_rows(&schema, cfg);
    store_from_rows(schema, &rows)
}
