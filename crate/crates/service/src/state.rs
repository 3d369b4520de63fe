use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use anyhow::{bail, Context};
use opented_core::analytics::DEFAULT_MAX_LINKS;
use opented_core::cpv::{load_cpv, CpvTable};
use opented_core::ingest::DEFAULT_LINK_TEMPLATE;
use opented_core::store::{column_distinct_values, read_store};
use opented_core::{ColumnStore, DataType, Schema};
use serde_json::{json, Value as Json};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const MAX_PAGE_SIZE: usize = 1000;
pub const MAX_FILTER_DEPTH: usize = 10;
pub const MAX_FILTER_CONDITIONS: usize = 200;

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub store_path: PathBuf,
    pub cpv_path: Option<PathBuf>,
    pub host: String,
    pub port: u16,
    pub link_template: String,
    pub default_page_size: usize,
    pub max_links: usize,
    pub static_dir: Option<PathBuf>,
}

impl AppConfig {
    pub fn new(store_path: impl Into<PathBuf>) -> Self {
        AppConfig {
            store_path: store_path.into(),
            cpv_path: None,
            host: "127.0.0.1".into(),
            port: 8080,
            link_template: DEFAULT_LINK_TEMPLATE.into(),
            default_page_size: DEFAULT_PAGE_SIZE,
            max_links: DEFAULT_MAX_LINKS,
            static_dir: None,
        }
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if self.port == 0 {
            bail!("port must be in 1..65535");
        }
        let must_exist = |p: &Path, what: &str| -> anyhow::Result<()> {
            if !p.exists() {
                bail!("{what} {} does not exist", p.display());
            }
            Ok(())
        };
        must_exist(&self.store_path, "store")?;
        if let Some(p) = &self.cpv_path {
            must_exist(p, "CPV file")?;
        }
        if let Some(p) = &self.static_dir {
            must_exist(p, "static directory")?;
        }
        if !(1..=MAX_PAGE_SIZE).contains(&self.default_page_size) {
            bail!("default page size must be in 1..={MAX_PAGE_SIZE}");
        }
        if self.max_links == 0 {
            bail!("max links must be at least 1");
        }
        Ok(())
    }

    pub fn limits(&self) -> Limits {
        Limits {
            link_template: self.link_template.clone(),
            default_page_size: self.default_page_size,
            max_links: self.max_links,
        }
    }

    pub fn load_snapshot(&self) -> anyhow::Result<Snapshot> {
        let store = read_store(&self.store_path)
            .with_context(|| format!("loading store {}", self.store_path.display()))?;
        let cpv = match &self.cpv_path {
            Some(p) => Some(load_cpv(p).with_context(|| format!("loading CPV file {}", p.display()))?),
            None => None,
        };
        Ok(Snapshot::new(store, cpv))
    }
}

#[derive(Debug, Clone)]
pub struct Limits {
    pub link_template: String,
    pub default_page_size: usize,
    pub max_links: usize,
}

impl Default for Limits {
    fn default() -> Self {
        AppConfig::new("").limits()
    }
}

/// Field list with types, admissible operators and, given a store, the
/// choice list of every Factor field.
pub fn schema_document(schema: &Schema, store: Option<&ColumnStore>) -> Json {
    let fields: Vec<Json> = schema
        .fields()
        .iter()
        .map(|f| {
            let mut entry = json!({
                "name": f.source_name,
                "display_name": f.display_name,
                "type": f.data_type.as_str(),
                "highlighted": f.highlighted,
                "operators": f.data_type.operators().iter().map(|o| o.as_str()).collect::<Vec<_>>(),
            });
            if let (DataType::Factor, Some(store)) = (f.data_type, store) {
                entry["values"] = json!(column_distinct_values(store, f.source_name).unwrap_or_default());
            }
            entry
        })
        .collect();
    let operators: serde_json::Map<String, Json> = DataType::ALL
        .iter()
        .map(|t| {
            let ops: Vec<&str> = t.operators().iter().map(|o| o.as_str()).collect();
            (t.as_str().to_string(), json!(ops))
        })
        .collect();
    let mut doc = json!({ "fields": fields, "operators": operators });
    if let Some(store) = store {
        doc["row_count"] = json!(store.row_count());
    }
    doc
}

/// One loaded dataset. Never mutated; replaced wholesale.
#[derive(Debug)]
pub struct Snapshot {
    pub store: ColumnStore,
    pub cpv: Option<CpvTable>,
    pub schema_doc: Json,
}

impl Snapshot {
    pub fn new(store: ColumnStore, cpv: Option<CpvTable>) -> Self {
        let schema_doc = schema_document(store.schema(), Some(&store));
        Snapshot { store, cpv, schema_doc }
    }
}

#[derive(Debug)]
pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
    pub limits: Limits,
}

impl AppState {
    pub fn new(snapshot: Snapshot, limits: Limits) -> Self {
        AppState {
            snapshot: RwLock::new(Arc::new(snapshot)),
            limits,
        }
    }

    /// The current snapshot; a request keeps using it even if it is replaced meanwhile.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, snapshot: Snapshot) {
        let next = Arc::new(snapshot);
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = next;
    }
}
