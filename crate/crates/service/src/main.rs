use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use opented_core::analytics::DEFAULT_MAX_LINKS;
use opented_core::cpv::load_cpv;
use opented_core::filter::{evaluate, parse_filter, select_page, sorted_rows, validate, SortSpec};
use opented_core::filter::{write_csv_header, write_csv_rows};
use opented_core::ingest::{ingest_csv, DEFAULT_LINK_TEMPLATE};
use opented_core::store::{read_store, write_store};
use opented_core::builtin_schema;
use opented_service::state::DEFAULT_PAGE_SIZE;
use opented_service::{router, schema_document, AppConfig, AppState};

#[derive(Parser)]
#[command(name = "opented", version, about = "Explore EU contract award notices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize CSV exports into a store file.
    Ingest {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run a filter against a store and print the match count and first rows.
    Query {
        #[arg(long)]
        store: PathBuf,
        /// JSON filter file, or `-` for stdin. Without it every row matches.
        #[arg(long)]
        filter: Option<PathBuf>,
        /// `FIELD:asc` or `FIELD:desc`.
        #[arg(long)]
        sort: Option<SortSpec>,
        #[arg(long, default_value_t = 10)]
        limit: usize,
        #[arg(long, default_value_t = 0)]
        offset: usize,
        /// Write the whole selection here as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value = DEFAULT_LINK_TEMPLATE)]
        link_template: String,
    },
    /// Search the CPV vocabulary.
    Cpv {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value = "")]
        search: String,
        #[arg(long)]
        digits: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        cpv: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value = DEFAULT_LINK_TEMPLATE)]
        link_template: String,
        /// Directory of built web client files served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PAGE_SIZE)]
        page_size: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_LINKS)]
        max_links: usize,
    },
    /// Print the built-in schema as JSON.
    Schema,
}

fn read_filter_text(path: &Path) -> anyhow::Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

#[allow(clippy::too_many_arguments)]
fn run_query(
    store_path: &Path,
    filter: Option<&Path>,
    sort: Option<&SortSpec>,
    limit: usize,
    offset: usize,
    csv: Option<&Path>,
    link_template: &str,
) -> anyhow::Result<()> {
    let store = read_store(store_path).with_context(|| format!("loading {}", store_path.display()))?;
    let rows = match filter {
        None => (0..store.row_count()).collect(),
        Some(path) => {
            let expr = parse_filter(&read_filter_text(path)?)?;
            let errors = validate(&expr, store.schema());
            if !errors.is_empty() {
                let lines: Vec<String> = errors.iter().map(|e| format!("  {e}")).collect();
                bail!("invalid filter:\n{}", lines.join("\n"));
            }
            evaluate(&expr, &store).map_err(|e| anyhow!("{e:?}"))?
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", rows.len())?;
    if limit > 0 {
        let page = select_page(&store, &rows, sort, offset, limit, link_template)?;
        for row in &page.rows {
            writeln!(out, "{}", serde_json::to_string(row)?)?;
        }
    }
    if let Some(path) = csv {
        let ordered = sorted_rows(&store, &rows, sort)?;
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = std::io::BufWriter::new(file);
        write_csv_header(&store, &mut w)?;
        write_csv_rows(&store, &ordered, &mut w)?;
        w.flush()?;
        eprintln!("wrote {} rows to {}", ordered.len(), path.display());
    }
    Ok(())
}

async fn serve(config: AppConfig) -> anyhow::Result<()> {
    config.check()?;
    let snapshot = config.load_snapshot()?;
    tracing::info!(rows = snapshot.store.row_count(), "store loaded");
    let state = Arc::new(AppState::new(snapshot, config.limits()));
    let app = router(state.clone(), config.static_dir.as_deref());

    #[cfg(unix)]
    {
        let (state, config) = (state.clone(), config.clone());
        tokio::spawn(async move {
            use tokio::signal::unix::{signal, SignalKind};
            let Ok(mut hup) = signal(SignalKind::hangup()) else { return };
            while hup.recv().await.is_some() {
                let cfg = config.clone();
                match tokio::task::spawn_blocking(move || cfg.load_snapshot()).await {
                    Ok(Ok(snap)) => {
                        tracing::info!(rows = snap.store.row_count(), "store reloaded");
                        state.replace(snap);
                    }
                    Ok(Err(e)) => tracing::error!("reload failed, keeping current store: {e:#}"),
                    Err(e) => tracing::error!("reload task failed: {e}"),
                }
            }
        });
    }

    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Ingest { input, output } => {
            let (store, report) = ingest_csv(&input, builtin_schema())?;
            eprint!("{report}");
            write_store(&store, &output)?;
            println!("{} rows written to {}", store.row_count(), output.display());
        }
        Command::Query {
            store,
            filter,
            sort,
            limit,
            offset,
            csv,
            link_template,
        } => run_query(
            &store,
            filter.as_deref(),
            sort.as_ref(),
            limit,
            offset,
            csv.as_deref(),
            &link_template,
        )?,
        Command::Cpv { file, search, digits } => {
            let table = load_cpv(&file)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for e in table.search(&search, digits)? {
                writeln!(out, "{}\t{}", e.code, e.description)?;
            }
        }
        Command::Serve {
            store,
            cpv,
            port,
            host,
            link_template,
            static_dir,
            page_size,
            max_links,
        } => {
            let config = AppConfig {
                store_path: store,
                cpv_path: cpv,
                host,
                port,
                link_template,
                default_page_size: page_size,
                max_links,
                static_dir,
            };
            tokio::runtime::Runtime::new()?.block_on(serve(config))?;
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&schema_document(&builtin_schema(), None))?);
        }
    }
    Ok(())
}
