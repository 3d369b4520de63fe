use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json as JsonBody, Router};
use futures::stream::{self, StreamExt};
use opented_core::analytics::build_sankey;
use opented_core::filter::{
    evaluate, parse_filter_json, select_page, sorted_rows, validate, write_csv_header, write_csv_rows, FilterExpr,
    PageError, ResultPage, SortSpec,
};
use opented_core::quest::{generate_quest, solution_filter, DEFAULT_MIN_SUPPORT};
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use crate::error::ApiError;
use crate::state::{AppState, Snapshot, MAX_FILTER_CONDITIONS, MAX_FILTER_DEPTH, MAX_PAGE_SIZE};

type Shared = State<Arc<AppState>>;

const EXPORT_CHUNK_ROWS: usize = 2048;

pub fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/schema", get(schema))
        .route("/query", post(query))
        .route("/export", post(export))
        .route("/sankey", post(sankey))
        .route("/cpv", get(cpv))
        .route("/quest", get(quest))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
}

async fn schema(State(state): Shared) -> JsonBody<Json> {
    JsonBody(state.snapshot().schema_doc.clone())
}

fn body_object(bytes: &[u8]) -> Result<Map<String, Json>, ApiError> {
    let value: Json = serde_json::from_slice(bytes).map_err(|e| {
        // serde_json stops at 128 levels of nesting
        if e.to_string().contains("recursion limit") {
            ApiError::too_large(format!("filter nesting exceeds {MAX_FILTER_DEPTH} levels"))
        } else {
            ApiError::bad_request("syntax_error", format!("request body is not valid JSON: {e}"))
        }
    })?;
    match value {
        Json::Object(map) => Ok(map),
        _ => Err(ApiError::bad_request("malformed_request", "request body must be a JSON object")),
    }
}

/// Expression paths are reported relative to the request body.
fn in_body(path: &str) -> String {
    path.replacen('$', "$.filter", 1)
}

/// A missing or null filter selects every row.
fn filter_of(body: &Map<String, Json>) -> Result<Option<FilterExpr>, ApiError> {
    let Some(raw) = body.get("filter").filter(|v| !v.is_null()) else {
        return Ok(None);
    };
    let expr = parse_filter_json(raw).map_err(|e| {
        let mut err = ApiError::from(e);
        err.body.path = err.body.path.take().map(|p| in_body(&p));
        err
    })?;
    if expr.depth() > MAX_FILTER_DEPTH {
        return Err(ApiError::too_large(format!(
            "filter nesting depth {} exceeds {MAX_FILTER_DEPTH}",
            expr.depth()
        )));
    }
    if expr.condition_count() > MAX_FILTER_CONDITIONS {
        return Err(ApiError::too_large(format!(
            "filter has {} conditions, more than {MAX_FILTER_CONDITIONS}",
            expr.condition_count()
        )));
    }
    Ok(Some(expr))
}

fn selection(snap: &Snapshot, filter: Option<&FilterExpr>) -> Result<Vec<usize>, ApiError> {
    match filter {
        None => Ok((0..snap.store.row_count()).collect()),
        Some(expr) => {
            let mut errors = validate(expr, snap.store.schema());
            if !errors.is_empty() {
                errors.iter_mut().for_each(|e| e.path = in_body(&e.path));
                return Err(ApiError::invalid_filter(errors));
            }
            evaluate(expr, &snap.store).map_err(ApiError::invalid_filter)
        }
    }
}

fn page_error(e: PageError) -> ApiError {
    let code = match e {
        PageError::UnknownSortField(_) => "unknown_sort_field",
        PageError::BadSortSpec(_) => "bad_sort",
        PageError::ZeroLimit => "bad_limit",
    };
    ApiError::bad_request(code, e.to_string())
}

/// `"FIELD:asc"` or `{"field": "...", "direction": "asc"}`.
fn sort_of(body: &Map<String, Json>) -> Result<Option<SortSpec>, ApiError> {
    match body.get("sort") {
        None | Some(Json::Null) => Ok(None),
        Some(Json::String(s)) => s.parse().map(Some).map_err(page_error),
        Some(other) => serde_json::from_value(other.clone())
            .map(Some)
            .map_err(|e| ApiError::bad_request("bad_sort", format!("sort: {e}")).at("$.sort")),
    }
}

fn count_of(body: &Map<String, Json>, key: &str) -> Result<Option<usize>, ApiError> {
    match body.get(key) {
        None | Some(Json::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| {
                ApiError::bad_request("malformed_request", format!("{key} must be a non-negative integer"))
                    .at(format!("$.{key}"))
            }),
    }
}

/// Serialized directly so rows keep schema column order.
#[derive(Serialize)]
struct QueryResponse<'a> {
    #[serde(flatten)]
    page: &'a ResultPage,
    limit: usize,
}

async fn query(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let body = body_object(&body)?;
    let filter = filter_of(&body)?;
    let sort = sort_of(&body)?;
    let offset = count_of(&body, "offset")?.unwrap_or(0);
    let limit = count_of(&body, "limit")?.unwrap_or(state.limits.default_page_size);
    if limit == 0 {
        return Err(page_error(PageError::ZeroLimit).at("$.limit"));
    }
    if limit > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request("bad_limit", format!("limit must be ≤ {MAX_PAGE_SIZE}")).at("$.limit"));
    }
    let snap = state.snapshot();
    let rows = selection(&snap, filter.as_ref())?;
    let page = select_page(&snap.store, &rows, sort.as_ref(), offset, limit, &state.limits.link_template)
        .map_err(page_error)?;
    Ok(JsonBody(QueryResponse { page: &page, limit }).into_response())
}

async fn export(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let body = body_object(&body)?;
    let filter = filter_of(&body)?;
    let sort = sort_of(&body)?;
    let snap = state.snapshot();
    let rows = selection(&snap, filter.as_ref())?;
    let rows = Arc::new(sorted_rows(&snap.store, &rows, sort.as_ref()).map_err(page_error)?);

    let mut header = Vec::new();
    write_csv_header(&snap.store, &mut header).expect("writing to memory");
    let chunks = rows.len().div_ceil(EXPORT_CHUNK_ROWS);
    let body_stream = stream::once(async move { Ok::<Bytes, Infallible>(Bytes::from(header)) }).chain(
        stream::iter(0..chunks).map(move |i| {
            let start = i * EXPORT_CHUNK_ROWS;
            let end = (start + EXPORT_CHUNK_ROWS).min(rows.len());
            let mut buf = Vec::new();
            write_csv_rows(&snap.store, &rows[start..end], &mut buf).expect("writing to memory");
            Ok(Bytes::from(buf))
        }),
    );
    Ok((
        StatusCode::OK,
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"opented_selection.csv\""),
        ],
        Body::from_stream(body_stream),
    )
        .into_response())
}

async fn sankey(State(state): Shared, body: Bytes) -> Result<Response, ApiError> {
    let body = body_object(&body)?;
    let filter = filter_of(&body)?;
    let max_links = count_of(&body, "max_links")?.unwrap_or(state.limits.max_links);
    if max_links == 0 {
        return Err(ApiError::bad_request("bad_max_links", "max_links must be ≥ 1").at("$.max_links"));
    }
    let snap = state.snapshot();
    let rows = selection(&snap, filter.as_ref())?;
    let graph = build_sankey(&snap.store, &rows, Some(max_links), &state.limits.link_template);
    Ok(JsonBody(graph).into_response())
}

fn param<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match params.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| ApiError::bad_request("bad_parameter", format!("invalid {key}: {s:?}"))),
    }
}

fn cpv_unavailable() -> ApiError {
    ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "cpv_unavailable", "no CPV table is loaded")
}

async fn cpv(State(state): Shared, Query(params): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let digits: Option<usize> = param(&params, "digits")?;
    let offset: usize = param(&params, "offset")?.unwrap_or(0);
    let limit: usize = param(&params, "limit")?.unwrap_or(state.limits.default_page_size);
    if limit == 0 || limit > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(
            "bad_limit",
            format!("limit must be between 1 and {MAX_PAGE_SIZE}"),
        ));
    }
    let snap = state.snapshot();
    let table = snap.cpv.as_ref().ok_or_else(cpv_unavailable)?;
    let query = params.get("query").map(String::as_str).unwrap_or("");
    let hits = table
        .search(query, digits)
        .map_err(|e| ApiError::bad_request("bad_parameter", e.to_string()))?;
    let page: Vec<_> = hits.iter().skip(offset).take(limit).collect();
    Ok(JsonBody(json!({
        "total": hits.len(),
        "offset": offset,
        "limit": limit,
        "entries": page,
    }))
    .into_response())
}

async fn quest(State(state): Shared, Query(params): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let seed: u64 = match param(&params, "seed")? {
        Some(s) => s,
        None => std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0),
    };
    let min_support: usize = param(&params, "min_support")?.unwrap_or(DEFAULT_MIN_SUPPORT);
    let snap = state.snapshot();
    let table = snap.cpv.as_ref().ok_or_else(cpv_unavailable)?;
    let q = generate_quest(&snap.store, table, seed, min_support)
        .map_err(|e| ApiError::new(StatusCode::NOT_FOUND, "no_quest", e.to_string()))?;
    let filter = solution_filter(&q);
    let mut out = serde_json::to_value(&q).expect("quests serialize");
    out["seed"] = json!(seed);
    out["filter"] = filter.to_json();
    Ok(JsonBody(out).into_response())
}
