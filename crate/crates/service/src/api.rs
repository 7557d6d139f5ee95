use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use siteselect_core::analysis::{
    correlation_matrix, eliminated_sites, evaluate_chains, rank_sum_groups, select_sites, Attribute, EliminatedSite,
    EvaluationReport, GroupSelector, PresenceSet, ValueContext, ValueSource,
};
use siteselect_core::urp::{self, parse_urp};
use siteselect_core::{Aggregation, IndexFactors, Site, Snapshot};

use crate::error::ApiError;
use crate::{Metadata, Service, ServiceState, VERSION_HEADER};

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sites", get(list_sites))
        .route("/sites/{code}", get(site_detail))
        .route("/factors", get(list_factors))
        .route("/factors/{id}/values", get(factor_values))
        .route("/recommend", post(recommend))
        .route("/evaluate", post(evaluate))
        .route("/correlate", post(correlate))
        .route("/ranksum", post(ranksum))
        .with_state(service)
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    snapshot_version: &'a str,
    data: T,
}

/// Wraps a handler result in the versioned envelope and header.
fn respond<T: Serialize>(state: &ServiceState, result: Result<T, ApiError>) -> Response {
    let version = state.snapshot.version();
    match result {
        Ok(data) => {
            let mut resp = Json(Envelope {
                snapshot_version: version,
                data,
            })
            .into_response();
            if let Ok(v) = HeaderValue::from_str(version) {
                resp.headers_mut().insert(VERSION_HEADER, v);
            }
            resp
        }
        Err(e) => e.with_version(version).into_response(),
    }
}

fn loaded(service: &Service) -> Result<Arc<ServiceState>, ApiError> {
    service
        .current()
        .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no snapshot loaded"))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn parse_profile(body: &[u8]) -> Result<urp::Urp, ApiError> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("request body is not UTF-8"))?;
    Ok(parse_urp(text)?)
}

fn default_year(snapshot: &Snapshot, year: Option<i32>) -> Result<i32, ApiError> {
    year.or_else(|| snapshot.latest_year())
        .ok_or_else(|| ApiError::bad_request("snapshot has no observations; pass `year`"))
}

fn site_universe(
    snapshot: &Snapshot,
    level: Option<&str>,
    under: Option<&str>,
    sites: Option<Vec<String>>,
) -> Result<Vec<String>, ApiError> {
    if let Some(sites) = sites {
        return Ok(sites);
    }
    let bottom = snapshot.hierarchy().levels().bottom();
    let level = level.unwrap_or_else(|| snapshot.hierarchy().levels().name(bottom));
    Ok(select_sites(snapshot, Some(level), under)?)
}

#[derive(Serialize)]
struct Health<'a> {
    status: &'static str,
    snapshot_version: Option<&'a str>,
    sites: usize,
    factors: usize,
    values: usize,
    chains: Vec<&'a str>,
    metadata: Option<&'a Metadata>,
}

async fn health(State(service): State<Service>) -> Response {
    let current = service.current();
    let body = match &current {
        Some(st) => Health {
            status: "ok",
            snapshot_version: Some(st.snapshot.version()),
            sites: st.snapshot.hierarchy().len(),
            factors: st.snapshot.factors().len(),
            values: st.snapshot.value_count(),
            chains: st.presence.iter().map(|p| p.label.as_str()).collect(),
            metadata: Some(&st.metadata),
        },
        None => Health {
            status: "empty",
            snapshot_version: None,
            sites: 0,
            factors: 0,
            values: 0,
            chains: Vec::new(),
            metadata: None,
        },
    };
    let mut resp = Json(body).into_response();
    if let Some(v) = current.as_ref().and_then(|st| HeaderValue::from_str(st.snapshot.version()).ok()) {
        resp.headers_mut().insert(VERSION_HEADER, v);
    }
    resp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteView {
    pub code: String,
    pub name: String,
    pub level: String,
    pub parent_code: Option<String>,
}

impl SiteView {
    fn of(snapshot: &Snapshot, site: &Site) -> Self {
        Self {
            code: site.code.clone(),
            name: site.name.clone(),
            level: snapshot.hierarchy().levels().name(site.level).to_owned(),
            parent_code: site.parent_code.clone(),
        }
    }
}

#[derive(Deserialize)]
struct SitesQuery {
    level: Option<String>,
    under: Option<String>,
}

async fn list_sites(State(service): State<Service>, Query(q): Query<SitesQuery>) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let s = &st.snapshot;
    let result = select_sites(s, q.level.as_deref(), q.under.as_deref())
        .map_err(ApiError::from)
        .map(|codes| {
            codes
                .iter()
                .map(|c| SiteView::of(s, s.hierarchy().get(c).expect("selected from hierarchy")))
                .collect::<Vec<_>>()
        });
    respond(&st, result)
}

#[derive(Serialize)]
struct SiteDetail {
    #[serde(flatten)]
    site: SiteView,
    children: Vec<String>,
    /// Nearest first.
    ancestors: Vec<String>,
    year: Option<i32>,
    values: BTreeMap<String, Option<f64>>,
}

#[derive(Deserialize)]
struct YearQuery {
    year: Option<i32>,
}

async fn site_detail(State(service): State<Service>, Path(code): Path<String>, Query(q): Query<YearQuery>) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let s = &st.snapshot;
    let h = s.hierarchy();
    let result = h
        .id(&code)
        .ok_or_else(|| ApiError::not_found(format!("unknown site `{code}`")))
        .map(|id| {
            let year = q.year.or_else(|| s.latest_year());
            let values = s
                .factors()
                .iter()
                .map(|f| {
                    let v = year.and_then(|y| s.resolve(&code, &f.id, y).ok().flatten());
                    (f.id.clone(), v)
                })
                .collect();
            SiteDetail {
                site: SiteView::of(s, h.site(id)),
                children: h.children(id).iter().map(|c| h.site(*c).code.clone()).collect(),
                ancestors: h.ancestors(id).map(|a| h.site(a).code.clone()).collect(),
                year,
                values,
            }
        });
    respond(&st, result)
}

#[derive(Serialize)]
struct FactorView<'a> {
    id: &'a str,
    name: &'a str,
    unit: &'a str,
    native_level: &'a str,
    aggregation: Aggregation,
    years: Vec<i32>,
}

async fn list_factors(State(service): State<Service>) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let s = &st.snapshot;
    let views: Vec<FactorView> = s
        .factors()
        .iter()
        .map(|f| FactorView {
            id: &f.id,
            name: &f.name,
            unit: &f.unit,
            native_level: s.hierarchy().levels().name(f.native_level),
            aggregation: f.aggregation,
            years: s.years(&f.id).into_iter().collect(),
        })
        .collect();
    respond(&st, Ok(views))
}

#[derive(Deserialize)]
struct ValuesQuery {
    level: Option<String>,
    under: Option<String>,
    year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteValue {
    pub site_code: String,
    pub value: Option<f64>,
}

#[derive(Serialize)]
struct FactorValues {
    factor: String,
    year: i32,
    level: String,
    values: Vec<SiteValue>,
}

async fn factor_values(State(service): State<Service>, Path(id): Path<String>, Query(q): Query<ValuesQuery>) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let s = &st.snapshot;
    let result = (|| {
        let factor = s
            .factor(&id)
            .ok_or_else(|| ApiError::not_found(format!("unknown factor `{id}`")))?;
        let year = q
            .year
            .or_else(|| s.years(&id).last().copied())
            .ok_or_else(|| ApiError::not_found(format!("factor `{id}` has no observations")))?;
        let level = q
            .level
            .unwrap_or_else(|| s.hierarchy().levels().name(factor.native_level).to_owned());
        let sites = site_universe(s, Some(&level), q.under.as_deref(), None)?;
        let values = sites
            .into_iter()
            .map(|code| SiteValue {
                value: s.resolve(&code, &id, year).ok().flatten(),
                site_code: code,
            })
            .collect();
        Ok(FactorValues {
            factor: id.clone(),
            year,
            level,
            values,
        })
    })();
    respond(&st, result)
}

#[derive(Deserialize)]
struct RecommendQuery {
    top_k: Option<usize>,
}

async fn recommend(State(service): State<Service>, Query(q): Query<RecommendQuery>, body: Bytes) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let result = parse_profile(&body).and_then(|profile| Ok(urp::recommend(&st.snapshot, &profile, q.top_k)?));
    respond(&st, result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRequest {
    urp: Value,
    /// Chain the profile belongs to; optional with a single presence set.
    #[serde(default)]
    chain: Option<String>,
    /// Presence sets to compare against; the loaded ones when absent.
    #[serde(default)]
    presence: Option<Vec<PresenceSet>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateResponse {
    pub chain: String,
    pub evaluation: EvaluationReport,
    pub eliminated: Vec<EliminatedSite>,
}

async fn evaluate(State(service): State<Service>, body: Bytes) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let result = (|| {
        let req: EvaluateRequest = parse_body(&body)?;
        let profile = parse_profile(req.urp.to_string().as_bytes())?;
        let presence = req.presence.unwrap_or_else(|| st.presence.as_ref().clone());
        let chain = match req.chain {
            Some(c) => c,
            None if presence.len() == 1 => presence[0].label.clone(),
            None => return Err(ApiError::bad_request("name the `chain` the profile belongs to")),
        };
        let evaluation = evaluate_chains(&st.snapshot, &[(chain.clone(), profile.clone())], &presence)?;
        let eliminated = eliminated_sites(&st.snapshot, &profile)?;
        Ok(EvaluateResponse {
            chain,
            evaluation,
            eliminated,
        })
    })();
    respond(&st, result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelateRequest {
    attributes: Vec<Attribute>,
    #[serde(default)]
    level: Option<String>,
    #[serde(default)]
    under: Option<String>,
    #[serde(default)]
    sites: Option<Vec<String>>,
    #[serde(default)]
    year: Option<i32>,
}

async fn correlate(State(service): State<Service>, body: Bytes) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let result = (|| {
        let req: CorrelateRequest = parse_body(&body)?;
        let s = &st.snapshot;
        let year = default_year(s, req.year)?;
        let sites = site_universe(s, req.level.as_deref(), req.under.as_deref(), req.sites)?;
        let index = IndexFactors::default();
        let ctx = ValueContext::new(s, &st.presence, year, &index);
        Ok(correlation_matrix(&ctx, &req.attributes, &sites)?)
    })();
    respond(&st, result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RankSumRequest {
    first: GroupSelector,
    second: GroupSelector,
    #[serde(default)]
    value: Option<ValueSource>,
    #[serde(default)]
    level: Option<String>,
    #[serde(default)]
    under: Option<String>,
    #[serde(default)]
    year: Option<i32>,
}

async fn ranksum(State(service): State<Service>, body: Bytes) -> Response {
    let st = match loaded(&service) {
        Ok(st) => st,
        Err(e) => return e.into_response(),
    };
    let result = (|| {
        let req: RankSumRequest = parse_body(&body)?;
        let s = &st.snapshot;
        let year = default_year(s, req.year)?;
        let universe = site_universe(s, req.level.as_deref(), req.under.as_deref(), None)?;
        let index = IndexFactors::default();
        let ctx = ValueContext::new(s, &st.presence, year, &index);
        let value = req.value.unwrap_or(ValueSource::PurchasingPowerIndex);
        Ok(rank_sum_groups(&ctx, &universe, &req.first, &req.second, &value)?)
    })();
    respond(&st, result)
}
