//! HTTP JSON facade over an immutable site-selection snapshot.
//!
//! The served [`ServiceState`] is swapped atomically on (re)load; every
//! request works on the state it picked up when it started, so a reload never
//! exposes a partially ingested dataset and never blocks readers for longer
//! than an `Arc` clone.

mod api;
mod error;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use siteselect_core::analysis::PresenceSet;
use siteselect_core::ingest::{self, DatasetManifest, IngestFailure, ValidationReport};
use siteselect_core::Snapshot;
use thiserror::Error;

pub use api::router;
pub use error::ApiError;

/// Response header carrying the snapshot version.
pub const VERSION_HEADER: &str = "x-snapshot-version";

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub manifest: Option<PathBuf>,
    /// Seconds since the Unix epoch.
    pub loaded_at: u64,
    pub warnings: usize,
    pub service_version: &'static str,
}

/// One complete, immutable view: snapshot, store presence and provenance.
#[derive(Debug)]
pub struct ServiceState {
    pub snapshot: Arc<Snapshot>,
    pub presence: Arc<Vec<PresenceSet>>,
    pub metadata: Metadata,
}

impl ServiceState {
    pub fn new(snapshot: Snapshot, presence: Vec<PresenceSet>) -> Self {
        Self {
            snapshot: Arc::new(snapshot),
            presence: Arc::new(presence),
            metadata: Metadata {
                manifest: None,
                loaded_at: now(),
                warnings: 0,
                service_version: env!("CARGO_PKG_VERSION"),
            },
        }
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Ingest(#[from] IngestFailure),
    #[error("stores file: {0}")]
    Presence(ingest::IngestError),
    #[error("no manifest has been loaded yet")]
    NothingToReload,
}

impl LoadError {
    pub fn report(&self) -> Option<&ValidationReport> {
        match self {
            LoadError::Ingest(f) => Some(&f.report),
            _ => None,
        }
    }
}

#[derive(Default)]
struct Shared {
    current: RwLock<Option<Arc<ServiceState>>>,
    manifest: Mutex<Option<PathBuf>>,
}

/// Cheaply clonable handle to the served state.
#[derive(Clone, Default)]
pub struct Service {
    shared: Arc<Shared>,
}

impl Service {
    /// A service with nothing loaded; data endpoints answer 503.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_state(state: ServiceState) -> Self {
        let svc = Self::default();
        svc.install(state);
        svc
    }

    pub fn current(&self) -> Option<Arc<ServiceState>> {
        self.shared.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn install(&self, state: ServiceState) -> Arc<ServiceState> {
        let state = Arc::new(state);
        *self.shared.current.write().unwrap_or_else(|e| e.into_inner()) = Some(state.clone());
        state
    }

    /// Ingests `manifest` and its stores file, then swaps the result in. On
    /// any error the currently served state stays untouched.
    pub fn load_snapshot(&self, manifest: impl AsRef<Path>) -> Result<Arc<ServiceState>, LoadError> {
        let path = manifest.as_ref();
        let result = load_state(path);
        match result {
            Ok(state) => {
                *self.shared.manifest.lock().unwrap_or_else(|e| e.into_inner()) = Some(path.to_path_buf());
                let state = self.install(state);
                tracing::info!(version = state.snapshot.version(), manifest = %path.display(), "snapshot loaded");
                Ok(state)
            }
            Err(e) => {
                tracing::error!(manifest = %path.display(), error = %e, "load failed; keeping current snapshot");
                Err(e)
            }
        }
    }

    /// Reloads the manifest of the last successful load.
    pub fn reload(&self) -> Result<Arc<ServiceState>, LoadError> {
        let path = self
            .shared
            .manifest
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
            .ok_or(LoadError::NothingToReload)?;
        self.load_snapshot(path)
    }
}

fn load_state(path: &Path) -> Result<ServiceState, LoadError> {
    let manifest = DatasetManifest::from_path(path).map_err(|e| {
        LoadError::Ingest(IngestFailure {
            report: ValidationReport {
                fatal: vec![e.to_string()],
                ..Default::default()
            },
        })
    })?;
    let ingested = ingest::build_snapshot(&manifest)?;
    let presence = manifest.presence().map_err(LoadError::Presence)?;
    let mut state = ServiceState::new(ingested.snapshot, presence);
    state.metadata.manifest = Some(path.to_path_buf());
    state.metadata.warnings = ingested.report.warnings.len();
    Ok(state)
}

/// Serves `service` on `addr` until ctrl-c; SIGHUP reloads the manifest.
pub async fn serve(service: Service, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    spawn_reload_on_hangup(service.clone());
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(unix)]
fn spawn_reload_on_hangup(service: Service) {
    use tokio::signal::unix::{signal, SignalKind};
    tokio::spawn(async move {
        let Ok(mut hup) = signal(SignalKind::hangup()) else {
            return;
        };
        while hup.recv().await.is_some() {
            let svc = service.clone();
            // ingestion is CPU-bound; keep it off the request workers
            let _ = tokio::task::spawn_blocking(move || svc.reload()).await;
        }
    });
}

#[cfg(not(unix))]
fn spawn_reload_on_hangup(_service: Service) {}
