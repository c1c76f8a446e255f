//! HTTP session service.
//!
//! Routes:
//! - `POST /sessions` with `{program, atoms}` creates a session.
//! - `GET /sessions/{id}/atoms?pattern=` lists atoms.
//! - `POST /sessions/{id}/infer` solves.
//! - `GET /sessions/{id}/rag` returns the rule-atom graph.
//! - `GET /sessions/{id}/atoms/{atom}/explanation` explains one atom.
//! - `POST /sessions/{id}/freeze` with `{pins: [{atom, belief?}]}` pins atoms and re-solves.
//! - `POST /sessions/{id}/thaw` with an optional `{atoms}` list unpins and re-solves.
//! - `DELETE /sessions/{id}` drops a session.
//!
//! Errors are `{error, diagnostics}` with a matching status code.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use softlogic_core::explain::{explain_atom, ExplainError, QualifierConfig};
use softlogic_core::rag::{Direction, JsonGraph};
use softlogic_core::solve::SolverConfig;
use softlogic_core::{AtomId, AtomPattern, Diagnostic, Severity};

use crate::engine::LoadError;
use crate::session::{Delta, Outcome, Session, SessionError, View};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub solver: SolverConfig,
    /// Sessions unused for this long are dropped.
    pub idle_timeout: Duration,
    /// How long a mutating request waits for a solve already in flight
    /// before answering 409.
    pub lock_wait: Duration,
    pub qualifiers: QualifierConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            solver: SolverConfig::default(),
            idle_timeout: Duration::from_secs(30 * 60),
            lock_wait: Duration::from_secs(10),
            qualifiers: QualifierConfig::default(),
        }
    }
}

struct Slot {
    session: Arc<tokio::sync::Mutex<Session>>,
    /// Latest published state; readers never wait for a solve.
    view: RwLock<Arc<View>>,
    last_used: Mutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn view(&self) -> Arc<View> {
        self.touch();
        self.view.read().unwrap().clone()
    }
}

pub struct Service {
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

pub type AppState = Arc<Service>;

impl Service {
    pub fn new(config: ServiceConfig) -> AppState {
        Arc::new(Service { config, sessions: Mutex::new(HashMap::new()), next_id: AtomicU64::new(1) })
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn evict_idle(&self) -> usize {
        let timeout = self.config.idle_timeout;
        let mut sessions = self.sessions.lock().unwrap();
        let before = sessions.len();
        sessions.retain(|_, s| s.last_used.lock().unwrap().elapsed() < timeout);
        before - sessions.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticJson {
    pub severity: String,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

impl From<&Diagnostic> for DiagnosticJson {
    fn from(d: &Diagnostic) -> Self {
        DiagnosticJson {
            severity: match d.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            }
            .into(),
            code: format!("{:?}", d.code),
            message: d.message.clone(),
            line: d.span.map(|s| s.line),
            column: d.span.map(|s| s.column),
            token: d.token.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub diagnostics: Vec<DiagnosticJson>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { error: error.into(), diagnostics: Vec::new() } }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<LoadError> for ApiError {
    fn from(e: LoadError) -> Self {
        let diagnostics = match &e {
            LoadError::Program(d) => d.iter().map(DiagnosticJson::from).collect(),
            LoadError::Atoms(t) => vec![DiagnosticJson {
                severity: "error".into(),
                code: "AtomFile".into(),
                message: t.to_string(),
                line: Some(t.line() as u32),
                column: None,
                token: None,
            }],
            LoadError::Store(_) => Vec::new(),
        };
        let error = match &e {
            LoadError::Program(_) => "program has errors".to_string(),
            other => other.to_string(),
        };
        ApiError { status: StatusCode::BAD_REQUEST, body: ErrorBody { error, diagnostics } }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::UnknownAtom(_) => StatusCode::NOT_FOUND,
            SessionError::MalformedAtom(_) | SessionError::BeliefOutOfRange(_) => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

fn bad_json(e: serde_json::Error) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, format!("invalid request body: {e}"))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateRequest {
    pub program: String,
    #[serde(default)]
    pub atoms: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub revision: u64,
    pub warnings: Vec<DiagnosticJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AtomJson {
    pub id: String,
    pub predicate: String,
    pub args: Vec<String>,
    pub belief: f64,
    pub status: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AtomsResponse {
    pub revision: u64,
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BeliefJson {
    pub id: String,
    pub belief: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DeltaJson {
    pub id: String,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ViolatedJson {
    pub rule: String,
    pub text: String,
}

/// Result of a solve. `status` is `solved` or `infeasible`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SolveResponse {
    pub revision: u64,
    pub status: String,
    pub objective: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub converged: bool,
    pub beliefs: Vec<BeliefJson>,
    pub violated: Vec<ViolatedJson>,
    pub deltas: Vec<DeltaJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RagResponse {
    pub revision: u64,
    #[serde(flatten)]
    pub graph: JsonGraph,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LinkJson {
    pub id: String,
    pub belief: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntryJson {
    pub rule: String,
    pub text: String,
    pub direction: Direction,
    pub magnitude: f64,
    pub links: Vec<LinkJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplanationResponse {
    pub revision: u64,
    pub atom: String,
    pub belief: f64,
    pub focus: String,
    pub why: Vec<EntryJson>,
    pub why_not: Vec<EntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Pin {
    pub atom: String,
    #[serde(default)]
    pub belief: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FreezeRequest {
    pub pins: Vec<Pin>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ThawRequest {
    #[serde(default)]
    pub atoms: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
pub struct AtomsQuery {
    #[serde(default)]
    pub pattern: Option<String>,
}

fn atom_id(view: &View, atom: AtomId) -> String {
    view.db.record(atom).atom.to_string()
}

fn solve_response(view: &View, deltas: &[Delta]) -> (StatusCode, Json<SolveResponse>) {
    let (status, solution, violated) = match &view.outcome {
        Some(Outcome::Solved(i)) => (StatusCode::OK, &i.solution, Vec::new()),
        Some(Outcome::Infeasible(f)) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            &f.best_effort,
            f.violated.iter().map(|(r, t)| ViolatedJson { rule: format!("r{r}"), text: t.clone() }).collect(),
        ),
        None => unreachable!("responses are built after a solve"),
    };
    let body = SolveResponse {
        revision: view.revision,
        status: if status == StatusCode::OK { "solved" } else { "infeasible" }.into(),
        objective: solution.objective,
        iterations: solution.iterations,
        max_violation: solution.max_violation,
        converged: solution.converged,
        beliefs: view
            .db
            .ids()
            .map(|a| BeliefJson { id: atom_id(view, a), belief: solution.belief(a) })
            .collect(),
        violated,
        deltas: deltas
            .iter()
            .map(|d| DeltaJson {
                id: atom_id(view, d.atom),
                before: d.before,
                after: d.after,
                delta: d.after - d.before,
            })
            .collect(),
    };
    (status, Json(body))
}

async fn create(
    State(service): State<AppState>,
    body: Bytes,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let req: CreateRequest = serde_json::from_slice(&body).map_err(bad_json)?;
    let session = Session::create(&req.program, &req.atoms)?;
    let id = format!("s{}", service.next_id.fetch_add(1, Ordering::Relaxed));
    let response = CreateResponse {
        id: id.clone(),
        revision: session.revision(),
        warnings: session.warnings.iter().map(DiagnosticJson::from).collect(),
    };
    let slot = Slot {
        view: RwLock::new(session.view()),
        session: Arc::new(tokio::sync::Mutex::new(session)),
        last_used: Mutex::new(Instant::now()),
    };
    service.sessions.lock().unwrap().insert(id, Arc::new(slot));
    Ok((StatusCode::CREATED, Json(response)))
}

async fn delete(State(service): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    match service.sessions.lock().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`"))),
    }
}

async fn atoms(
    State(service): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<AtomsQuery>,
) -> Result<Json<AtomsResponse>, ApiError> {
    let view = service.slot(&id)?.view();
    let ids: Vec<AtomId> = match q.pattern.as_deref().map(str::trim).filter(|p| !p.is_empty()) {
        None => view.db.ids().collect(),
        Some(p) => {
            let pattern = AtomPattern::parse(p)
                .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed pattern `{p}`")))?;
            view.db.query_atoms(&pattern)
        }
    };
    let atoms = ids
        .into_iter()
        .map(|a| {
            let rec = view.db.record(a);
            AtomJson {
                id: rec.atom.to_string(),
                predicate: rec.atom.predicate.clone(),
                args: rec.atom.args.clone(),
                belief: view.belief(a),
                status: rec.status.as_str().into(),
            }
        })
        .collect();
    Ok(Json(AtomsResponse { revision: view.revision, atoms }))
}

/// Runs `op` on the session under its lock, off the async executor, and
/// publishes the resulting view.
async fn mutate<T: Send + 'static>(
    service: &Service,
    id: &str,
    op: impl FnOnce(&mut Session, &SolverConfig) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let slot = service.slot(id)?;
    slot.touch();
    let guard = tokio::time::timeout(service.config.lock_wait, slot.session.clone().lock_owned())
        .await
        .map_err(|_| ApiError::new(StatusCode::CONFLICT, "a solve is already running for this session"))?;
    let solver = service.config.solver;
    let (result, view) = tokio::task::spawn_blocking(move || {
        let mut guard = guard;
        let result = op(&mut guard, &solver);
        (result, guard.view())
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    *slot.view.write().unwrap() = view;
    result
}

async fn infer(State(service): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let view = mutate(&service, &id, |s, cfg| Ok(s.infer(cfg))).await?;
    Ok(solve_response(&view, &[]).into_response())
}

async fn freeze(
    State(service): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: FreezeRequest = serde_json::from_slice(&body).map_err(bad_json)?;
    let (view, deltas) = mutate(&service, &id, move |s, cfg| {
        let pins = req
            .pins
            .iter()
            .map(|p| Ok((s.resolve(&p.atom)?, p.belief)))
            .collect::<Result<Vec<_>, SessionError>>()?;
        Ok(s.freeze(&pins, cfg)?)
    })
    .await?;
    Ok(solve_response(&view, &deltas).into_response())
}

async fn thaw(
    State(service): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: ThawRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ThawRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(bad_json)?
    };
    let (view, deltas) = mutate(&service, &id, move |s, cfg| {
        let atoms = match &req.atoms {
            None => None,
            Some(list) => Some(list.iter().map(|a| s.resolve(a)).collect::<Result<Vec<_>, _>>()?),
        };
        Ok(s.thaw(atoms.as_deref(), cfg)?)
    })
    .await?;
    Ok(solve_response(&view, &deltas).into_response())
}

fn solved(view: &View) -> Result<&crate::engine::Inference, ApiError> {
    view.inference().ok_or_else(|| {
        let msg = match view.outcome {
            Some(Outcome::Infeasible(_)) => "the latest solve was infeasible",
            _ => "no solution yet; run inference first",
        };
        ApiError::new(StatusCode::CONFLICT, msg)
    })
}

async fn rag(State(service): State<AppState>, Path(id): Path<String>) -> Result<Json<RagResponse>, ApiError> {
    let view = service.slot(&id)?.view();
    let inference = solved(&view)?;
    Ok(Json(RagResponse { revision: view.revision, graph: JsonGraph::from_graph(&inference.graph) }))
}

async fn explanation(
    State(service): State<AppState>,
    Path((id, atom)): Path<(String, String)>,
) -> Result<Json<ExplanationResponse>, ApiError> {
    let view = service.slot(&id)?.view();
    let ground = softlogic_core::GroundAtom::parse(&atom)
        .ok_or_else(|| ApiError::from(SessionError::MalformedAtom(atom.clone())))?;
    let target =
        view.db.find(&ground).ok_or_else(|| ApiError::from(SessionError::UnknownAtom(ground.to_string())))?;
    let inference = solved(&view)?;
    let e = explain_atom(
        target,
        &inference.graph,
        &inference.model,
        &view.program,
        &view.db,
        &service.config.qualifiers,
    )
    .map_err(|ExplainError::UnknownAtom(_)| {
        ApiError::new(StatusCode::NOT_FOUND, format!("{ground} occurs in no ground rule"))
    })?;
    let entries = |block: &[softlogic_core::explain::ExplanationEntry]| {
        block
            .iter()
            .map(|entry| EntryJson {
                rule: format!("r{}", entry.rule),
                text: entry.text.clone(),
                direction: entry.direction,
                magnitude: entry.magnitude,
                links: entry
                    .links
                    .iter()
                    .map(|l| LinkJson { id: l.text.clone(), belief: l.belief })
                    .collect(),
            })
            .collect()
    };
    Ok(Json(ExplanationResponse {
        revision: view.revision,
        atom: e.ground.to_string(),
        belief: e.belief,
        focus: e.focus.clone(),
        why: entries(&e.why),
        why_not: entries(&e.why_not),
    }))
}

pub fn router(service: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", axum::routing::delete(delete))
        .route("/sessions/{id}/atoms", get(atoms))
        .route("/sessions/{id}/infer", post(infer))
        .route("/sessions/{id}/rag", get(rag))
        .route("/sessions/{id}/atoms/{atom}/explanation", get(explanation))
        .route("/sessions/{id}/freeze", post(freeze))
        .route("/sessions/{id}/thaw", post(thaw))
        .with_state(service)
}

/// Binds `addr` and serves until the returned future is dropped or ctrl-c.
/// `on_bound` receives the actual address, useful with port 0.
pub async fn serve(
    addr: SocketAddr,
    config: ServiceConfig,
    on_bound: impl FnOnce(SocketAddr),
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    on_bound(listener.local_addr()?);
    let service = Service::new(config);
    let sweeper = service.clone();
    let period = (sweeper.config.idle_timeout / 4).clamp(Duration::from_millis(10), Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            sweeper.evict_idle();
        }
    });
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
