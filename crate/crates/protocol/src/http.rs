//! Browser-facing HTTP endpoints and static asset serving.
//!
//! | method | path                     | body           | reply           |
//! |--------|--------------------------|----------------|-----------------|
//! | POST   | `/api/enroll`            | `ENROLL`       | `ENROLLED`      |
//! | GET    | `/api/pubkey/{username}` |                | `{username, phone_pubkey}` |
//! | POST   | `/api/login`             | `LOGIN_INIT`   | `LOGIN_CHALLENGE` |
//! | POST   | `/api/sample`            | `SAMPLE_UPLOAD`| `ACK`           |
//! | POST   | `/api/fallback`          | `FALLBACK_CODE`| `RESULT`        |
//! | POST   | `/api/sync`              | `SYNC_REQ`     | `SYNC_RESP`     |
//! | GET    | `/api/result/{session}`  |                | `RESULT`        |
//!
//! `/api/result` accepts `after=<STATE>&wait_ms=<n>` to long-poll until the
//! session leaves `STATE`. Failures reply with an `ERROR` message.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tower_http::services::ServeDir;

use crate::service::AuthService;
use crate::session::SessionState;
use crate::store::ClientMeta;
use crate::wire::Message;
use crate::ProtocolError;

/// Longest a result poll may hold the connection.
pub const MAX_WAIT_MS: u64 = 30_000;

struct ApiError(ProtocolError);

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        ApiError(e)
    }
}

pub fn status_for(e: &ProtocolError) -> StatusCode {
    match e {
        ProtocolError::UsernameTaken | ProtocolError::WrongState(_) => StatusCode::CONFLICT,
        ProtocolError::BadCredentials | ProtocolError::BadSignature | ProtocolError::BadCode => {
            StatusCode::UNAUTHORIZED
        }
        ProtocolError::Throttled => StatusCode::TOO_MANY_REQUESTS,
        ProtocolError::BadSession => StatusCode::NOT_FOUND,
        ProtocolError::DecryptFail | ProtocolError::InvalidKey(_) | ProtocolError::Malformed(_) => {
            StatusCode::BAD_REQUEST
        }
        ProtocolError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_for(&self.0), Json(Message::error(&self.0))).into_response()
    }
}

type ApiResult = Result<Json<Message>, ApiError>;

fn parse(body: &Bytes) -> Result<Message, ApiError> {
    Ok(Message::from_json(body)?)
}

fn unexpected(what: &str) -> ApiError {
    ApiError(ProtocolError::Malformed(format!("expected {what}")))
}

fn client_meta(addr: SocketAddr, headers: &HeaderMap) -> ClientMeta {
    ClientMeta {
        addr: Some(addr.ip().to_string()),
        user_agent: headers
            .get(header::USER_AGENT)
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    }
}

async fn enroll(
    State(svc): State<Arc<AuthService>>,
    body: Bytes,
) -> Result<(StatusCode, Json<Message>), ApiError> {
    let Message::Enroll {
        username,
        password,
        phone_pubkey,
    } = parse(&body)?
    else {
        return Err(unexpected("ENROLL"));
    };
    let account =
        tokio::task::spawn_blocking(move || svc.enroll(&username, &password, &phone_pubkey))
            .await
            .map_err(|e| ProtocolError::Storage(e.to_string()))??;
    Ok((
        StatusCode::CREATED,
        Json(Message::Enrolled {
            username: account.username,
            phone_pubkey: account.phone_pubkey,
            fallback_secret: account.fallback_secret,
        }),
    ))
}

async fn pubkey(
    State(svc): State<Arc<AuthService>>,
    Path(username): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let key = svc
        .pubkey(&username)
        .map_err(|_| ProtocolError::BadSession)?;
    Ok(Json(
        serde_json::json!({ "username": username, "phone_pubkey": key }),
    ))
}

async fn login(
    State(svc): State<Arc<AuthService>>,
    ConnectInfo(addr): ConnectInfo<SocketAddr>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult {
    let Message::LoginInit { username, password } = parse(&body)? else {
        return Err(unexpected("LOGIN_INIT"));
    };
    let meta = client_meta(addr, &headers);
    let reply = tokio::task::spawn_blocking(move || svc.login_init(&username, &password, &meta))
        .await
        .map_err(|e| ProtocolError::Storage(e.to_string()))??;
    Ok(Json(reply))
}

async fn sample(State(svc): State<Arc<AuthService>>, body: Bytes) -> ApiResult {
    let Message::SampleUpload { session_id, sample } = parse(&body)? else {
        return Err(unexpected("SAMPLE_UPLOAD"));
    };
    svc.submit_computer_sample(&session_id, sample)?;
    Ok(Json(Message::Ack))
}

async fn fallback(State(svc): State<Arc<AuthService>>, body: Bytes) -> ApiResult {
    let Message::FallbackCode { session_id, code } = parse(&body)? else {
        return Err(unexpected("FALLBACK_CODE"));
    };
    let state = svc.verify_fallback_code(&session_id, &code)?;
    Ok(Json(Message::Result {
        state,
        reason: None,
    }))
}

async fn sync(State(svc): State<Arc<AuthService>>, body: Bytes) -> ApiResult {
    let Message::SyncReq { t1 } = parse(&body)? else {
        return Err(unexpected("SYNC_REQ"));
    };
    Ok(Json(svc.sync(t1)))
}

#[derive(Debug, Deserialize)]
struct ResultQuery {
    after: Option<SessionState>,
    #[serde(default)]
    wait_ms: u64,
}

async fn result(
    State(svc): State<Arc<AuthService>>,
    Path(session_id): Path<String>,
    Query(q): Query<ResultQuery>,
) -> ApiResult {
    let (state, reason) = svc
        .wait_result(&session_id, q.after, q.wait_ms.min(MAX_WAIT_MS))
        .await?;
    Ok(Json(Message::Result { state, reason }))
}

pub fn router(svc: Arc<AuthService>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/enroll", post(enroll))
        .route("/api/pubkey/{username}", get(pubkey))
        .route("/api/login", post(login))
        .route("/api/sample", post(sample))
        .route("/api/fallback", post(fallback))
        .route("/api/sync", post(sync))
        .route("/api/result/{session_id}", get(result))
        .route("/api/health", get(|| async { "ok" }))
        .with_state(svc);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves `router` on `listener`, recording peer addresses for attempt logs.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(
        listener,
        router.into_make_service_with_connect_info::<SocketAddr>(),
    )
    .await
}
