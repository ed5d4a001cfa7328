//! HTTP+JSON front end for [`Controller`].
//!
//! Errors come back as [`ErrorBody`] with the status of the error's variant.
//! Authenticated routes expect `Authorization: Bearer <token>`.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::oneshot;

use super::*;

type Shared = State<Arc<Controller>>;

impl IntoResponse for ControllerError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(ErrorBody::from(&self))).into_response()
    }
}

fn bearer(headers: &HeaderMap) -> String {
    headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .unwrap_or_default()
        .trim()
        .to_string()
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| ControllerError::BadRequest(e.to_string()))
}

/// Runs a controller call on the blocking pool; ledger settles may wait.
async fn call<T, F>(ctl: Arc<Controller>, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&Controller) -> Result<T> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&ctl)).await {
        Ok(Ok(v)) => Json(v).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ControllerError::Internal(e.to_string()).into_response(),
    }
}

fn user_hash_param(s: &str) -> Result<UserHash> {
    match UserHash::from_hex(s) {
        Some(h) if s.len() == 32 => Ok(h),
        _ => Err(ControllerError::BadRequest(format!("bad user hash {s:?}"))),
    }
}

fn tx_hash_param(s: &str) -> Result<TxHash> {
    TxHash::from_hex(s).ok_or_else(|| ControllerError::BadRequest(format!("bad tx hash {s:?}")))
}

async fn onboard_lab(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| c.onboard_lab(&token, &body(&b)?)).await
}

async fn list_labs(State(c): Shared) -> Response {
    call(c, |c| c.list_labs()).await
}

async fn accreditation(State(c): Shared, Path(lab_id): Path<String>, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| {
        let req: AccreditationRequest = body(&b)?;
        c.set_lab_accreditation(&token, &lab_id, req.accredited)
    })
    .await
}

async fn onboard_company(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| c.onboard_company(&token, &body(&b)?)).await
}

async fn register_user(State(c): Shared, b: Bytes) -> Response {
    call(c, move |c| c.register_user(&body(&b)?)).await
}

async fn submit_test(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| {
        let req: SubmitTestRequest = body(&b)?;
        c.submit_test(&token, &req.lab_id, &req.envelope)
    })
    .await
}

async fn user_tests(State(c): Shared, Path(user_id): Path<String>, h: HeaderMap) -> Response {
    let token = bearer(&h);
    call(c, move |c| c.list_valid_tests(&token, &user_id)).await
}

async fn purchase(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| c.purchase_tokens(&token, &body(&b)?)).await
}

async fn initiate(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| c.initiate_transfer(&token, &body(&b)?)).await
}

async fn confirm(State(c): Shared, Path(hash): Path<String>, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| {
        let req: ConfirmTransferRequest = body(&b)?;
        c.confirm_transfer(&token, &user_hash_param(&hash)?, &req.block_hash)
    })
    .await
}

async fn qr(State(c): Shared, Path(numeric_id): Path<String>, h: HeaderMap) -> Response {
    let token = bearer(&h);
    call(c, move |c| {
        let n = numeric_id
            .parse()
            .map_err(|_| ControllerError::BadRequest(format!("bad numeric id {numeric_id:?}")))?;
        c.get_qr_payload(&token, n)
    })
    .await
}

async fn fetch_certificate(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| {
        let req: FetchCertificateRequest = body(&b)?;
        let envelope = c.fetch_certificate(&token, &req.company_id, &req.user_hash)?;
        Ok(CertificateEnvelope { envelope })
    })
    .await
}

async fn buyback(State(c): Shared, h: HeaderMap, b: Bytes) -> Response {
    let token = bearer(&h);
    call(c, move |c| c.buy_back(&token, &body(&b)?)).await
}

async fn ledger_info(State(c): Shared) -> Response {
    call(c, |c| c.ledger_info()).await
}

async fn ledger_supply(State(c): Shared) -> Response {
    call(c, |c| Ok(c.ledger().supply())).await
}

async fn ledger_verify(State(c): Shared) -> Response {
    call(c, |c| Ok(c.ledger().verify_chain())).await
}

async fn ledger_account(State(c): Shared, Path(id): Path<String>) -> Response {
    call(c, move |c| {
        let account: AccountId = id
            .parse()
            .map_err(|_| ControllerError::BadRequest(format!("bad account id {id:?}")))?;
        c.ledger_account(&account)
    })
    .await
}

async fn submit_transaction(State(c): Shared, b: Bytes) -> Response {
    call(c, move |c| {
        let req: SubmitTransactionRequest = body(&b)?;
        c.submit_transaction(&req.transaction)
    })
    .await
}

async fn get_transaction(State(c): Shared, Path(hash): Path<String>) -> Response {
    call(c, move |c| c.get_transaction(&tx_hash_param(&hash)?)).await
}

async fn close(State(c): Shared) -> Response {
    call(c, |c| c.close_ledger()).await
}

async fn not_found() -> Response {
    ControllerError::NotFound("no such endpoint".into()).into_response()
}

pub fn router(controller: Arc<Controller>) -> Router {
    Router::new()
        .route("/labs", post(onboard_lab).get(list_labs))
        .route("/labs/:lab_id/accreditation", post(accreditation))
        .route("/companies", post(onboard_company))
        .route("/users", post(register_user))
        .route("/users/:user_id/tests", get(user_tests))
        .route("/tests", post(submit_test))
        .route("/purchases", post(purchase))
        .route("/transfers", post(initiate))
        .route("/transfers/:user_hash/confirm", post(confirm))
        .route("/qr/:numeric_id", get(qr))
        .route("/certificates/fetch", post(fetch_certificate))
        .route("/buybacks", post(buyback))
        .route("/ledger", get(ledger_info))
        .route("/ledger/supply", get(ledger_supply))
        .route("/ledger/verify", get(ledger_verify))
        .route("/ledger/accounts/:account", get(ledger_account))
        .route("/ledger/transactions", post(submit_transaction))
        .route("/ledger/transactions/:tx_hash", get(get_transaction))
        .route("/ledger/close", post(close))
        .fallback(not_found)
        .with_state(controller)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    controller: Arc<Controller>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(controller))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server running on its own runtime thread. Dropping it shuts it down.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, e.g. `http://127.0.0.1:41234`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(mut self) -> std::io::Result<()> {
        self.shutdown()
    }

    fn shutdown(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take().map(|t| t.join()) {
            Some(Ok(res)) => res,
            Some(Err(_)) => Err(std::io::Error::other("server thread panicked")),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves on a background thread.
pub fn spawn(controller: Arc<Controller>, addr: &str) -> std::io::Result<ServerHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind(addr))?;
    let local = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new()
        .name("controller-http".into())
        .spawn(move || {
            runtime.block_on(serve(controller, listener, async {
                let _ = stopped.await;
            }))
        })?;
    Ok(ServerHandle {
        addr: local,
        stop: Some(stop),
        thread: Some(thread),
    })
}
