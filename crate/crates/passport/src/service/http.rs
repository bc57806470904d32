//! HTTP/JSON surface over the prediction service.
//!
//! Endpoints: `POST /v1/predict`, `GET /v1/predict/detail/{request_id}`,
//! and `GET /v1/health`. Requests are served by a small worker pool over a
//! shared immutable engine; a published snapshot swap is atomic.

use std::net::TcpListener;
use std::sync::Arc;

use tiny_http::{Header, Method, Response, Server};

use crate::error::Error;
use crate::service::{PredictionRequest, ServiceState};

/// Accept-queue depth. The standard library binds listeners with a fixed
/// backlog of 128, which drops SYNs under bursts of hundreds of parallel
/// connections; re-listening on the bound socket raises it.
const LISTEN_BACKLOG: i32 = 1_024;

fn bind_with_backlog(addr: &str) -> crate::error::Result<TcpListener> {
    let listener = TcpListener::bind(addr)
        .map_err(|e| Error::io(format!("binding {addr}"), e))?;
    #[cfg(unix)]
    {
        use std::os::unix::io::AsRawFd;
        // Linux allows a second listen() to enlarge the backlog
        unsafe { libc::listen(listener.as_raw_fd(), LISTEN_BACKLOG) };
    }
    Ok(listener)
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header")
}

fn error_body(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": message, "kind": kind }).to_string()
}

fn status_for(error: &Error) -> u16 {
    match error {
        Error::EmptyPath => 422,
        Error::UnparseablePath(_)
        | Error::UnparseableLine { .. }
        | Error::Invalid(_)
        | Error::BadCountryCode { .. } => 400,
        _ => 500,
    }
}

/// Serve until the process exits. Binds the address, spawns the worker
/// pool, and blocks.
pub fn serve(state: Arc<ServiceState>, addr: &str) -> crate::error::Result<()> {
    let listener = bind_with_backlog(addr)?;
    let bound = listener
        .local_addr()
        .map_err(|e| Error::io("resolving bound address", e))?;
    let server = Server::from_listener(listener, None)
        .map_err(|e| Error::Config(format!("binding {addr}: {e}")))?;
    let server = Arc::new(server);
    eprintln!("listening on http://{bound}");

    let mut handles = Vec::new();
    for _ in 0..state.workers {
        let server = Arc::clone(&server);
        let state = Arc::clone(&state);
        handles.push(std::thread::spawn(move || {
            while let Ok(request) = server.recv() {
                handle(&state, request);
            }
        }));
    }
    for handle in handles {
        let _ = handle.join();
    }
    Ok(())
}

/// Serve on an OS-assigned port; returns the bound address. Used by tests
/// and embedders.
pub fn serve_background(state: Arc<ServiceState>) -> crate::error::Result<std::net::SocketAddr> {
    let listener = bind_with_backlog("127.0.0.1:0")?;
    let server = Server::from_listener(listener, None)
        .map_err(|e| Error::Config(format!("binding ephemeral port: {e}")))?;
    let addr = match server.server_addr() {
        tiny_http::ListenAddr::IP(addr) => addr,
        #[allow(unreachable_patterns)]
        _ => return Err(Error::Config("unexpected listener type".into())),
    };
    let server = Arc::new(server);
    for _ in 0..state.workers {
        let server = Arc::clone(&server);
        let state = Arc::clone(&state);
        std::thread::spawn(move || {
            while let Ok(request) = server.recv() {
                handle(&state, request);
            }
        });
    }
    Ok(addr)
}

fn handle(state: &ServiceState, mut request: tiny_http::Request) {
    let method = request.method().clone();
    let url = request.url().to_string();

    let (status, body) = match (method, url.as_str()) {
        (Method::Post, "/v1/predict") => {
            let mut body = String::new();
            if request.as_reader().read_to_string(&mut body).is_err() {
                (400, error_body("bad_request", "unreadable body"))
            } else {
                predict_endpoint(state, &body)
            }
        }
        (Method::Get, path) if path.starts_with("/v1/predict/detail/") => {
            let id = &path["/v1/predict/detail/".len()..];
            match state.detail(id) {
                Some(detail) => match serde_json::to_string(&detail) {
                    Ok(json) => (200, json),
                    Err(e) => (500, error_body("json", &e.to_string())),
                },
                None => (404, error_body("not_found", "unknown request id")),
            }
        }
        (Method::Get, "/v1/health") => (200, state.health().to_string()),
        _ => (404, error_body("not_found", "no such endpoint")),
    };

    let response = Response::from_string(body)
        .with_status_code(status)
        .with_header(json_header());
    let _ = request.respond(response);
}

fn predict_endpoint(state: &ServiceState, body: &str) -> (u16, String) {
    if state.current_engine().is_none() {
        return (503, error_body("no_model", "no model snapshot loaded"));
    }
    let parsed: PredictionRequest = match serde_json::from_str(body) {
        Ok(parsed) => parsed,
        Err(e) => return (400, error_body("bad_request", &e.to_string())),
    };
    match state.predict(&parsed) {
        Ok(response) => match serde_json::to_string(&response) {
            Ok(json) => (200, json),
            Err(e) => (500, error_body("json", &e.to_string())),
        },
        Err(e) => (status_for(&e), error_body(e.kind(), &e.to_string())),
    }
}
