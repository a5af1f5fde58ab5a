//! Single-port network front end of the live loop.
//!
//! A connection whose first bytes look like an HTTP request line is served
//! by the HTTP router (`GET /state`, `GET /ws`, static dashboard assets).
//! Anything else is a raw newline-delimited JSON session: control messages
//! in, events out.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use hyper_util::rt::{TokioExecutor, TokioIo};
use hyper_util::service::TowerToHyperService;
use nlmimo::ra::McsThresholdTable;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::broadcast;
use tokio::task::JoinHandle as TaskHandle;

use crate::control::{ControlMessage, ErrorEvent, Event, LiveConfig};
use crate::live::{live_loop, Command, LiveShared, Outbound};

const PLACEHOLDER_INDEX: &str = "<!doctype html><title>nlmimo</title>\
<p>The dashboard is not built. Live state: <a href=\"/state\">/state</a>.</p>";

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    pub addr: Option<SocketAddr>,
    /// Directory holding the dashboard build.
    pub assets: Option<PathBuf>,
}

struct Ctx {
    shared: Arc<LiveShared>,
    inbox: Mutex<mpsc::Sender<Command>>,
    events: broadcast::Sender<Arc<Outbound>>,
    controller: Mutex<Option<u64>>,
    next_client: AtomicU64,
    assets: Option<PathBuf>,
}

impl Ctx {
    /// Parses one client line and forwards it, or returns the error event
    /// owed to the sender.
    fn handle_line(&self, client: u64, line: &str) -> Option<Event> {
        let msg: ControlMessage = match serde_json::from_str(line) {
            Ok(m) => m,
            Err(e) => return Some(Event::Error(ErrorEvent::new("parse", e.to_string(), None))),
        };
        {
            let mut c = self.controller.lock().expect("controller lock");
            match *c {
                None => *c = Some(client),
                Some(owner) if owner != client => {
                    return Some(Event::Error(ErrorEvent::new(
                        "read_only",
                        "another client controls this session",
                        Some(msg.kind()),
                    )))
                }
                _ => {}
            }
        }
        let sent = self.inbox.lock().expect("inbox lock").send(Command::Control { client, msg });
        sent.err()
            .map(|_| Event::Error(ErrorEvent::new("stopped", "the simulation loop has stopped", None)))
    }

    fn release(&self, client: u64) {
        let mut c = self.controller.lock().expect("controller lock");
        if *c == Some(client) {
            *c = None;
        }
    }

    fn new_client(&self) -> u64 {
        self.next_client.fetch_add(1, Ordering::SeqCst)
    }
}

/// Line for `client`, if the event is meant for it.
fn render(client: u64, out: &Outbound) -> Option<String> {
    match out.to {
        Some(to) if to != client => None,
        _ => Some(out.event.to_line()),
    }
}

/// Running service: live loop thread plus accept task.
pub struct Service {
    pub addr: SocketAddr,
    pub shared: Arc<LiveShared>,
    inbox: mpsc::Sender<Command>,
    live: Option<JoinHandle<()>>,
    accept: TaskHandle<()>,
}

impl Service {
    /// Binds the listener, then starts the loop. Fails if the port is taken.
    pub async fn start(init: LiveConfig, thresholds: Option<McsThresholdTable>, opts: ServeOptions) -> std::io::Result<Self> {
        let addr = opts.addr.unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 8080)));
        let listener = TcpListener::bind(addr).await?;
        let addr = listener.local_addr()?;

        let shared = Arc::new(LiveShared::new(init.clone()));
        let (inbox, rx) = mpsc::channel();
        let (events, _) = broadcast::channel(256);
        let live = {
            let shared = shared.clone();
            let events = events.clone();
            std::thread::Builder::new()
                .name("live-loop".into())
                .spawn(move || {
                    live_loop(init, thresholds, rx, &shared, |o| {
                        let _ = events.send(Arc::new(o));
                    })
                })?
        };
        let ctx = Arc::new(Ctx {
            shared: shared.clone(),
            inbox: Mutex::new(inbox.clone()),
            events,
            controller: Mutex::new(None),
            next_client: AtomicU64::new(1),
            assets: opts.assets,
        });
        let accept = tokio::spawn(accept_loop(listener, ctx));
        Ok(Self {
            addr,
            shared,
            inbox,
            live: Some(live),
            accept,
        })
    }

    /// Stops accepting, stops the loop and waits for it.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.accept.abort();
        let _ = self.inbox.send(Command::Stop);
        if let Some(h) = self.live.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.stop();
    }
}

async fn accept_loop(listener: TcpListener, ctx: Arc<Ctx>) {
    let router = router(ctx.clone());
    loop {
        let Ok((stream, _)) = listener.accept().await else {
            continue;
        };
        let ctx = ctx.clone();
        let router = router.clone();
        tokio::spawn(async move {
            let _ = stream.set_nodelay(true);
            if looks_like_http(&stream).await {
                let svc = TowerToHyperService::new(router);
                let _ = hyper_util::server::conn::auto::Builder::new(TokioExecutor::new())
                    .serve_connection_with_upgrades(TokioIo::new(stream), svc)
                    .await;
            } else {
                ndjson_session(stream, ctx).await;
            }
        });
    }
}

/// HTTP request lines start with an upper-case method; protocol lines
/// start with `{`. Silent clients are protocol clients.
async fn looks_like_http(stream: &TcpStream) -> bool {
    let mut buf = [0u8; 1];
    match tokio::time::timeout(Duration::from_millis(250), stream.peek(&mut buf)).await {
        Ok(Ok(1)) => buf[0].is_ascii_uppercase(),
        _ => false,
    }
}

async fn ndjson_session(stream: TcpStream, ctx: Arc<Ctx>) {
    let client = ctx.new_client();
    let mut events = ctx.events.subscribe();
    let (read, mut write) = stream.into_split();
    let mut lines = BufReader::new(read).lines();
    loop {
        tokio::select! {
            line = lines.next_line() => {
                let Ok(Some(line)) = line else { break };
                let line = line.trim();
                let reply = if line.is_empty() { None } else { ctx.handle_line(client, line) };
                if let Some(ev) = reply {
                    if write.write_all(format!("{}\n", ev.to_line()).as_bytes()).await.is_err() {
                        break;
                    }
                }
            }
            ev = events.recv() => {
                match ev {
                    Ok(out) => {
                        if let Some(line) = render(client, &out) {
                            if write.write_all(format!("{line}\n").as_bytes()).await.is_err() {
                                break;
                            }
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => {}
                    Err(broadcast::error::RecvError::Closed) => break,
                }
            }
        }
    }
    ctx.release(client);
}

fn router(ctx: Arc<Ctx>) -> Router {
    Router::new()
        .route("/state", get(state))
        .route("/ws", get(ws_upgrade))
        .fallback(get(asset))
        .with_state(ctx)
}

async fn state(State(ctx): State<Arc<Ctx>>) -> Json<LiveConfig> {
    Json(ctx.shared.config())
}

async fn ws_upgrade(State(ctx): State<Arc<Ctx>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| ws_session(socket, ctx))
}

/// Same protocol as the raw socket, one JSON document per text message.
async fn ws_session(mut socket: WebSocket, ctx: Arc<Ctx>) {
    let client = ctx.new_client();
    let mut events = ctx.events.subscribe();
    loop {
        tokio::select! {
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let mut reply = Vec::new();
                for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
                    reply.extend(ctx.handle_line(client, line));
                }
                for ev in reply {
                    if socket.send(Message::Text(ev.to_line().into())).await.is_err() {
                        break;
                    }
                }
            }
            ev = events.recv() => {
                match ev {
                    Ok(out) => {
                        if let Some(line) = render(client, &out) {
                            if socket.send(Message::Text(line.into())).await.is_err() {
                                break;
                            }
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => {}
                    Err(broadcast::error::RecvError::Closed) => break,
                }
            }
        }
    }
    ctx.release(client);
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("ico") => "image/x-icon",
        Some("woff2") => "font/woff2",
        _ => "application/octet-stream",
    }
}

/// Request path below the assets root, or `None` if it tries to escape.
fn asset_path(root: &Path, uri_path: &str) -> Option<PathBuf> {
    let rel = uri_path.trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let mut out = root.to_path_buf();
    for c in Path::new(rel).components() {
        match c {
            Component::Normal(p) => out.push(p),
            _ => return None,
        }
    }
    Some(out)
}

async fn asset(State(ctx): State<Arc<Ctx>>, uri: Uri) -> Response {
    let index = matches!(uri.path(), "/" | "/index.html");
    if let Some(root) = &ctx.assets {
        if let Some(path) = asset_path(root, uri.path()) {
            if let Ok(body) = tokio::fs::read(&path).await {
                return ([(header::CONTENT_TYPE, content_type(&path))], body).into_response();
            }
        }
    }
    if index {
        return ([(header::CONTENT_TYPE, "text/html; charset=utf-8")], PLACEHOLDER_INDEX).into_response();
    }
    (StatusCode::NOT_FOUND, "not found").into_response()
}
