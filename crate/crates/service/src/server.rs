//! WebSocket endpoint shared by live and replay sessions.
//!
//! One producer (the simulation loop or the replay driver) publishes into a
//! broadcast channel; each client gets its own subscriber. A client that falls
//! behind loses its oldest frames, which are counted in [`ServerHandle::dropped`].

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tandemlift::telemetry::LogRow;
use tandemlift::{ScenarioConfig, Simulation};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::JoinHandle;

use crate::live::{self, Envelope, LiveLoop, LiveOptions};
use crate::replay::{self, ReplayOptions};
use crate::wire::{parse_command, Mode, Outgoing, SessionInfo, WireError};

const FRAME_BUFFER: usize = 1024;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] tandemlift::SimError),
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

struct Session {
    mode: Mode,
    info: SessionInfo,
    frames: broadcast::Sender<Arc<str>>,
    commands: Option<mpsc::UnboundedSender<Envelope>>,
    dropped: Arc<AtomicU64>,
    started: watch::Sender<bool>,
}

/// A running server bound to `addr`.
pub struct ServerHandle {
    pub addr: SocketAddr,
    /// Frames dropped because a client could not keep up.
    pub dropped: Arc<AtomicU64>,
    shutdown: oneshot::Sender<()>,
    server: JoinHandle<()>,
    producer: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(self) {
        let _ = self.shutdown.send(());
        self.producer.abort();
        let _ = self.server.await;
    }

    /// Runs until the process receives Ctrl-C.
    pub async fn run_until_interrupted(self) {
        if let Err(e) = tokio::signal::ctrl_c().await {
            log::error!("cannot listen for Ctrl-C: {e}");
        }
        log::info!("shutting down");
        self.shutdown().await;
    }

    pub fn dropped_frames(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

pub async fn start_live(
    cfg: ScenarioConfig,
    scenario: &str,
    opts: LiveOptions,
    addr: SocketAddr,
) -> Result<ServerHandle, ServiceError> {
    if opts.decimate == 0 {
        return Err(ServiceError::InvalidOption("decimate must be >= 1".into()));
    }
    let info = SessionInfo {
        mode: Mode::Live,
        scenario: scenario.to_string(),
        dt: cfg.dt,
        decimate: opts.decimate,
        threshold: Some(cfg.admittance.threshold),
        damping: Some(cfg.admittance.damping.into()),
        hold_timeout: Some(opts.hold_timeout),
        speed: None,
    };
    let sim = Simulation::new(cfg)?;
    let (frames, _) = broadcast::channel(FRAME_BUFFER);
    let (tx, rx) = mpsc::unbounded_channel();
    let listener = bind(addr).await?;
    let producer = tokio::spawn(live::run(LiveLoop::new(sim, opts, frames.clone()), rx));
    Ok(launch(listener, Mode::Live, info, frames, Some(tx), producer))
}

pub async fn start_replay(
    rows: Vec<LogRow>,
    log_name: &str,
    opts: ReplayOptions,
    addr: SocketAddr,
) -> Result<ServerHandle, ServiceError> {
    if !(opts.speed > 0.0 && opts.speed.is_finite()) {
        return Err(ServiceError::InvalidOption(format!("speed must be > 0, got {}", opts.speed)));
    }
    if opts.decimate == 0 {
        return Err(ServiceError::InvalidOption("decimate must be >= 1".into()));
    }
    let info = SessionInfo {
        mode: Mode::Replay,
        scenario: log_name.to_string(),
        dt: replay::log_dt(&rows),
        decimate: opts.decimate,
        threshold: None,
        damping: None,
        hold_timeout: None,
        speed: Some(opts.speed),
    };
    let (frames, _) = broadcast::channel(FRAME_BUFFER);
    let listener = bind(addr).await?;
    let (started, started_rx) = watch::channel(false);
    let producer = tokio::spawn(replay::run(Arc::new(rows), opts, frames.clone(), started_rx));
    let handle = launch_with(listener, Mode::Replay, info, frames, None, producer, started);
    Ok(handle)
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })
}

fn launch(
    listener: TcpListener,
    mode: Mode,
    info: SessionInfo,
    frames: broadcast::Sender<Arc<str>>,
    commands: Option<mpsc::UnboundedSender<Envelope>>,
    producer: JoinHandle<()>,
) -> ServerHandle {
    let (started, _) = watch::channel(false);
    launch_with(listener, mode, info, frames, commands, producer, started)
}

fn launch_with(
    listener: TcpListener,
    mode: Mode,
    info: SessionInfo,
    frames: broadcast::Sender<Arc<str>>,
    commands: Option<mpsc::UnboundedSender<Envelope>>,
    producer: JoinHandle<()>,
    started: watch::Sender<bool>,
) -> ServerHandle {
    let addr = listener.local_addr().expect("bound listener has an address");
    let dropped = Arc::new(AtomicU64::new(0));
    let session = Arc::new(Session {
        mode,
        info,
        frames,
        commands,
        dropped: dropped.clone(),
        started,
    });
    let app = Router::new()
        .route("/ws", get(upgrade))
        .route("/health", get(|| async { "ok" }))
        .with_state(session);
    let (shutdown, signal) = oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        let serve = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = signal.await;
        });
        if let Err(e) = serve.await {
            log::error!("server error: {e}");
        }
    });
    log::info!("{mode:?} session listening on ws://{addr}/ws");
    ServerHandle {
        addr,
        dropped,
        shutdown,
        server,
        producer,
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(session): State<Arc<Session>>) -> Response {
    ws.on_upgrade(move |socket| client(socket, session))
}

async fn client(socket: WebSocket, session: Arc<Session>) {
    let (mut sink, mut stream) = socket.split();
    // subscribe before announcing, so a replay started by this client is seen from its first row
    let mut frames = session.frames.subscribe();
    let hello = Outgoing::config(session.info.clone()).to_json();
    if sink.send(Message::Text(hello)).await.is_err() {
        return;
    }
    session.started.send_replace(true);

    let (reply_tx, mut replies) = mpsc::unbounded_channel::<Arc<str>>();
    let writer = async {
        loop {
            let text = tokio::select! {
                f = frames.recv() => match f {
                    Ok(text) => text,
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        log::warn!("client fell behind, dropped {n} frames");
                        session.dropped.fetch_add(n, Ordering::Relaxed);
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                r = replies.recv() => match r {
                    Some(text) => text,
                    None => break,
                },
            };
            if sink.send(Message::Text(text.to_string())).await.is_err() {
                break;
            }
        }
    };
    let reader = async {
        while let Some(Ok(msg)) = stream.next().await {
            match msg {
                Message::Text(text) => on_text(&session, &text, &reply_tx),
                Message::Close(_) => break,
                _ => {}
            }
        }
    };
    tokio::select! {
        _ = writer => {}
        _ = reader => {}
    }
}

fn on_text(session: &Session, text: &str, reply: &mpsc::UnboundedSender<Arc<str>>) {
    let answer = |e: WireError| {
        let _ = reply.send(Outgoing::error(&e).to_json().into());
    };
    let msg = match parse_command(text) {
        Ok(m) => m,
        Err(e) => return answer(e),
    };
    let Some(commands) = session.commands.as_ref().filter(|_| session.mode == Mode::Live) else {
        return answer(WireError::ReplayMode);
    };
    log::debug!("command {:?} from {:?}", msg.command, msg.client);
    let envelope = Envelope {
        command: msg.command,
        reply: Some(reply.clone()),
    };
    if commands.send(envelope).is_err() {
        answer(WireError::Aborted("simulation loop has stopped".into()));
    }
}
