//! Live WebSocket service.
//!
//! One OS thread owns the [`Session`] and steps it at wall-clock rate.
//! Connections push commands into a single queue drained between steps and
//! receive decimated frames over a broadcast channel. Slow clients lose
//! frames; the simulation never changes `dt`.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tracing::{debug, info, warn};

use super::protocol::{ClientMessage, ServerMessage};
use super::{RuntimeError, Session};

/// Steps executed back to back before the pacer gives up on a backlog.
const MAX_CATCH_UP: u32 = 8;
const FRAME_BUFFER: usize = 64;

type Outbox = mpsc::UnboundedSender<String>;

enum Command {
    Join(Outbox),
    Client(ClientMessage, Outbox),
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    frames: broadcast::Sender<Arc<str>>,
}

fn apply(session: &mut Session, cmd: Command) {
    match cmd {
        Command::Join(out) => {
            let _ = out.send(session.hello().to_json());
        }
        Command::Client(msg, out) => {
            if let Some(reply) = session.handle(msg) {
                let _ = out.send(reply.to_json());
            }
        }
    }
}

/// Applies queued commands; false once every sender is gone.
fn drain(session: &mut Session, rx: &mut mpsc::UnboundedReceiver<Command>) -> bool {
    loop {
        match rx.try_recv() {
            Ok(cmd) => apply(session, cmd),
            Err(mpsc::error::TryRecvError::Empty) => return true,
            Err(mpsc::error::TryRecvError::Disconnected) => return false,
        }
    }
}

fn simulation_loop(
    mut session: Session,
    mut rx: mpsc::UnboundedReceiver<Command>,
    frames: broadcast::Sender<Arc<str>>,
) {
    let step = Duration::from_secs_f64(session.config().dt);
    let mut next = Instant::now();
    loop {
        if !drain(&mut session, &mut rx) {
            debug!("command queue closed; simulation loop exiting");
            return;
        }
        if session.playback() == super::Playback::Paused {
            next = Instant::now() + step;
            std::thread::sleep(step.min(Duration::from_millis(5)));
            continue;
        }
        let mut done = 0;
        while Instant::now() >= next && done < MAX_CATCH_UP {
            if !drain(&mut session, &mut rx) {
                return;
            }
            match session.advance() {
                Ok(Some(frame)) => {
                    let _ = frames.send(Arc::from(frame.to_json()));
                }
                Ok(None) => {}
                Err(e) => {
                    warn!(error = %e, "simulation halted");
                    let _ = frames.send(Arc::from(ServerMessage::error(e.to_string()).to_json()));
                    break;
                }
            }
            next += step;
            done += 1;
        }
        let now = Instant::now();
        if now >= next + step * MAX_CATCH_UP {
            debug!("pacer behind wall clock; dropping backlog");
            next = now;
        }
        if let Some(wait) = next.checked_duration_since(Instant::now()) {
            std::thread::sleep(wait.min(Duration::from_millis(2)));
        }
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| handle_socket(socket, state))
}

async fn handle_socket(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (out, mut outbox) = mpsc::unbounded_channel::<String>();
    let mut frames = state.frames.subscribe();
    if state.commands.send(Command::Join(out.clone())).is_err() {
        return;
    }
    // frames are withheld until the hello has gone out
    let mut greeted = false;

    loop {
        tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(text))) => match ClientMessage::parse(text.as_str()) {
                    Ok(msg) => {
                        if state.commands.send(Command::Client(msg, out.clone())).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = out.send(ServerMessage::error(format!("malformed message: {e}")).to_json());
                    }
                },
                Some(Ok(Message::Binary(_))) => {
                    let _ = out.send(ServerMessage::error("binary messages are not supported").to_json());
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            Some(reply) = outbox.recv() => {
                greeted = true;
                if sink.send(Message::Text(reply.into())).await.is_err() {
                    break;
                }
            }
            frame = frames.recv() => match frame {
                Ok(f) if greeted => {
                    if sink.send(Message::Text(f.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                Ok(_) => {}
                Err(broadcast::error::RecvError::Lagged(n)) => debug!(dropped = n, "client lagging"),
                Err(broadcast::error::RecvError::Closed) => break,
            },
        }
    }
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, RuntimeError> {
    Ok(TcpListener::bind(addr).await?)
}

/// Serves `session` on `/ws` until `shutdown` resolves.
pub async fn serve_with_shutdown(
    session: Session,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), RuntimeError> {
    let (commands, rx) = mpsc::unbounded_channel();
    let (frames, _) = broadcast::channel(FRAME_BUFFER);
    let loop_frames = frames.clone();
    // the loop exits once the router and every connection have dropped their senders
    std::thread::Builder::new()
        .name("simulation".into())
        .spawn(move || simulation_loop(session, rx, loop_frames))?;

    let app = Router::new()
        .route("/ws", get(ws_handler))
        .with_state(AppState { commands, frames });
    info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(RuntimeError::from)
}

pub async fn serve(session: Session, listener: TcpListener) -> Result<(), RuntimeError> {
    serve_with_shutdown(session, listener, std::future::pending()).await
}
