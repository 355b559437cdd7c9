use std::time::Duration;

use futures::{SinkExt, StreamExt};
use organ_motion::actuation::{ActuationSignal, Harmonic};
use organ_motion::dynamics::SimConfig;
use organ_motion::lattice::{Material, RegionSpec};
use organ_motion::runtime::protocol::{ClientMessage, ServerMessage};
use organ_motion::runtime::{server, SceneFile, Session};
use organ_motion::synthetic;
use organ_motion::Vec3;
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio::time::timeout;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn start() -> (String, oneshot::Sender<()>) {
    let scene = SceneFile::build(synthetic::unit_cube(), 2, &RegionSpec::default(), Material::default()).unwrap();
    let session = Session::new(scene, vec![ActuationSignal::sine(0.1, 1.0, 0.0)], SimConfig::default(), 4).unwrap();
    let listener = server::bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = oneshot::channel::<()>();
    tokio::spawn(server::serve_with_shutdown(session, listener, async {
        let _ = stopped.await;
    }));
    (format!("ws://{addr}/ws"), stop)
}

async fn recv(ws: &mut Client) -> ServerMessage {
    loop {
        let msg = timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("server message within 5 s")
            .expect("stream open")
            .expect("websocket ok");
        if let Message::Text(text) = msg {
            return serde_json::from_str(text.as_str()).expect("valid server message");
        }
    }
}

/// Next message that is not a frame.
async fn reply(ws: &mut Client) -> ServerMessage {
    loop {
        match recv(ws).await {
            ServerMessage::Frame { .. } => continue,
            other => return other,
        }
    }
}

async fn send(ws: &mut Client, msg: &ClientMessage) {
    ws.send(Message::Text(msg.to_json().into())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn hello_then_frames() {
    let (url, _stop) = start().await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    match recv(&mut ws).await {
        ServerMessage::Hello { mesh, binding, regions, dt } => {
            assert_eq!(mesh.vertex_count(), 8);
            assert_eq!(binding.vertices.len(), 8);
            assert_eq!(regions.len(), 1);
            assert_eq!(regions[0].harmonics, vec![Harmonic::new(0.1, 1.0, 0.0)]);
            assert_eq!(dt, 1.0 / 240.0);
        }
        other => panic!("expected hello, got {other:?}"),
    }
    let mut last = 0;
    for _ in 0..3 {
        match recv(&mut ws).await {
            ServerMessage::Frame { step, positions, .. } => {
                assert_eq!(positions.len(), 8);
                assert_eq!(step % 4, 0);
                assert!(step > last);
                last = step;
            }
            other => panic!("expected frame, got {other:?}"),
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn set_params_is_reflected_in_snapshot() {
    let (url, _stop) = start().await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMessage::Hello { .. }));
    send(
        &mut ws,
        &ClientMessage::SetParams {
            region: 0,
            harmonics: vec![Harmonic::new(0.2, 2.0, 0.0)],
            amplitude_scale: 0.5,
        },
    )
    .await;
    send(&mut ws, &ClientMessage::Snapshot).await;
    match reply(&mut ws).await {
        ServerMessage::Snapshot { regions, paused, .. } => {
            assert!(!paused);
            assert_eq!(regions[0].amplitude_scale, 0.5);
            assert_eq!(regions[0].harmonics.len(), 1);
            assert_eq!(regions[0].harmonics[0].a, 0.2);
            assert_eq!(regions[0].harmonics[0].f, 2.0);
        }
        other => panic!("expected snapshot, got {other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bad_input_gets_error_and_session_survives() {
    let (url, _stop) = start().await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMessage::Hello { .. }));

    ws.send(Message::Text("{not json".into())).await.unwrap();
    assert!(matches!(reply(&mut ws).await, ServerMessage::Error { .. }));

    send(
        &mut ws,
        &ClientMessage::SetParams {
            region: 3,
            harmonics: vec![],
            amplitude_scale: 1.0,
        },
    )
    .await;
    match reply(&mut ws).await {
        ServerMessage::Error { msg } => assert!(msg.contains("region"), "{msg}"),
        other => panic!("expected error, got {other:?}"),
    }

    send(
        &mut ws,
        &ClientMessage::Poke {
            point: Vec3::repeat(0.25),
            force: Vec3::new(0.0, 1.0, 0.0),
            radius: 0.5,
            duration: 0.1,
        },
    )
    .await;
    send(&mut ws, &ClientMessage::Snapshot).await;
    assert!(matches!(reply(&mut ws).await, ServerMessage::Snapshot { .. }));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn pause_stops_the_clock() {
    let (url, _stop) = start().await;
    let (mut ws, _) = connect_async(&url).await.unwrap();
    assert!(matches!(recv(&mut ws).await, ServerMessage::Hello { .. }));
    send(&mut ws, &ClientMessage::Pause).await;
    send(&mut ws, &ClientMessage::Snapshot).await;
    let first = match reply(&mut ws).await {
        ServerMessage::Snapshot { step, paused, .. } => {
            assert!(paused);
            step
        }
        other => panic!("expected snapshot, got {other:?}"),
    };
    tokio::time::sleep(Duration::from_millis(100)).await;
    send(&mut ws, &ClientMessage::Snapshot).await;
    match reply(&mut ws).await {
        ServerMessage::Snapshot { step, .. } => assert_eq!(step, first),
        other => panic!("expected snapshot, got {other:?}"),
    }
    send(&mut ws, &ClientMessage::Reset).await;
    send(&mut ws, &ClientMessage::Snapshot).await;
    match reply(&mut ws).await {
        ServerMessage::Snapshot { step, .. } => assert_eq!(step, 0),
        other => panic!("expected snapshot, got {other:?}"),
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn clients_see_the_same_frames() {
    let (url, _stop) = start().await;
    let (mut a, _) = connect_async(&url).await.unwrap();
    let (mut b, _) = connect_async(&url).await.unwrap();
    assert!(matches!(recv(&mut a).await, ServerMessage::Hello { .. }));
    assert!(matches!(recv(&mut b).await, ServerMessage::Hello { .. }));

    let mut frames_a = std::collections::BTreeMap::new();
    for _ in 0..10 {
        if let ServerMessage::Frame { step, positions, .. } = recv(&mut a).await {
            frames_a.insert(step, positions);
        }
    }
    let mut matched = 0;
    for _ in 0..20 {
        if let ServerMessage::Frame { step, positions, .. } = recv(&mut b).await {
            if let Some(p) = frames_a.get(&step) {
                assert_eq!(p, &positions, "step {step}");
                matched += 1;
            }
        }
    }
    assert!(matched > 0, "no overlapping frames");
}
