//! Serve a beating heart over WebSocket at ws://127.0.0.1:<port>/ws.
//! Send e.g. {"type":"pause"} or
//! {"type":"set_params","region":1,"harmonics":[{"a":0.1,"f":2.0,"phi":0}],"amplitude_scale":1}.
//!
//!     cargo run --example live_server -- [port]

use organ_motion::actuation::ActuationSignal;
use organ_motion::dynamics::SimConfig;
use organ_motion::lattice::{Material, RegionRule, RegionSpec};
use organ_motion::runtime::{server, SceneFile, Session};
use organ_motion::synthetic;
use organ_motion::Vec3;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter("info").init();
    let port: u16 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8080);
    let mesh = synthetic::heart(24, 32);
    let (lo, hi) = mesh.bounds();
    let valve = RegionRule {
        pinned: true,
        ..RegionRule::boxed(
            "valve",
            Vec3::new(lo.x - 1.0, hi.y - 0.2 * (hi.y - lo.y), lo.z - 1.0),
            hi + Vec3::repeat(1.0),
        )
    };
    let spec = RegionSpec(vec![valve, RegionRule::default_region("wall")]);
    let scene = SceneFile::build(mesh, 8, &spec, Material::default())?;
    println!("{}", scene.summary());
    let signals = vec![ActuationSignal::default(), ActuationSignal::sine(0.12, 1.2, 0.0)];
    let session = Session::new(scene, signals, SimConfig::default(), 4)?;
    let listener = server::bind(([127, 0, 0, 1], port).into()).await?;
    println!("ws://{}/ws", listener.local_addr()?);
    server::serve(session, listener).await?;
    Ok(())
}
