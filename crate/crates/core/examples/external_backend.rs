//! Drives the search through ports served by a child process over the
//! line-delimited JSON protocol. The child is this same example started
//! with `--serve`, answering with the built-in ports.
//!
//! cargo run --release --example external_backend

use std::sync::Arc;

use segtest::backends::{external, BackendBinding, ExternalBackend, Genome, LaunchSpec, PortBinding, Ports};
use segtest::fitness::{GateConfig, Thresholds};
use segtest::features::DistanceMetric;
use segtest::search::{run_variant, SearchParams, SearchSetup, Variant};
use segtest::{Profile, Result};

const SIZE: u32 = 48;

fn main() -> Result<()> {
    if std::env::args().nth(1).as_deref() == Some("--serve") {
        let ports = Ports::builtin(Profile::Urban, SIZE);
        return external::serve(&ports, std::io::stdin().lock(), std::io::stdout().lock());
    }
    let exe = std::env::current_exe().map_err(|e| segtest::Error::io("current executable", e))?;
    let spec = LaunchSpec::new([exe.to_string_lossy().into_owned(), "--serve".into()]);

    // one request by hand
    let mut backend = ExternalBackend::spawn(&spec, Arc::new(segtest::raster::ClassTable::for_profile(Profile::Urban)))?;
    println!("capabilities: {:?}", backend.capabilities());
    let scene = backend.generate_scene(&Genome::pose(0.0, 0.0, 0.0))?;
    println!("scene {}x{}, on road {}", scene.simulated.width(), scene.simulated.height(), scene.on_road);

    // a short search with every port external, checked against the built-in one
    let external = PortBinding::External(spec);
    let binding = BackendBinding {
        scene: external.clone(),
        realizer: external.clone(),
        predictor: external.clone(),
        extractor: external,
    };
    let remote = Ports::from_binding(Profile::Urban, SIZE, None, &binding, 2)?;
    let local = Ports::builtin(Profile::Urban, SIZE);
    let thresholds = Thresholds::new(Profile::Urban, DistanceMetric::Feature, 2.0, Some(0.05))?;
    let params = SearchParams { population_size: 6, generations: 4, initial_populations: 2, ..SearchParams::default() };
    let mut manifests = Vec::new();
    for ports in [&remote, &local] {
        let setup = SearchSetup { ports, gates: GateConfig::for_profile(Profile::Urban), thresholds, params, seed: 3 };
        let mut manifest = Vec::new();
        let run = run_variant(&setup, Variant::Multi, &mut manifest)?;
        println!("{} evaluations, {} archived, calls {:?}", run.evaluations, run.members.len(), run.calls);
        manifests.push(manifest);
    }
    println!("manifests identical: {}", manifests[0] == manifests[1]);
    Ok(())
}
