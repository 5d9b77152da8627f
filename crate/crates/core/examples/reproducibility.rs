//! Simulation output depends only on the seed: the same configuration on
//! one and on four worker threads gives identical samples, and samples
//! round-trip through the binary export.
//!
//! ```text
//! cargo run --release --example reproducibility
//! ```

use smalltime::models::HestonParams;
use smalltime::simulate::{simulate_terminal, worker_pool, McSample, SimConfig};
use smalltime::ModelSpec;

fn main() -> smalltime::Result<()> {
    let p = HestonParams { r: 0.01, kappa: 2.0, theta: 0.04, xi: 0.4, rho: -0.5 };
    let model = ModelSpec::heston(100.0, 0.04, p)?;
    let cfg = SimConfig::new(50_000, 2024).with_chunk_size(1024).with_max_step(1e-3);
    let run = |threads| worker_pool(Some(threads)).map(|pool| pool.install(|| simulate_terminal(&model, 0.1, &cfg)));
    let one = run(1)??;
    let four = run(4)??;
    println!("1 vs 4 threads identical: {}", one.values() == four.values());

    let dir = std::env::temp_dir().join("smalltime-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("heston.bin");
    one.save_binary(&path)?;
    let back = McSample::load_binary(&path)?;
    println!("binary round trip identical: {}", back.values() == one.values());
    println!("model hash {}, columns {:?}", back.meta().model_hash, back.labels());
    Ok(())
}
