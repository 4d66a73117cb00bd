//! Writes a synthetic scene (images, cameras, initial points, ground-truth
//! mesh) that the `confsplat` binary can train on.
//!
//! ```text
//! cargo run --release --example synth_scene -- [out_dir] [exposure_jitter]
//! ```

use std::path::PathBuf;

use confsplat::eval::{make_synthetic_scene, SynthConfig};
use confsplat::io::save_scene;

fn main() -> confsplat::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic_scene".into()));
    let jitter = args.next().and_then(|a| a.parse().ok()).unwrap_or(0.0);
    let scene = make_synthetic_scene(&SynthConfig {
        exposure_jitter: jitter,
        ..Default::default()
    })?;
    let path = save_scene(&scene.dataset, &out)?;
    for (i, e) in scene.exposures.iter().enumerate() {
        println!("view {i:2}: exposure x{e:.3}");
    }
    println!("wrote {}", path.display());
    Ok(())
}
