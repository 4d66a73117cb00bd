//! Trains on the analytic plane+sphere scene and reports image and mesh
//! quality.
//!
//! ```text
//! cargo run --release --example train_synthetic -- [iterations] [seed]
//! ```

use std::time::Instant;

use confsplat::eval::{evaluate_meshes, evaluation_region, make_synthetic_scene, MeshEvalConfig, MetricsReport, SynthConfig};
use confsplat::mesh::{extract_mesh, MeshConfig};
use confsplat::train::{TrainConfig, Trainer};

fn main() -> confsplat::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5000);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    let synth = SynthConfig { seed, ..Default::default() };
    let scene_kind = synth.kind;
    let scene = make_synthetic_scene(&synth)?;
    let data = &scene.dataset;
    let mut config = TrainConfig::new(iterations);
    config.seed = seed;
    config.densify.max_primitives = 5000;

    let start = Instant::now();
    let mut trainer = Trainer::new(data, config)?;
    trainer.run(|t| {
        let it = t.iteration;
        if it % 250 == 0 || it == t.config.iterations {
            let window = &t.log[t.log.len().saturating_sub(data.len())..];
            let psnr = window.iter().map(|r| r.psnr).sum::<f64>() / window.len() as f64;
            println!(
                "iter {it:>5}  psnr {psnr:6.2}  primitives {:>5}  loss {:.5}  {:.1}s",
                t.cloud.len(),
                t.log.last().unwrap().loss.total,
                start.elapsed().as_secs_f64()
            );
        }
        Ok(())
    })?;
    let out = trainer.finish();

    let mut report = MetricsReport::empty(0.05, 0, 0);
    let mut psnr = 0.0;
    for (cam, img) in data.cameras.iter().zip(&data.images) {
        let r = confsplat::render::render_image(&out.cloud, cam, false);
        psnr += confsplat::eval::psnr(img, &r.color.clamped01())?;
    }
    report.psnr = Some(psnr / data.len() as f64);
    let t = Instant::now();
    let region = evaluation_region(scene_kind, 0.1);
    let mesh = extract_mesh(&out.cloud, &MeshConfig { region: Some(region), ..Default::default() })?;
    println!("mesh: {} triangles in {:.1}s", mesh.triangles.len(), t.elapsed().as_secs_f64());
    evaluate_meshes(&mesh, data.gt_mesh.as_ref().unwrap(), &MeshEvalConfig::default(), &mut report)?;
    println!("{}", report.to_json());
    Ok(())
}
