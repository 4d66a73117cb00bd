//! Scores progressively noisier copies of the ground-truth mesh with F1 and
//! Chamfer distance.

use confsplat::eval::synthetic::ground_truth_mesh;
use confsplat::eval::{evaluate_meshes, MeshEvalConfig, MetricsReport, SceneKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> confsplat::Result<()> {
    let gt = ground_truth_mesh(SceneKind::PlaneSphere);
    let cfg = MeshEvalConfig {
        samples: 50_000,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("noise    precision  recall   f1      chamfer");
    for sigma in [0.0, 0.01, 0.03, 0.06] {
        let mut pred = gt.clone();
        if sigma > 0.0 {
            let n = Normal::new(0.0, sigma).expect("positive sigma");
            for v in &mut pred.vertices {
                v.iter_mut().for_each(|c| *c += n.sample(&mut rng));
            }
        }
        let mut r = MetricsReport::empty(cfg.tau, cfg.samples, cfg.seed);
        evaluate_meshes(&pred, &gt, &cfg, &mut r)?;
        println!(
            "{sigma:<8} {:<10.4} {:<8.4} {:<7.4} {:.4}",
            r.precision.unwrap(),
            r.recall.unwrap(),
            r.f1.unwrap(),
            r.chamfer.unwrap()
        );
    }
    Ok(())
}
