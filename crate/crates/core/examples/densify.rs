//! One densification event on a hand-made cloud: a small primitive with a
//! large gradient is cloned, a large one is split, a faint one is pruned and
//! a low-confidence one is held back.

use confsplat::scene::{Gaussian, GaussianCloud};
use confsplat::train::{densify_and_prune, DensifyConfig};
use confsplat::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut unsure = Gaussian::isotropic(Vec3::new(0.0, 1.0, 0.0), 0.005, 0.8, [0.5; 3]);
    unsure.gamma = 0.5f64.ln();
    let mut cloud = GaussianCloud::new(vec![
        Gaussian::isotropic(Vec3::zeros(), 0.005, 0.8, [0.5; 3]),
        Gaussian::isotropic(Vec3::new(1.0, 0.0, 0.0), 0.2, 0.8, [0.5; 3]),
        Gaussian::isotropic(Vec3::new(0.0, 0.0, 1.0), 0.05, 0.001, [0.5; 3]),
        unsure,
    ]);
    for i in 0..4 {
        cloud.densify.grad_accum[i] = 3e-4;
        cloud.densify.count[i] = 1;
    }
    let out = densify_and_prune(&mut cloud, &DensifyConfig::default(), 1.0, &mut ChaCha8Rng::seed_from_u64(0));
    println!("cloned {}, split {}, pruned {}, now {} primitives", out.cloned, out.split, out.pruned, cloud.len());
    for (g, src) in cloud.gaussians().iter().zip(&out.sources) {
        println!(
            "  at ({:+.3}, {:+.3}, {:+.3})  scale {:.4}  {}",
            g.position.x,
            g.position.y,
            g.position.z,
            g.scales().max(),
            match src {
                Some(s) => format!("kept row {s}"),
                None => "new".to_string(),
            }
        );
    }
}
