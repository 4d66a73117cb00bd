//! Renders a handful of Gaussians from a ring of cameras and writes color,
//! depth and confidence buffers.
//!
//! ```text
//! cargo run --release --example render_views -- [out_dir]
//! ```

use std::path::PathBuf;

use confsplat::io::{save_image, save_pfm};
use confsplat::render::render_image;
use confsplat::scene::{Camera, Gaussian, GaussianCloud};
use confsplat::Vec3;

fn main() -> confsplat::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_views_out".into()));
    std::fs::create_dir_all(&out).map_err(|e| confsplat::Error::io(&out, e))?;

    let mut cloud = GaussianCloud::new(vec![
        Gaussian::isotropic(Vec3::new(0.0, 0.0, 0.0), 0.15, 0.9, [0.9, 0.2, 0.2]),
        Gaussian::isotropic(Vec3::new(0.3, 0.1, 0.0), 0.1, 0.8, [0.2, 0.8, 0.3]),
        Gaussian::isotropic(Vec3::new(-0.2, 0.25, 0.1), 0.12, 0.7, [0.2, 0.3, 0.9]),
    ]);
    // A flat disc: one short axis gives a well-defined normal.
    let mut disc = Gaussian::isotropic(Vec3::new(0.0, -0.3, -0.1), 0.25, 0.95, [0.8, 0.8, 0.7]);
    disc.log_scale.z = 0.01f64.ln();
    disc.gamma = 1.0;
    cloud.push(disc);

    for i in 0..4 {
        let a = i as f64 * std::f64::consts::FRAC_PI_2;
        let eye = Vec3::new(1.5 * a.cos(), 1.5 * a.sin(), 1.0);
        let cam = Camera::look_at(eye, Vec3::zeros(), Vec3::z(), 0.9, 96, 96, i)?;
        let r = render_image(&cloud, &cam, false);
        save_image(&r.color, &out.join(format!("view_{i}.png")))?;
        save_pfm(&r.depth, &out.join(format!("view_{i}_depth.pfm")))?;
        save_pfm(&r.confidence, &out.join(format!("view_{i}_confidence.pfm")))?;
        let covered = r.transmittance.data.iter().filter(|&&t| t < 0.5).count();
        println!("view {i}: {covered} of {} pixels at least half covered", cam.pixel_count());
    }
    println!("wrote {}", out.display());
    Ok(())
}
