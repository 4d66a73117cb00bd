//! Extracts the iso-surface of a few overlapping anisotropic Gaussians and
//! writes it as OBJ.
//!
//! ```text
//! cargo run --release --example mesh_blobs -- [out.obj] [resolution]
//! ```

use std::path::PathBuf;

use confsplat::io::{save_mesh, MeshFormat};
use confsplat::mesh::{extract_mesh, MeshConfig};
use confsplat::scene::{Gaussian, GaussianCloud};
use confsplat::Vec3;
use nalgebra::Vector4;

fn main() -> confsplat::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "blobs.obj".into()));
    let resolution = args.next().and_then(|a| a.parse().ok()).unwrap_or(96);

    let mut gs = Vec::new();
    for k in 0..5 {
        let a = k as f64 * 1.2566;
        let mut g = Gaussian::isotropic(Vec3::new(0.5 * a.cos(), 0.5 * a.sin(), 0.0), 0.15, 0.95, [0.5; 3]);
        g.log_scale.x = 0.35f64.ln();
        let half = a / 2.0;
        g.rotation = Vector4::new(half.cos(), 0.0, 0.0, half.sin());
        gs.push(g);
    }
    let cloud = GaussianCloud::new(gs);
    let cfg = MeshConfig {
        resolution,
        ..Default::default()
    };
    let mut mesh = extract_mesh(&cloud, &cfg)?;
    mesh.compute_normals();
    println!(
        "{} vertices, {} triangles, area {:.4}, open edges {}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.area(),
        mesh.boundary_edge_count()
    );
    save_mesh(&mesh, &out, MeshFormat::Obj)?;
    println!("wrote {}", out.display());
    Ok(())
}
