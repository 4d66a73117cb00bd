//! Differentiable 3D Gaussian splatting on the CPU.
//!
//! The crate covers the full loop of a confidence-aware splatting pipeline:
//!
//! - [`scene`]: Gaussians, cameras, rays and image buffers.
//! - [`render`]: exact per-ray renderer that evaluates opacity in 3D at the
//!   point of maximum contribution and alpha-blends color, normal, depth and
//!   confidence.
//! - [`loss`]: photometric loss with decoupled D-SSIM, confidence weighting,
//!   color/normal variance losses and geometric regularizers.
//! - [`backward`]: analytic gradients for every loss term and every Gaussian
//!   parameter, plus a finite-difference checker.
//! - [`appearance`]: per-image appearance compensation (CNN and affine variants).
//! - [`train`]: Adam optimizer, confidence-steered densification, training loop.
//! - [`mesh`]: opacity field, marching tetrahedra with binary search, mesh IO.
//! - [`eval`]: PSNR / SSIM / F1 / Chamfer metrics and synthetic scenes.
//! - [`io`]: PLY, PPM/PFM and scene JSON formats.
//! - [`cli`]: the `confsplat` command line front end.

pub mod appearance;
pub mod backward;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod loss;
pub mod math;
pub mod mesh;
pub mod render;
pub mod scene;
pub mod sh;
pub mod train;

pub use error::{Error, Result};
pub use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
