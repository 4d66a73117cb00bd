//! Domain types shared by every other module.

mod camera;
mod gaussian;
mod image;

pub use camera::{Camera, Ray};
pub use gaussian::{
    param, DensifyStats, Gaussian, GaussianCloud, PARAM_COUNT, SH_COEFFS, SH_DEGREE_MAX,
};
pub use image::ImageBuffer;
