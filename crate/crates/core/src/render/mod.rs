//! Exact per-ray forward renderer.
//!
//! Opacity is evaluated in 3D at the point of maximum contribution along each
//! ray, primitives are sorted by that ray parameter, and color, normal, depth
//! and confidence are alpha-blended front to back.

mod image;
mod ray;

pub use image::{render_image, render_image_brute_force, RenderOutputs};
pub use ray::{
    alpha_3d, blend_hits, max_contribution_point, render_ray, Contrib, Hit, MaxContribution,
    PreparedGaussian, RaySample,
};

/// Upper clamp on per-primitive opacity along a ray.
pub const ALPHA_MAX: f64 = 0.999;
/// Contributions below this opacity are ignored.
pub const ALPHA_CUTOFF: f64 = 1.0 / 255.0;
/// Blending stops once the remaining transmittance drops below this.
pub const TRANSMITTANCE_EPS: f64 = 1e-4;
pub const CONFIDENCE_MIN: f64 = 0.001;
pub const CONFIDENCE_MAX: f64 = 5.0;
