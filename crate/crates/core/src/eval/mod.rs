//! Evaluation: image and geometry metrics plus analytic synthetic scenes.

mod geometry;
mod image_metrics;
mod report;
pub mod synthetic;

pub use geometry::{
    chamfer, crop_to_bounds, f1_score, f1_score_brute_force, nearest_brute_force, nearest_distances, sample_surface, PointGrid,
    F1,
};
pub use image_metrics::{mean_ssim, psnr, saturated_normal_coherence};
pub use report::{evaluate_meshes, MeshEvalConfig, MetricsReport};
pub use synthetic::{evaluation_region, make_synthetic_scene, SceneKind, SynthConfig, SyntheticScene};
