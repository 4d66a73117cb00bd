//! Training losses: photometric with decoupled D-SSIM, confidence weighting,
//! color/normal variance and geometric regularizers, with the gradients of
//! each w.r.t. the rendered buffers.

pub mod confidence;
pub mod geometric;
pub mod photometric;
pub mod ssim;
pub mod total;
pub mod variance;

pub use confidence::{confidence_backward, confidence_loss, confidence_pixel_gradient};
pub use geometric::{depth_normal_backward, depth_normal_map, distortion_mean, geometric_losses, GeometricLosses};
pub use photometric::{photometric, photometric_backward, photometric_split, photometric_split_backward, Photometric};
pub use ssim::{dssim_decoupled, dssim_decoupled_backward, dssim_decoupled_map, ssim, ssim_components, SsimMaps};
pub use total::{pixel_gradients, total_loss, EffectiveWeights, LossInputs, LossReport, LossWeights, PixelGradients};
pub use variance::{
    color_variance_loss, color_variance_sum, distortion_ray, normal_variance_fast, normal_variance_loss,
    normal_variance_sum, NormalVarGradient,
};
