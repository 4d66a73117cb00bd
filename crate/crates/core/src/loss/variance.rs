//! Per-ray variance losses over the blended primitives.

use crate::render::RaySample;
use crate::Vec3;

/// Which gradient the normal-variance loss back-propagates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalVarGradient {
    /// `2 w_i (n_i - N)` for normals, `‖n_i - N‖²` in the α chain; treats the
    /// blended normal as constant.
    #[default]
    Appendix,
    /// Exact derivative of the explicit sum, including the dependence of `N`
    /// on every `n_i` and `w_i`.
    Exact,
}

/// `Σ_i w_i ‖c_i - I‖²`.
pub fn color_variance_sum(weights: &[f64], colors: &[[f64; 3]], target: &[f64; 3]) -> f64 {
    weights
        .iter()
        .zip(colors)
        .map(|(w, c)| w * (0..3).map(|k| (c[k] - target[k]).powi(2)).sum::<f64>())
        .sum()
}

pub fn color_variance_loss(sample: &RaySample, target: &[f64; 3]) -> f64 {
    sample
        .contribs
        .iter()
        .map(|c| c.weight * (0..3).map(|k| (c.color[k] - target[k]).powi(2)).sum::<f64>())
        .sum()
}

/// `Σ_i w_i ‖n_i - N‖²` with `N = Σ_i w_i n_i`.
pub fn normal_variance_sum(weights: &[f64], normals: &[Vec3]) -> f64 {
    let blended: Vec3 = weights.iter().zip(normals).map(|(w, n)| n * *w).sum();
    weights.iter().zip(normals).map(|(w, n)| w * (n - blended).norm_squared()).sum()
}

/// `1 - ‖N‖²`; equals the explicit sum on saturated rays with unit normals.
pub fn normal_variance_fast(blended: &Vec3) -> f64 {
    1.0 - blended.norm_squared()
}

pub fn normal_variance_loss(sample: &RaySample) -> f64 {
    sample.contribs.iter().map(|c| c.weight * (c.normal - sample.normal).norm_squared()).sum()
}

/// Weighted variance of the primitive depths, `Σ_i w_i (t_i - D/W)²` with
/// `D = Σ w_i t_i`, `W = Σ w_i`; zero for empty rays.
pub fn distortion_ray(sample: &RaySample) -> f64 {
    let w: f64 = sample.contribs.iter().map(|c| c.weight).sum();
    if w <= 0.0 {
        return 0.0;
    }
    let mean = sample.depth / w;
    sample.contribs.iter().map(|c| c.weight * (c.t - mean).powi(2)).sum()
}
