use serde::{Deserialize, Serialize};

use super::confidence::{confidence_backward, confidence_loss};
use super::geometric::{depth_normal_backward, geometric_losses};
use super::photometric::{photometric_split, photometric_split_backward};
use super::variance::{color_variance_loss, normal_variance_loss, NormalVarGradient};
use crate::render::RenderOutputs;
use crate::scene::{Camera, ImageBuffer};
use crate::{Error, Result};

/// Loss weights and schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_rgb: f64,
    pub lambda_color_var: f64,
    pub lambda_normal_var: f64,
    pub beta: f64,
    /// Confidence weighting on/off; when off the plain photometric mean is used.
    pub confidence: bool,
    pub conf_start_iteration: usize,
    pub lambda_depth_normal: f64,
    pub depth_normal_start: usize,
    pub lambda_distortion: f64,
    pub distortion_start: usize,
    pub normal_var_gradient: NormalVarGradient,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_rgb: 0.2,
            lambda_color_var: 0.5,
            lambda_normal_var: 0.005,
            beta: 0.075,
            confidence: true,
            conf_start_iteration: 500,
            lambda_depth_normal: 0.05,
            depth_normal_start: 0,
            lambda_distortion: 100.0,
            distortion_start: 0,
            normal_var_gradient: NormalVarGradient::Appendix,
        }
    }
}

/// Weights in force at one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveWeights {
    pub lambda_rgb: f64,
    pub confidence_active: bool,
    pub beta: f64,
    pub color_var: f64,
    pub normal_var: f64,
    pub depth_normal: f64,
    pub distortion: f64,
}

impl LossWeights {
    /// Only the photometric term, without confidence weighting.
    pub fn photometric_only(lambda_rgb: f64) -> Self {
        LossWeights {
            lambda_rgb,
            lambda_color_var: 0.0,
            lambda_normal_var: 0.0,
            confidence: false,
            lambda_depth_normal: 0.0,
            lambda_distortion: 0.0,
            ..Default::default()
        }
    }

    /// Turns the geometric regularizers on at fixed fractions of the run.
    pub fn scheduled_for(mut self, total_iterations: usize) -> Self {
        self.depth_normal_start = (total_iterations as f64 * 0.23).round() as usize;
        self.distortion_start = total_iterations / 2;
        self
    }

    pub fn without_variance(mut self) -> Self {
        self.lambda_color_var = 0.0;
        self.lambda_normal_var = 0.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_rgb", self.lambda_rgb),
            ("lambda_color_var", self.lambda_color_var),
            ("lambda_normal_var", self.lambda_normal_var),
            ("beta", self.beta),
            ("lambda_depth_normal", self.lambda_depth_normal),
            ("lambda_distortion", self.lambda_distortion),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if self.lambda_rgb > 1.0 {
            return Err(Error::InvalidArgument("lambda_rgb must be at most 1".into()));
        }
        Ok(())
    }

    pub fn at(&self, iteration: usize) -> EffectiveWeights {
        EffectiveWeights {
            lambda_rgb: self.lambda_rgb,
            confidence_active: self.confidence && iteration >= self.conf_start_iteration,
            beta: self.beta,
            color_var: self.lambda_color_var,
            normal_var: self.lambda_normal_var,
            depth_normal: if iteration >= self.depth_normal_start { self.lambda_depth_normal } else { 0.0 },
            distortion: if iteration >= self.distortion_start { self.lambda_distortion } else { 0.0 },
        }
    }
}

/// Everything a loss evaluation reads.
#[derive(Clone, Copy)]
pub struct LossInputs<'a> {
    pub target: &'a ImageBuffer,
    /// Must hold retained ray samples.
    pub render: &'a RenderOutputs,
    /// Appearance-corrected render; `None` means the raw render is used.
    pub appearance: Option<&'a ImageBuffer>,
    /// Take the SSIM luminance term from the corrected render (decoupled
    /// D-SSIM) rather than from the raw render.
    pub decoupled_luminance: bool,
    pub camera: &'a Camera,
    pub iteration: usize,
    /// Reference colors for the color-variance term; `None` uses `target`.
    pub color_var_target: Option<&'a ImageBuffer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub iteration: usize,
    pub total: f64,
    pub l1: f64,
    pub dssim: f64,
    /// Mean of the per-pixel photometric map.
    pub photometric: f64,
    /// Confidence-weighted loss; reported even while inactive.
    pub conf: f64,
    pub color_var: f64,
    pub normal_var: f64,
    pub depth_normal: f64,
    pub distortion: f64,
    pub weights: EffectiveWeights,
    #[serde(skip)]
    pub rgb_map: Vec<f64>,
}

impl LossReport {
    /// `total` recomputed from the reported terms.
    pub fn weighted_sum(&self) -> f64 {
        let w = &self.weights;
        let base = if w.confidence_active { self.conf } else { self.photometric };
        base + w.color_var * self.color_var
            + w.normal_var * self.normal_var
            + w.depth_normal * self.depth_normal
            + w.distortion * self.distortion
    }

    pub fn csv_header() -> &'static str {
        "iteration,l1,dssim,photometric,conf,color_var,normal_var,depth_normal,distortion,total"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.iteration,
            self.l1,
            self.dssim,
            self.photometric,
            self.conf,
            self.color_var,
            self.normal_var,
            self.depth_normal,
            self.distortion,
            self.total
        )
    }
}

fn target_pixel(target: &ImageBuffer, p: usize) -> [f64; 3] {
    [target.data[3 * p], target.data[3 * p + 1], target.data[3 * p + 2]]
}

pub fn total_loss(inputs: &LossInputs, weights: &LossWeights) -> Result<LossReport> {
    let render = inputs.render;
    inputs.target.check_same_shape(&render.color)?;
    let app = inputs.appearance.unwrap_or(&render.color);
    let lum = if inputs.decoupled_luminance { app } else { &render.color };
    let w = weights.at(inputs.iteration);
    let phot = photometric_split(inputs.target, &render.color, app, lum, w.lambda_rgb)?;
    let conf = confidence_loss(&phot.map, &render.confidence.data, w.beta)?;
    let samples = render.samples();
    let n = samples.len().max(1) as f64;
    let color_var = samples
        .iter()
        .enumerate()
        .map(|(p, s)| color_variance_loss(s, &target_pixel(inputs.color_var_target.unwrap_or(inputs.target), p)))
        .sum::<f64>()
        / n;
    let normal_var = samples.iter().map(normal_variance_loss).sum::<f64>() / n;
    let geo = geometric_losses(render, inputs.camera);
    let mut report = LossReport {
        iteration: inputs.iteration,
        total: 0.0,
        l1: phot.l1,
        dssim: phot.dssim,
        photometric: phot.value,
        conf,
        color_var,
        normal_var,
        depth_normal: geo.depth_normal,
        distortion: geo.distortion,
        weights: w,
        rgb_map: phot.map,
    };
    report.total = report.weighted_sum();
    if !report.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: inputs.iteration,
        });
    }
    Ok(report)
}

/// Gradients of the total loss w.r.t. the rendered buffers, plus the scales
/// of the per-primitive variance terms (applied in the splat backward pass).
#[derive(Clone, Debug)]
pub struct PixelGradients {
    /// W.r.t. the raw rendered color.
    pub d_color: ImageBuffer,
    /// W.r.t. the appearance-corrected render, when one was supplied; the
    /// caller pulls it back through the appearance model into `d_color`.
    pub d_appearance: Option<ImageBuffer>,
    pub d_normal: Vec<f64>,
    pub d_depth: Vec<f64>,
    pub d_confidence: Vec<f64>,
    pub color_var_scale: f64,
    pub normal_var_scale: f64,
    pub distortion_scale: f64,
    pub normal_var_gradient: NormalVarGradient,
}

impl PixelGradients {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        PixelGradients {
            d_color: ImageBuffer::zeros(width, height, 3),
            d_appearance: None,
            d_normal: vec![0.0; 3 * n],
            d_depth: vec![0.0; n],
            d_confidence: vec![0.0; n],
            color_var_scale: 0.0,
            normal_var_scale: 0.0,
            distortion_scale: 0.0,
            normal_var_gradient: NormalVarGradient::Appendix,
        }
    }
}

pub fn pixel_gradients(inputs: &LossInputs, weights: &LossWeights, report: &LossReport) -> Result<PixelGradients> {
    let render = inputs.render;
    let w = report.weights;
    let n = render.width * render.height;
    let nf = n as f64;
    let app = inputs.appearance.unwrap_or(&render.color);
    let lum = if inputs.decoupled_luminance { app } else { &render.color };
    let upstream: Vec<f64> = if w.confidence_active {
        render.confidence.data.iter().map(|c| c / nf).collect()
    } else {
        vec![1.0 / nf; n]
    };
    let (mut d_color, mut d_app, d_lum) =
        photometric_split_backward(inputs.target, &render.color, app, lum, w.lambda_rgb, &upstream)?;
    if inputs.decoupled_luminance {
        d_app.data.iter_mut().zip(&d_lum.data).for_each(|(a, b)| *a += b);
    } else {
        d_color.data.iter_mut().zip(&d_lum.data).for_each(|(a, b)| *a += b);
    }
    let d_appearance = match inputs.appearance {
        Some(_) => Some(d_app),
        None => {
            d_color.data.iter_mut().zip(&d_app.data).for_each(|(a, b)| *a += b);
            None
        }
    };
    let d_confidence = if w.confidence_active {
        let clamped: Vec<bool> = render.samples().iter().map(|s| s.confidence_clamped()).collect();
        confidence_backward(&report.rgb_map, &render.confidence.data, &clamped, w.beta)?
    } else {
        vec![0.0; n]
    };
    let (d_normal, d_depth) = if w.depth_normal > 0.0 {
        let count = geometric_losses(render, inputs.camera).depth_normal_pixels;
        depth_normal_backward(render, inputs.camera, w.depth_normal / count.max(1) as f64)
    } else {
        (vec![0.0; 3 * n], vec![0.0; n])
    };
    Ok(PixelGradients {
        d_color,
        d_appearance,
        d_normal,
        d_depth,
        d_confidence,
        color_var_scale: w.color_var / nf,
        normal_var_scale: w.normal_var / nf,
        distortion_scale: w.distortion / nf,
        normal_var_gradient: weights.normal_var_gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::render_image;
    use crate::scene::{Gaussian, GaussianCloud};
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (GaussianCloud, Camera, ImageBuffer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gs = (0..12)
            .map(|_| {
                let mut g = Gaussian::isotropic(
                    Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2)),
                    rng.random_range(0.1..0.3),
                    rng.random_range(0.3..0.9),
                    [rng.random(), rng.random(), rng.random()],
                );
                g.gamma = rng.random_range(-1.0..1.0);
                g
            })
            .collect();
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 0.6, 10, 10, 0).unwrap();
        let target = ImageBuffer::from_fn(10, 10, 3, |_, _, _| rng.random());
        (GaussianCloud::new(gs), cam, target)
    }

    #[test]
    fn confidence_inactive_before_start() {
        let (cloud, cam, target) = setup(0);
        let out = render_image(&cloud, &cam, true);
        let inputs = LossInputs { target: &target, render: &out, appearance: None, decoupled_luminance: true, camera: &cam, iteration: 0, color_var_target: None };
        let a = total_loss(&inputs, &LossWeights::default()).unwrap();
        let mut other = out.clone();
        other.confidence.data.iter_mut().for_each(|c| *c = 3.7);
        let inputs = LossInputs { render: &other, ..inputs };
        let b = total_loss(&inputs, &LossWeights::default()).unwrap();
        assert_eq!(a.total, b.total);
    }

    #[test]
    fn photometric_only_total() {
        let (cloud, cam, target) = setup(1);
        let out = render_image(&cloud, &cam, true);
        let inputs = LossInputs { target: &target, render: &out, appearance: None, decoupled_luminance: true, camera: &cam, iteration: 1000, color_var_target: None };
        let r = total_loss(&inputs, &LossWeights::photometric_only(0.2)).unwrap();
        assert_eq!(r.total, r.photometric);
    }

    #[test]
    fn total_is_weighted_sum() {
        for seed in 0..5 {
            let (cloud, cam, target) = setup(seed);
            let out = render_image(&cloud, &cam, true);
            let inputs = LossInputs { target: &target, render: &out, appearance: None, decoupled_luminance: true, camera: &cam, iteration: 800, color_var_target: None };
            let r = total_loss(&inputs, &LossWeights::default()).unwrap();
            let w = r.weights;
            let manual = r.conf + 0.5 * r.color_var + 0.005 * r.normal_var + 0.05 * r.depth_normal + 100.0 * r.distortion;
            assert!(w.confidence_active);
            assert!((r.total - manual).abs() < 1e-9);
        }
    }

    #[test]
    fn schedule() {
        let w = LossWeights::default().scheduled_for(1000);
        assert_eq!(w.at(0).depth_normal, 0.0);
        assert_eq!(w.at(230).depth_normal, 0.05);
        assert_eq!(w.at(499).distortion, 0.0);
        assert_eq!(w.at(500).distortion, 100.0);
        assert!(!w.at(499).confidence_active);
        assert!(w.at(500).confidence_active);
    }

    #[test]
    fn rejects_negative_weights() {
        let w = LossWeights { beta: -1.0, ..Default::default() };
        assert!(w.validate().is_err());
    }

    #[test]
    fn csv_row_has_all_columns() {
        let (cloud, cam, target) = setup(2);
        let out = render_image(&cloud, &cam, true);
        let inputs = LossInputs { target: &target, render: &out, appearance: None, decoupled_luminance: true, camera: &cam, iteration: 3, color_var_target: None };
        let r = total_loss(&inputs, &LossWeights::default()).unwrap();
        assert_eq!(r.csv_row().split(',').count(), LossReport::csv_header().split(',').count());
    }
}
