use rayon::prelude::*;

use super::blend::{backward_blend, BlendUpstream};
use super::geom::{finalize, geom_term, GeomAccum, GeomTerm};
use crate::loss::{pixel_gradients, total_loss, LossInputs, LossReport, LossWeights, PixelGradients};
use crate::render::{render_image, PreparedGaussian, RenderOutputs};
use crate::scene::{param, Camera, GaussianCloud, ImageBuffer, PARAM_COUNT};
use crate::sh::sh_backward;
use crate::{Error, Result, Vec3};

/// Per-Gaussian gradients laid out like [`crate::scene::Gaussian::to_params`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBuffer {
    pub params: Vec<[f64; PARAM_COUNT]>,
    /// `‖∂L/∂μ‖` of this pass, for the densification statistics.
    pub position_norm: Vec<f64>,
    /// Whether the primitive contributed to any pixel of this pass.
    pub visible: Vec<bool>,
}

impl GradientBuffer {
    pub fn zeros(n: usize) -> Self {
        GradientBuffer {
            params: vec![[0.0; PARAM_COUNT]; n],
            position_norm: vec![0.0; n],
            visible: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn position(&self, i: usize) -> Vec3 {
        let p = &self.params[i];
        Vec3::new(p[param::POSITION], p[param::POSITION + 1], p[param::POSITION + 2])
    }

    pub fn is_zero(&self) -> bool {
        self.params.iter().all(|p| p.iter().all(|v| *v == 0.0))
    }

    /// Fails with the first primitive holding a non-finite entry.
    pub fn check_finite(&self) -> Result<()> {
        for (i, p) in self.params.iter().enumerate() {
            if let Some(k) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    index: i,
                    field: param::field_name(k),
                });
            }
        }
        Ok(())
    }

    /// Adds the positional-gradient norms of this pass to the cloud's
    /// densification statistics, counting only primitives that were visible.
    pub fn accumulate_densify(&self, cloud: &mut GaussianCloud) {
        for (i, n) in self.position_norm.iter().enumerate() {
            if self.visible[i] {
                cloud.densify.grad_accum[i] += n;
                cloud.densify.count[i] += 1;
            }
        }
    }
}

struct Atom {
    index: u32,
    pixel: u32,
    geom: GeomTerm,
    d_color: [f64; 3],
    d_confidence: f64,
}

fn upstream_at(grads: &PixelGradients, target: &ImageBuffer, p: usize) -> BlendUpstream {
    let c = &grads.d_color.data;
    BlendUpstream {
        color: [c[3 * p], c[3 * p + 1], c[3 * p + 2]],
        normal: Vec3::new(grads.d_normal[3 * p], grads.d_normal[3 * p + 1], grads.d_normal[3 * p + 2]),
        depth: grads.d_depth[p],
        confidence: grads.d_confidence[p],
        color_var: (grads.color_var_scale != 0.0)
            .then(|| (grads.color_var_scale, [target.data[3 * p], target.data[3 * p + 1], target.data[3 * p + 2]])),
        normal_var: (grads.normal_var_scale != 0.0).then_some((grads.normal_var_scale, grads.normal_var_gradient)),
        distortion: grads.distortion_scale,
    }
}

/// Back-propagates per-pixel gradients through blending and the per-ray
/// geometry onto every Gaussian parameter.
///
/// Per-ray work runs in parallel; the per-Gaussian reduction then walks
/// pixels in order, so the result does not depend on the worker count.
pub fn backward_splats(
    cloud: &GaussianCloud,
    render: &RenderOutputs,
    target: &ImageBuffer,
    grads: &PixelGradients,
) -> Result<GradientBuffer> {
    let prepared = PreparedGaussian::prepare_all(cloud);
    let samples = render.samples();
    let atoms: Vec<Vec<Atom>> = samples
        .par_iter()
        .enumerate()
        .map(|(p, s)| {
            let up = upstream_at(grads, target, p);
            backward_blend(s, &up)
                .into_iter()
                .zip(&s.contribs)
                .map(|(g, c)| Atom {
                    index: c.index,
                    pixel: p as u32,
                    geom: geom_term(&prepared[c.index as usize], &s.ray, g.alpha, c.alpha_clamped, g.t, &g.normal),
                    d_color: g.color,
                    d_confidence: g.confidence,
                })
                .collect()
        })
        .collect();

    let n = cloud.len();
    let gaussians = cloud.gaussians();
    let degree = cloud.active_sh_degree;
    let mut accum = vec![GeomAccum::default(); n];
    let mut out = GradientBuffer::zeros(n);
    for atom in atoms.iter().flatten() {
        let i = atom.index as usize;
        accum[i].add(&atom.geom);
        let dir = samples[atom.pixel as usize].ray.direction;
        out.visible[i] = true;
        let slot = &mut out.params[i];
        sh_backward(&gaussians[i].sh, &dir, degree, &atom.d_color, &mut slot[param::SH_DC..param::SH_DC + 48]);
        slot[param::GAMMA] += atom.d_confidence * prepared[i].confidence;
    }

    out.params
        .par_iter_mut()
        .zip(out.position_norm.par_iter_mut())
        .enumerate()
        .for_each(|(i, (slot, norm))| {
            let g = finalize(&gaussians[i], &accum[i]);
            slot[param::POSITION..param::POSITION + 3].copy_from_slice(g.position.as_slice());
            slot[param::ROTATION..param::ROTATION + 4].copy_from_slice(g.rotation.as_slice());
            slot[param::LOG_SCALE..param::LOG_SCALE + 3].copy_from_slice(g.log_scale.as_slice());
            slot[param::OPACITY] = g.opacity_logit;
            *norm = g.position.norm();
        });
    out.check_finite()?;
    Ok(out)
}

/// Renders `cam`, evaluates the total loss against `target` (no appearance
/// model) and returns the loss report with the gradient of every Gaussian.
pub fn backward_full(
    cloud: &GaussianCloud,
    cam: &Camera,
    target: &ImageBuffer,
    weights: &LossWeights,
    iteration: usize,
) -> Result<(LossReport, GradientBuffer)> {
    let render = render_image(cloud, cam, true);
    let inputs = LossInputs {
        target,
        render: &render,
        appearance: None,
        decoupled_luminance: true,
        camera: cam,
        iteration,
        color_var_target: None,
    };
    let report = total_loss(&inputs, weights)?;
    let grads = pixel_gradients(&inputs, weights, &report)?;
    let buffer = backward_splats(cloud, &render, target, &grads)?;
    Ok((report, buffer))
}
