//! Central finite-difference verification of the analytic gradients on
//! seeded random scenes.
//!
//! Every check compares the gradient of the total loss w.r.t. one scalar
//! parameter against a finite difference of the same loss. Discrete state that
//! the loss depends on (contributor sets, clamps, sign choices) is captured in
//! a signature; when a step would change it the checker falls back to a
//! one-sided second-order difference, or skips the parameter if both sides
//! change.

use nalgebra::Vector4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::full::backward_splats;
use crate::appearance::{CnnAppearance, CnnConfig};
use crate::loss::{depth_normal_map, pixel_gradients, total_loss, LossInputs, LossWeights, NormalVarGradient};
use crate::render::{render_image, PreparedGaussian};
use crate::scene::{param, Camera, Gaussian, GaussianCloud, ImageBuffer, PARAM_COUNT};
use crate::sh::eval_unclamped;
use crate::{Result, Vec3};

/// Pass criteria and sampling of one gradcheck run.
#[derive(Clone, Debug)]
pub struct GradcheckConfig {
    pub scenes: usize,
    pub seed: u64,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Below this |FD| the absolute tolerance applies.
    pub small: f64,
    /// Higher-order SH coefficients checked per Gaussian (randomly chosen).
    pub sh_rest_samples: usize,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            scenes: 20,
            seed: 0,
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-7,
            small: 1e-6,
            sh_rest_samples: 3,
        }
    }
}

/// Small random scene with a random target image.
#[derive(Clone, Debug)]
pub struct GradScene {
    pub cloud: GaussianCloud,
    pub camera: Camera,
    pub target: ImageBuffer,
}

pub fn random_scene(seed: u64) -> GradScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(6..=16);
    let gaussians = (0..count)
        .map(|_| {
            let mut g = Gaussian::isotropic(
                Vec3::new(rng.random_range(-0.35..0.35), rng.random_range(-0.35..0.35), rng.random_range(-0.3..0.3)),
                1.0,
                rng.random_range(0.3..0.9),
                [0.5; 3],
            );
            g.rotation = Vector4::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            g.log_scale = Vec3::new(rng.random_range(-2.5..-1.3), rng.random_range(-2.5..-1.3), rng.random_range(-3.0..-1.5));
            for coeff in g.sh.iter_mut() {
                for v in coeff.iter_mut() {
                    *v = rng.random_range(-0.3..0.3);
                }
            }
            g.sh[0] = [rng.random_range(-0.5..1.0), rng.random_range(-0.5..1.0), rng.random_range(-0.5..1.0)];
            g.gamma = rng.random_range(-0.5..0.5);
            g
        })
        .collect();
    let cloud = GaussianCloud::new(gaussians).with_sh_degree(3);
    let eye = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 2.5);
    let camera = Camera::look_at(eye, Vec3::zeros(), Vec3::y(), 0.55, 8, 8, 0).expect("view direction is not parallel to y");
    let target = ImageBuffer::from_fn(8, 8, 3, |_, _, _| rng.random());
    GradScene { cloud, camera, target }
}

/// One loss configuration exercised by the checker.
#[derive(Clone, Debug)]
pub struct TermConfig {
    pub name: &'static str,
    pub weights: LossWeights,
    pub iteration: usize,
    /// Route the render through a randomly initialized appearance network.
    pub appearance: bool,
}

/// The photometric term is always present; each configuration adds one
/// regularizer on top with a weight large enough to dominate.
pub fn term_configs() -> Vec<TermConfig> {
    let base = LossWeights {
        normal_var_gradient: NormalVarGradient::Exact,
        ..LossWeights::photometric_only(0.2)
    };
    let it = 1000;
    vec![
        TermConfig { name: "l1", weights: LossWeights { lambda_rgb: 0.0, ..base.clone() }, iteration: it, appearance: false },
        TermConfig { name: "ssim", weights: LossWeights { lambda_rgb: 1.0, ..base.clone() }, iteration: it, appearance: false },
        TermConfig { name: "confidence", weights: LossWeights { confidence: true, ..base.clone() }, iteration: it, appearance: false },
        TermConfig { name: "color_var", weights: LossWeights { lambda_color_var: 1.0, ..base.clone() }, iteration: it, appearance: false },
        TermConfig { name: "normal_var", weights: LossWeights { lambda_normal_var: 1.0, ..base.clone() }, iteration: it, appearance: false },
        TermConfig { name: "depth_normal", weights: LossWeights { lambda_depth_normal: 1.0, ..base.clone() }, iteration: it, appearance: false },
        TermConfig { name: "distortion", weights: LossWeights { lambda_distortion: 10.0, ..base.clone() }, iteration: it, appearance: false },
        TermConfig {
            name: "full",
            weights: LossWeights { normal_var_gradient: NormalVarGradient::Exact, ..LossWeights::default() },
            iteration: it,
            appearance: false,
        },
        TermConfig { name: "appearance", weights: base.clone(), iteration: it, appearance: true },
    ]
}

/// Discrete state of a forward/loss evaluation.
pub fn signature(cloud: &GaussianCloud, scene: &GradScene, appearance: Option<&ImageBuffer>) -> Vec<i64> {
    let render = render_image(cloud, &scene.camera, true);
    let prepared = PreparedGaussian::prepare_all(cloud);
    let mut sig = Vec::new();
    for (p, s) in render.samples().iter().enumerate() {
        sig.push(-1);
        sig.push(s.confidence_clamped() as i64);
        for c in &s.contribs {
            let i = c.index as usize;
            sig.push(c.index as i64);
            sig.push(c.alpha_clamped as i64);
            let raw = eval_unclamped(&cloud.gaussians()[i].sh, &s.ray.direction, cloud.active_sh_degree);
            sig.push(raw.iter().enumerate().map(|(k, v)| ((*v < 0.0) as i64) << k).sum());
            let axis = prepared[i].rotation.column(prepared[i].normal_axis).dot(&s.ray.direction);
            sig.push(prepared[i].normal_axis as i64 * 2 + (axis > 0.0) as i64);
        }
        let app = appearance.unwrap_or(&render.color);
        for k in 0..3 {
            let d = app.data[3 * p + k] - scene.target.data[3 * p + k];
            sig.push(d.partial_cmp(&0.0).map_or(9, |o| o as i64));
        }
    }
    for v in depth_normal_map(&render, &scene.camera) {
        sig.push(v.is_some() as i64);
    }
    sig
}

/// Small appearance network with a non-zero final layer, and the frozen
/// render its head sees.
#[derive(Clone, Debug)]
pub struct AppearanceFixture {
    pub net: CnnAppearance,
    pub head: ImageBuffer,
}

impl AppearanceFixture {
    pub fn new(scene: &GradScene, seed: u64) -> Result<Self> {
        let config = CnnConfig { latent_dim: 2, widths: vec![3, 2] };
        let mut net = CnnAppearance::new(config, 1, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, _) = *net.config.offsets().last().expect("final layer");
        let end = net.config.net_param_count();
        for v in &mut net.params[w..end] {
            *v = rng.random_range(-0.3..0.3);
        }
        let head = render_image(&scene.cloud, &scene.camera, false).color;
        Ok(AppearanceFixture { net, head })
    }

    fn apply(&self, color: &ImageBuffer) -> Result<(ImageBuffer, crate::appearance::CnnCache)> {
        self.net.forward_with_head(color, &self.head, 0)
    }
}

fn loss_of(cloud: &GaussianCloud, scene: &GradScene, term: &TermConfig, app: Option<&AppearanceFixture>) -> Result<(f64, Vec<i64>)> {
    let render = render_image(cloud, &scene.camera, true);
    let corrected = app.map(|a| a.apply(&render.color)).transpose()?.map(|r| r.0);
    let inputs = LossInputs {
        target: &scene.target,
        render: &render,
        appearance: corrected.as_ref(),
        decoupled_luminance: true,
        camera: &scene.camera,
        iteration: term.iteration,
        color_var_target: None,
    };
    let loss = total_loss(&inputs, &term.weights)?.total;
    Ok((loss, signature(cloud, scene, corrected.as_ref())))
}

/// Analytic gradients of the configured loss: per-Gaussian parameters and,
/// when an appearance fixture is given, its flat parameter vector.
pub fn analytic_gradient(
    scene: &GradScene,
    term: &TermConfig,
    app: Option<&AppearanceFixture>,
) -> Result<(Vec<[f64; PARAM_COUNT]>, Vec<f64>)> {
    let render = render_image(&scene.cloud, &scene.camera, true);
    let corrected = app.map(|a| a.apply(&render.color)).transpose()?;
    let inputs = LossInputs {
        target: &scene.target,
        render: &render,
        appearance: corrected.as_ref().map(|c| &c.0),
        decoupled_luminance: true,
        camera: &scene.camera,
        iteration: term.iteration,
        color_var_target: None,
    };
    let report = total_loss(&inputs, &term.weights)?;
    let mut grads = pixel_gradients(&inputs, &term.weights, &report)?;
    let mut app_grad = Vec::new();
    if let (Some(a), Some((_, cache)), Some(d_app)) = (app, corrected.as_ref(), grads.d_appearance.take()) {
        let (d_img, g) = a.net.backward(cache, &d_app)?;
        grads.d_color.data.iter_mut().zip(&d_img.data).for_each(|(x, y)| *x += y);
        app_grad = g;
    }
    Ok((backward_splats(&scene.cloud, &render, &scene.target, &grads)?.params, app_grad))
}

/// Outcome of one finite-difference comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Check {
    Compared { analytic: f64, fd: f64 },
    Skipped,
}

/// Finite difference of `f` at `x0` along one scalar, falling back to a
/// one-sided second-order stencil when `sig` changes on one side.
pub fn finite_difference<S: PartialEq>(
    x0: f64,
    h: f64,
    base_sig: &S,
    eval: &mut dyn FnMut(f64) -> Result<(f64, S)>,
) -> Result<Option<f64>> {
    let (fp, sp) = eval(x0 + h)?;
    let (fm, sm) = eval(x0 - h)?;
    let plus_ok = sp == *base_sig;
    let minus_ok = sm == *base_sig;
    if plus_ok && minus_ok {
        return Ok(Some((fp - fm) / (2.0 * h)));
    }
    let (f0, _) = eval(x0)?;
    if plus_ok {
        let (f2, s2) = eval(x0 + 2.0 * h)?;
        if s2 == *base_sig {
            return Ok(Some((-3.0 * f0 + 4.0 * fp - f2) / (2.0 * h)));
        }
    }
    if minus_ok {
        let (f2, s2) = eval(x0 - 2.0 * h)?;
        if s2 == *base_sig {
            return Ok(Some((3.0 * f0 - 4.0 * fm + f2) / (2.0 * h)));
        }
    }
    Ok(None)
}

/// Aggregated results for one (parameter class, loss term) pair.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GradcheckRow {
    pub param_class: &'static str,
    pub term: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub failures: usize,
    /// Largest relative error among checks with |FD| above the small threshold.
    pub max_rel_error: f64,
    /// Largest absolute error among checks with |FD| at or below it.
    pub max_abs_error: f64,
}

impl GradcheckRow {
    fn new(param_class: &'static str, term: &'static str) -> Self {
        GradcheckRow {
            param_class,
            term,
            checked: 0,
            skipped: 0,
            failures: 0,
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        }
    }

    pub fn record(&mut self, check: Check, cfg: &GradcheckConfig) {
        match check {
            Check::Skipped => self.skipped += 1,
            Check::Compared { analytic, fd } => {
                self.checked += 1;
                let err = (analytic - fd).abs();
                let ok = if fd.abs() > cfg.small {
                    let rel = err / fd.abs();
                    self.max_rel_error = self.max_rel_error.max(rel);
                    rel <= cfg.rel_tol
                } else {
                    self.max_abs_error = self.max_abs_error.max(err);
                    err <= cfg.abs_tol
                };
                if !ok {
                    self.failures += 1;
                }
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GradcheckReport {
    pub rows: Vec<GradcheckRow>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GradcheckRow::passed)
    }

    pub fn row_mut(&mut self, param_class: &'static str, term: &'static str) -> &mut GradcheckRow {
        if let Some(i) = self.rows.iter().position(|r| r.param_class == param_class && r.term == term) {
            &mut self.rows[i]
        } else {
            self.rows.push(GradcheckRow::new(param_class, term));
            self.rows.last_mut().unwrap()
        }
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<14} {:<13} {:>7} {:>7} {:>12} {:>12}  {}\n",
            "parameter", "term", "checked", "skipped", "max_rel", "max_abs", "status"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<14} {:<13} {:>7} {:>7} {:>12.3e} {:>12.3e}  {}\n",
                r.param_class,
                r.term,
                r.checked,
                r.skipped,
                r.max_rel_error,
                r.max_abs_error,
                if r.passed() { "pass" } else { "FAIL" }
            ));
        }
        s
    }
}

/// Flat parameter offsets checked for one Gaussian.
fn offsets_to_check(rng: &mut ChaCha8Rng, sh_rest_samples: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..param::SH_REST).collect();
    for _ in 0..sh_rest_samples {
        v.push(rng.random_range(param::SH_REST..param::GAMMA));
    }
    v.push(param::GAMMA);
    v
}

/// Checks every sampled parameter of `scene` for one loss configuration.
pub fn check_scene(scene: &GradScene, term: &TermConfig, cfg: &GradcheckConfig, rng: &mut ChaCha8Rng, report: &mut GradcheckReport) -> Result<()> {
    let fixture = if term.appearance { Some(AppearanceFixture::new(scene, rng.random())?) } else { None };
    let app = fixture.as_ref();
    let (analytic, app_analytic) = analytic_gradient(scene, term, app)?;
    let (_, base_sig) = loss_of(&scene.cloud, scene, term, app)?;
    for i in 0..scene.cloud.len() {
        let base = scene.cloud.gaussians()[i].to_params();
        for k in offsets_to_check(rng, cfg.sh_rest_samples) {
            let mut eval = |x: f64| -> Result<(f64, Vec<i64>)> {
                let mut p = base;
                p[k] = x;
                let mut cloud = scene.cloud.clone();
                cloud.gaussians_mut()[i] = Gaussian::from_params(&p);
                loss_of(&cloud, scene, term, app)
            };
            let check = match finite_difference(base[k], cfg.step, &base_sig, &mut eval)? {
                Some(fd) => Check::Compared { analytic: analytic[i][k], fd },
                None => Check::Skipped,
            };
            report.row_mut(param::field_name(k), term.name).record(check, cfg);
        }
    }
    if let Some(fx) = fixture.as_ref() {
        let split = fx.net.config.net_param_count();
        for k in 0..fx.net.params.len() {
            let mut eval = |x: f64| -> Result<(f64, Vec<i64>)> {
                let mut f = fx.clone();
                f.net.params[k] = x;
                loss_of(&scene.cloud, scene, term, Some(&f))
            };
            let check = match finite_difference(fx.net.params[k], cfg.step, &base_sig, &mut eval)? {
                Some(fd) => Check::Compared { analytic: app_analytic[k], fd },
                None => Check::Skipped,
            };
            let class = if k < split { "app_net" } else { "app_latent" };
            report.row_mut(class, term.name).record(check, cfg);
        }
    }
    Ok(())
}

/// Runs every loss configuration on `cfg.scenes` random scenes.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut report = GradcheckReport { rows: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    for s in 0..cfg.scenes {
        let scene = random_scene(cfg.seed.wrapping_mul(1000).wrapping_add(s as u64));
        for term in term_configs() {
            check_scene(&scene, &term, cfg, &mut rng, &mut report)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_scene_passes() {
        let cfg = GradcheckConfig { scenes: 1, seed: 3, ..Default::default() };
        let report = run_gradcheck(&cfg).unwrap();
        assert!(report.passed(), "\n{}", report.table());
        assert!(report.rows.iter().all(|r| r.checked > 0));
    }

    #[test]
    fn one_sided_fallback_at_a_kink() {
        // |x| at 0 with the sign as signature: both sides change, so skipped;
        // at x = 1e-5 only the minus side crosses.
        let mut eval = |x: f64| -> Result<(f64, bool)> { Ok((x.abs(), x > 0.0)) };
        let fd = finite_difference(1e-5, 1e-5, &true, &mut eval).unwrap().unwrap();
        assert!((fd - 1.0).abs() < 1e-9);
        let mut eval = |x: f64| -> Result<(f64, i8)> { Ok((x.abs(), x.partial_cmp(&0.0).unwrap() as i8)) };
        assert_eq!(finite_difference(0.0, 1e-5, &0, &mut eval).unwrap(), None);
    }
}
