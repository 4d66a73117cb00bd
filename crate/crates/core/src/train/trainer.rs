use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, FlatAdam, GaussianAdam, LearningRates};
use super::dataset::{init_from_points, Dataset};
use super::densify::{densify_and_prune, DensifyConfig, DensifyOutcome};
use crate::appearance::{Appearance, AppearanceKind, CnnConfig};
use crate::backward::{backward_splats, GradientBuffer};
use crate::eval::psnr;
use crate::loss::{pixel_gradients, total_loss, LossInputs, LossReport, LossWeights};
use crate::render::{render_image, RenderOutputs};
use crate::scene::{GaussianCloud, SH_DEGREE_MAX};
use crate::{Result, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub densify: DensifyConfig,
    pub lr: LearningRates,
    pub adam: AdamConfig,
    pub appearance: AppearanceKind,
    pub cnn: CnnConfig,
    pub max_sh_degree: usize,
    /// One more SH band becomes active every this many iterations.
    pub sh_warmup_interval: usize,
    /// Primitives drawn at random when the dataset has no points.
    pub random_init_points: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::new(7000)
    }
}

impl TrainConfig {
    /// Defaults with the geometric regularizers scheduled for `iterations`.
    pub fn new(iterations: usize) -> Self {
        TrainConfig {
            iterations,
            seed: 0,
            weights: LossWeights::default().scheduled_for(iterations),
            densify: DensifyConfig::default(),
            lr: LearningRates::default(),
            adam: AdamConfig::default(),
            appearance: AppearanceKind::None,
            cnn: CnnConfig::default(),
            max_sh_degree: SH_DEGREE_MAX,
            sh_warmup_interval: 1000,
            random_init_points: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.densify.validate()?;
        if self.sh_warmup_interval == 0 {
            return Err(crate::Error::InvalidArgument("sh_warmup_interval must be positive".into()));
        }
        self.cnn.validate()
    }
}

/// Per-iteration training record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub view: usize,
    pub psnr: f64,
    pub primitives: usize,
    pub loss: LossReport,
}

impl IterationRecord {
    pub fn csv_header() -> String {
        format!("view,psnr,primitives,{}", LossReport::csv_header())
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.view, self.psnr, self.primitives, self.loss.csv_row())
    }
}

/// Outcome of a densification event, for logging.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensifyEvent {
    pub iteration: usize,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
    pub capped: bool,
    pub primitives: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub cloud: GaussianCloud,
    pub appearance: Appearance,
    pub log: Vec<IterationRecord>,
    pub densify_events: Vec<DensifyEvent>,
}

/// Uniform random points in the cube spanned by the camera rig, used when the
/// dataset carries no initial points.
pub fn random_points(data: &Dataset, n: usize, rng: &mut impl Rng) -> Vec<(Vec3, [f64; 3])> {
    let (center, extent) = data.extent();
    let half = extent / 2.2;
    (0..n)
        .map(|_| {
            let p = center + Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half));
            (p, [rng.random(), rng.random(), rng.random()])
        })
        .collect()
}

pub struct Trainer<'a> {
    data: &'a Dataset,
    pub config: TrainConfig,
    pub cloud: GaussianCloud,
    pub appearance: Appearance,
    adam: GaussianAdam,
    app_adam: FlatAdam,
    rng: ChaCha8Rng,
    extent: f64,
    pub iteration: usize,
    pub log: Vec<IterationRecord>,
    pub densify_events: Vec<DensifyEvent>,
}

impl<'a> Trainer<'a> {
    /// Initializes from the dataset points (or random points) and a fresh
    /// appearance model.
    pub fn new(data: &'a Dataset, config: TrainConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let cloud = if data.points.is_empty() {
            init_from_points(&random_points(data, config.random_init_points, &mut rng))
        } else {
            init_from_points(&data.points)
        };
        Self::with_cloud(data, config, cloud)
    }

    pub fn with_cloud(data: &'a Dataset, config: TrainConfig, cloud: GaussianCloud) -> Result<Self> {
        config.validate()?;
        let appearance = Appearance::new(config.appearance, data.len(), config.cnn.clone(), config.seed ^ 0x5eed)?;
        let adam = GaussianAdam::new(config.adam, cloud.len());
        let app_adam = FlatAdam::new(config.adam, appearance.params().len());
        Ok(Trainer {
            data,
            extent: data.extent().1,
            rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1)),
            config,
            cloud,
            appearance,
            adam,
            app_adam,
            iteration: 0,
            log: Vec::new(),
            densify_events: Vec::new(),
        })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Round-robin view order.
    pub fn view_at(&self, iteration: usize) -> usize {
        iteration % self.data.len()
    }

    /// Loss and gradients at the current state for one view, without
    /// updating anything. Returns the render, report, splat gradients and
    /// appearance gradients.
    pub fn evaluate(&self, view: usize) -> Result<(RenderOutputs, LossReport, GradientBuffer, Option<Vec<f64>>)> {
        let cam = &self.data.cameras[view];
        let target = &self.data.images[view];
        let render = render_image(&self.cloud, cam, true);
        let app = self.appearance.forward(&render.color, cam.image_id)?;
        // Held constant: no gradient flows through the inverse map.
        let raw_target = match &app {
            Some((_, cache)) => Some(self.appearance.invert(target, cache)?),
            None => None,
        };
        let inputs = LossInputs {
            target,
            render: &render,
            appearance: app.as_ref().map(|a| &a.0),
            decoupled_luminance: self.appearance.decoupled_luminance(),
            camera: cam,
            iteration: self.iteration,
            color_var_target: raw_target.as_ref(),
        };
        let report = total_loss(&inputs, &self.config.weights)?;
        let mut grads = pixel_gradients(&inputs, &self.config.weights, &report)?;
        let mut app_grad = None;
        if let (Some(d_app), Some((_, cache))) = (grads.d_appearance.take(), app.as_ref()) {
            let (d_img, g) = self.appearance.backward(cache, &d_app)?;
            grads.d_color.data.iter_mut().zip(&d_img.data).for_each(|(a, b)| *a += b);
            app_grad = Some(g);
        }
        let buffer = backward_splats(&self.cloud, &render, raw_target.as_ref().unwrap_or(target), &grads)?;
        Ok((render, report, buffer, app_grad))
    }

    pub fn step(&mut self) -> Result<&IterationRecord> {
        let it = self.iteration;
        self.cloud.active_sh_degree = (it / self.config.sh_warmup_interval).min(self.config.max_sh_degree);
        let view = self.view_at(it);
        let (render, report, grads, app_grad) = self.evaluate(view)?;
        let record = IterationRecord {
            view,
            psnr: psnr(&self.data.images[view], &render.color.clamped01())?,
            primitives: self.cloud.len(),
            loss: report,
        };

        let total = self.config.iterations;
        let densifying = it < self.config.densify.stop(total);
        if densifying {
            grads.accumulate_densify(&mut self.cloud);
        }
        let lr = self.config.lr.per_param(self.config.lr.position_at(it, total) * self.extent);
        self.adam.step(&mut self.cloud, &grads, &lr);
        if let Some(g) = app_grad {
            let (net_lr, latent_lr) = (self.config.lr.appearance_net, self.config.lr.appearance_latent);
            let split = match &self.appearance {
                Appearance::Cnn(c) => c.config.net_param_count(),
                _ => 0,
            };
            self.app_adam
                .step(self.appearance.params_mut(), &g, |i| if i < split { net_lr } else { latent_lr });
        }

        self.iteration += 1;
        if self.config.densify.is_event(self.iteration, total) {
            let out = densify_and_prune(&mut self.cloud, &self.config.densify, self.extent, &mut self.rng);
            self.adam.remap(&out.sources);
            self.record_event(&out);
        }
        self.log.push(record);
        Ok(self.log.last().expect("just pushed"))
    }

    fn record_event(&mut self, out: &DensifyOutcome) {
        self.densify_events.push(DensifyEvent {
            iteration: self.iteration,
            cloned: out.cloned,
            split: out.split,
            pruned: out.pruned,
            capped: out.capped,
            primitives: self.cloud.len(),
        });
    }

    /// Runs the remaining iterations, calling `hook` after each.
    pub fn run(&mut self, mut hook: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        while self.iteration < self.config.iterations {
            self.step()?;
            hook(self)?;
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutput {
        TrainOutput {
            cloud: self.cloud,
            appearance: self.appearance,
            log: self.log,
            densify_events: self.densify_events,
        }
    }
}

pub fn train(data: &Dataset, config: TrainConfig) -> Result<TrainOutput> {
    let mut t = Trainer::new(data, config)?;
    t.run(|_| Ok(()))?;
    Ok(t.finish())
}
