//! Adam with per-parameter-group learning rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::GradientBuffer;
use crate::scene::{param, Gaussian, GaussianCloud, PARAM_COUNT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    /// Position rates are multiplied by the scene extent.
    pub position_init: f64,
    pub position_final: f64,
    pub rotation: f64,
    pub log_scale: f64,
    pub opacity: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
    pub gamma: f64,
    pub appearance_net: f64,
    pub appearance_latent: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            position_init: 1.6e-4,
            position_final: 1.6e-6,
            rotation: 1e-3,
            log_scale: 5e-3,
            opacity: 5e-2,
            sh_dc: 2.5e-3,
            sh_rest: 1.25e-4,
            gamma: 2.5e-4,
            appearance_net: 1e-3,
            appearance_latent: 1e-3,
        }
    }
}

impl LearningRates {
    /// Log-linear decay from `position_init` to `position_final` over the run.
    pub fn position_at(&self, iteration: usize, total: usize) -> f64 {
        let t = if total == 0 { 1.0 } else { (iteration as f64 / total as f64).clamp(0.0, 1.0) };
        (self.position_init.ln() * (1.0 - t) + self.position_final.ln() * t).exp()
    }

    /// Learning rate of every slot of [`Gaussian::to_params`].
    pub fn per_param(&self, position_lr: f64) -> [f64; PARAM_COUNT] {
        let mut lr = [self.sh_rest; PARAM_COUNT];
        lr[param::POSITION..param::ROTATION].fill(position_lr);
        lr[param::ROTATION..param::LOG_SCALE].fill(self.rotation);
        lr[param::LOG_SCALE..param::OPACITY].fill(self.log_scale);
        lr[param::OPACITY] = self.opacity;
        lr[param::SH_DC..param::SH_REST].fill(self.sh_dc);
        lr[param::GAMMA] = self.gamma;
        lr
    }
}

#[inline]
fn adam_update(cfg: &AdamConfig, bc1: f64, bc2: f64, x: &mut f64, m: &mut f64, v: &mut f64, g: f64, lr: f64) {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    *x -= lr * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
}

/// Moment buffers row-aligned with a Gaussian cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianAdam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<[f64; PARAM_COUNT]>,
    pub v: Vec<[f64; PARAM_COUNT]>,
}

impl GaussianAdam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        GaussianAdam {
            config,
            step: 0,
            m: vec![[0.0; PARAM_COUNT]; n],
            v: vec![[0.0; PARAM_COUNT]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One step on every primitive; quaternions are renormalized afterwards.
    pub fn step(&mut self, cloud: &mut GaussianCloud, grads: &GradientBuffer, lr: &[f64; PARAM_COUNT]) {
        assert_eq!(cloud.len(), self.m.len());
        assert_eq!(cloud.len(), grads.len());
        self.step += 1;
        let cfg = self.config;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        cloud
            .gaussians_mut()
            .par_iter_mut()
            .zip(self.m.par_iter_mut())
            .zip(self.v.par_iter_mut())
            .zip(grads.params.par_iter())
            .for_each(|(((g, m), v), grad)| {
                let mut p = g.to_params();
                for k in 0..PARAM_COUNT {
                    adam_update(&cfg, bc1, bc2, &mut p[k], &mut m[k], &mut v[k], grad[k], lr[k]);
                }
                let mut next = Gaussian::from_params(&p);
                next.rotation = next.rotation.normalize();
                *g = next;
            });
    }

    /// Reorders the buffers after a densify/prune event: row `j` of the new
    /// state copies row `sources[j]`, or starts at zero when `None`.
    pub fn remap(&mut self, sources: &[Option<usize>]) {
        let pick = |buf: &[[f64; PARAM_COUNT]]| -> Vec<[f64; PARAM_COUNT]> {
            sources.iter().map(|s| s.map_or([0.0; PARAM_COUNT], |i| buf[i])).collect()
        };
        self.m = pick(&self.m);
        self.v = pick(&self.v);
    }
}

/// Adam over a flat parameter vector with one learning rate per range.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatAdam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlatAdam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        FlatAdam {
            config,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// `lr(i)` gives the rate of parameter `i`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: impl Fn(usize) -> f64) {
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let cfg = self.config;
        let bc1 = 1.0 - cfg.beta1.powi(self.step as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            adam_update(&cfg, bc1, bc2, &mut params[i], &mut self.m[i], &mut self.v[i], grad[i], lr(i));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn position_decay_endpoints() {
        let lr = LearningRates::default();
        assert!((lr.position_at(0, 100) - 1.6e-4).abs() < 1e-18);
        assert!((lr.position_at(100, 100) - 1.6e-6).abs() < 1e-18);
        assert!((lr.position_at(50, 100) - 1.6e-5).abs() < 1e-17);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut adam = FlatAdam::new(AdamConfig::default(), 3);
        let mut x = vec![1.0, 2.0, 3.0];
        adam.step(&mut x, &[0.5, -2.0, 0.0], |_| 0.1);
        assert!((x[0] - 0.9).abs() < 1e-12);
        assert!((x[1] - 2.1).abs() < 1e-12);
        assert_eq!(x[2], 3.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut adam = FlatAdam::new(AdamConfig::default(), 2);
        let mut x = vec![3.0, -4.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 1.0), 2.0 * (x[1] + 0.5)];
            adam.step(&mut x, &g, |_| 0.05);
        }
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] + 0.5).abs() < 1e-3);
    }

    #[test]
    fn quaternions_stay_unit_and_remap_follows_rows() {
        let mut cloud = GaussianCloud::new(vec![
            Gaussian::isotropic(Vec3::zeros(), 0.1, 0.5, [0.5; 3]),
            Gaussian::isotropic(Vec3::x(), 0.1, 0.5, [0.5; 3]),
        ]);
        let mut adam = GaussianAdam::new(AdamConfig::default(), 2);
        let mut grads = GradientBuffer::zeros(2);
        grads.params[0][param::ROTATION + 1] = 1.0;
        grads.params[1][param::POSITION] = 7.0;
        adam.step(&mut cloud, &grads, &LearningRates::default().per_param(1e-2));
        for g in cloud.gaussians() {
            assert!((g.rotation.norm() - 1.0).abs() < 1e-12);
        }
        let row1 = adam.m[1];
        adam.remap(&[Some(1), None, Some(1)]);
        assert_eq!(adam.m[0], row1);
        assert_eq!(adam.m[1], [0.0; PARAM_COUNT]);
        assert_eq!(adam.m[2], row1);
    }
}
