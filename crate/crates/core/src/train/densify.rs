//! Confidence-steered densification: clone small primitives, split large
//! ones and prune transparent ones.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scene::{Gaussian, GaussianCloud};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensifyConfig {
    /// Base threshold on the mean world-space positional gradient norm.
    pub grad_threshold: f64,
    pub interval: usize,
    pub start: usize,
    /// Densification stops after this fraction of the run.
    pub stop_fraction: f64,
    /// Primitives whose largest scale exceeds this fraction of the scene
    /// extent are split, smaller ones cloned.
    pub percent_dense: f64,
    pub prune_opacity: f64,
    pub max_primitives: usize,
    pub split_factor: f64,
    /// Divide the threshold by `min(γ̃, 1)`; off gives the plain threshold.
    pub confidence_steered: bool,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        DensifyConfig {
            grad_threshold: 2e-4,
            interval: 100,
            start: 500,
            stop_fraction: 0.6,
            percent_dense: 0.01,
            prune_opacity: 0.005,
            max_primitives: 50_000,
            split_factor: 1.6,
            confidence_steered: true,
        }
    }
}

impl DensifyConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.grad_threshold > 0.0
            && self.interval > 0
            && self.percent_dense > 0.0
            && self.prune_opacity > 0.0
            && self.split_factor > 0.0
            && self.max_primitives > 0
            && (0.0..=1.0).contains(&self.stop_fraction);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidArgument("densification thresholds must be positive".into()))
        }
    }

    pub fn stop(&self, total_iterations: usize) -> usize {
        (total_iterations as f64 * self.stop_fraction).round() as usize
    }

    /// Whether a densify/prune event follows the step that completed
    /// `completed` iterations.
    pub fn is_event(&self, completed: usize, total_iterations: usize) -> bool {
        completed > self.start && completed <= self.stop(total_iterations) && completed % self.interval == 0
    }
}

/// `τ / min(γ̃, 1)`.
pub fn effective_threshold(tau: f64, gamma_tilde: f64) -> f64 {
    tau / gamma_tilde.min(1.0)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensifyOutcome {
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
    /// Additions were skipped because the primitive cap was reached.
    pub capped: bool,
    /// For each row of the new cloud, the old row it continues (its
    /// optimizer state is carried) or `None` for a fresh primitive.
    pub sources: Vec<Option<usize>>,
}

fn sample_offset(g: &Gaussian, rng: &mut impl Rng, scale: f64) -> Vec3 {
    let z = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
    g.rotation_matrix() * g.scales().component_mul(&z) * scale
}

/// Applies one densify/prune event and resets the statistics.
///
/// Candidates are primitives whose mean accumulated positional gradient
/// exceeds their effective threshold. Small candidates get a jittered clone,
/// large ones are replaced by two children sampled from their own density
/// with scales divided by `split_factor`. Children inherit every parameter,
/// including confidence. Finally primitives below the opacity floor are
/// removed.
pub fn densify_and_prune(cloud: &mut GaussianCloud, cfg: &DensifyConfig, extent: f64, rng: &mut impl Rng) -> DensifyOutcome {
    let n = cloud.len();
    let mut out = DensifyOutcome::default();
    let mut rows: Vec<(Gaussian, Option<usize>)> = Vec::with_capacity(n);
    let mut added: Vec<(Gaussian, Option<usize>)> = Vec::new();
    let mut budget = cfg.max_primitives.saturating_sub(n);
    for (i, g) in cloud.gaussians().iter().enumerate() {
        let tau = if cfg.confidence_steered {
            effective_threshold(cfg.grad_threshold, g.confidence())
        } else {
            cfg.grad_threshold
        };
        let grad = cloud.densify.mean(i);
        if !(grad >= tau) {
            rows.push((g.clone(), Some(i)));
            continue;
        }
        let big = g.scales().max() > cfg.percent_dense * extent;
        if big {
            if budget == 0 {
                out.capped = true;
                rows.push((g.clone(), Some(i)));
                continue;
            }
            budget -= 1;
            out.split += 1;
            for child in 0..2 {
                let mut c = g.clone();
                c.position += sample_offset(g, rng, 1.0);
                c.log_scale = g.log_scale.map(|l| l - cfg.split_factor.ln());
                if child == 0 {
                    rows.push((c, None));
                } else {
                    added.push((c, None));
                }
            }
        } else {
            if budget == 0 {
                out.capped = true;
                rows.push((g.clone(), Some(i)));
                continue;
            }
            budget -= 1;
            out.cloned += 1;
            rows.push((g.clone(), Some(i)));
            let mut c = g.clone();
            c.position += sample_offset(g, rng, 0.1);
            added.push((c, None));
        }
    }
    rows.extend(added);
    let before_prune = rows.len();
    rows.retain(|(g, _)| g.opacity() >= cfg.prune_opacity);
    out.pruned = before_prune - rows.len();
    out.sources = rows.iter().map(|r| r.1).collect();
    let degree = cloud.active_sh_degree;
    *cloud = GaussianCloud::new(rows.into_iter().map(|r| r.0).collect()).with_sh_degree(degree);
    out
}
