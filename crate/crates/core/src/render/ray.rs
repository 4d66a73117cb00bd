use super::{ALPHA_CUTOFF, ALPHA_MAX, CONFIDENCE_MAX, CONFIDENCE_MIN, TRANSMITTANCE_EPS};
use crate::scene::{Gaussian, GaussianCloud, Ray};
use crate::sh::sh_eval;
use crate::{Mat3, Vec3};

/// Point of minimum Mahalanobis distance along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxContribution {
    pub point: Vec3,
    pub t: f64,
    /// Squared Mahalanobis distance of `point` from the mean.
    pub mahalanobis: f64,
    /// `t <= 0`: the point lies behind the ray origin and the caller skips it.
    pub behind: bool,
}

/// `x* = o + (dᵀΣ⁻¹(μ−o)) / (dᵀΣ⁻¹d) · d`.
pub fn max_contribution_point(mean: &Vec3, inv_cov: &Mat3, ray: &Ray) -> MaxContribution {
    let pd = inv_cov * ray.direction;
    let denom = ray.direction.dot(&pd);
    let t = pd.dot(&(mean - ray.origin)) / denom;
    let point = ray.at(t);
    let e = point - mean;
    MaxContribution {
        point,
        t,
        mahalanobis: e.dot(&(inv_cov * e)),
        behind: t <= 0.0,
    }
}

/// Opacity of `g` along `ray`, clamped to `ALPHA_MAX`; values below the
/// cutoff are reported as zero.
pub fn alpha_3d(g: &Gaussian, ray: &Ray) -> f64 {
    let (_, inv) = g.covariance();
    let mc = max_contribution_point(&g.position, &inv, ray);
    let alpha = (g.opacity() * (-0.5 * mc.mahalanobis).exp()).min(ALPHA_MAX);
    if alpha < ALPHA_CUTOFF {
        0.0
    } else {
        alpha
    }
}

/// Per-render cache of the activated quantities of one Gaussian.
#[derive(Clone, Debug)]
pub struct PreparedGaussian {
    pub index: u32,
    pub mean: Vec3,
    pub rotation: Mat3,
    pub inv_cov: Mat3,
    pub opacity: f64,
    pub confidence: f64,
    pub normal_axis: usize,
    /// Radius outside which the opacity is below the cutoff; `None` when the
    /// opacity itself is below the cutoff.
    pub cull_radius: Option<f64>,
}

impl PreparedGaussian {
    pub fn new(index: usize, g: &Gaussian) -> Self {
        let (_, inv_cov) = g.covariance();
        let opacity = g.opacity();
        let cull_radius = if opacity * 255.0 < 1.0 {
            None
        } else {
            // o·exp(-m/2) >= 1/255  <=>  m <= 2 ln(255 o); m >= |x-μ|² / s_max².
            let m_max = 2.0 * (opacity * 255.0).ln();
            Some(g.scales().max() * m_max.max(0.0).sqrt() * (1.0 + 1e-6) + 1e-12)
        };
        PreparedGaussian {
            index: index as u32,
            mean: g.position,
            rotation: g.rotation_matrix(),
            inv_cov,
            opacity,
            confidence: g.confidence(),
            normal_axis: g.normal_axis(),
            cull_radius,
        }
    }

    pub fn prepare_all(cloud: &GaussianCloud) -> Vec<PreparedGaussian> {
        cloud
            .gaussians()
            .iter()
            .enumerate()
            .map(|(i, g)| PreparedGaussian::new(i, g))
            .collect()
    }

    pub fn normal(&self, view_dir: &Vec3) -> Vec3 {
        let axis = self.rotation.column(self.normal_axis).into_owned();
        if axis.dot(view_dir) > 0.0 {
            -axis
        } else {
            axis
        }
    }

    /// Opacity hit along `ray`, or `None` if behind the origin or below cutoff.
    pub fn hit(&self, ray: &Ray) -> Option<Hit> {
        let mc = max_contribution_point(&self.mean, &self.inv_cov, ray);
        if mc.behind {
            return None;
        }
        let raw = self.opacity * (-0.5 * mc.mahalanobis).exp();
        let alpha = raw.min(ALPHA_MAX);
        if alpha < ALPHA_CUTOFF {
            return None;
        }
        Some(Hit {
            index: self.index,
            t: mc.t,
            alpha,
            alpha_clamped: raw > ALPHA_MAX,
        })
    }

    /// Cheap conservative rejection: the ray segment `t > 0` misses the
    /// cull sphere.
    #[inline]
    pub fn ray_misses(&self, ray: &Ray) -> bool {
        let Some(r) = self.cull_radius else {
            return true;
        };
        let v = self.mean - ray.origin;
        let tc = v.dot(&ray.direction).max(0.0);
        (v - ray.direction * tc).norm_squared() > r * r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub index: u32,
    pub t: f64,
    pub alpha: f64,
    pub alpha_clamped: bool,
}

/// One blended primitive along a ray.
#[derive(Clone, Debug, PartialEq)]
pub struct Contrib {
    pub index: u32,
    pub weight: f64,
    pub alpha: f64,
    pub t: f64,
    /// Transmittance in front of this primitive, `Π_{j<i}(1-α_j)`.
    pub transmittance: f64,
    pub color: [f64; 3],
    pub normal: Vec3,
    /// Activated confidence `exp(γ)`.
    pub confidence: f64,
    pub alpha_clamped: bool,
}

/// Everything the backward pass needs about one ray.
#[derive(Clone, Debug, PartialEq)]
pub struct RaySample {
    pub ray: Ray,
    pub color: [f64; 3],
    pub normal: Vec3,
    pub depth: f64,
    /// Blended confidence after clamping to `[CONFIDENCE_MIN, CONFIDENCE_MAX]`.
    pub confidence: f64,
    pub confidence_raw: f64,
    pub transmittance: f64,
    /// Sorted ascending in `t`.
    pub contribs: Vec<Contrib>,
}

impl RaySample {
    pub fn empty(ray: Ray) -> Self {
        RaySample {
            ray,
            color: [0.0; 3],
            normal: Vec3::zeros(),
            depth: 0.0,
            confidence: CONFIDENCE_MIN,
            confidence_raw: 0.0,
            transmittance: 1.0,
            contribs: Vec::new(),
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.contribs.iter().map(|c| c.weight).sum()
    }

    pub fn confidence_clamped(&self) -> bool {
        self.confidence_raw < CONFIDENCE_MIN || self.confidence_raw > CONFIDENCE_MAX
    }
}

/// Sorts hits by `(t, index)` and blends them front to back.
pub fn blend_hits(
    mut hits: Vec<Hit>,
    prepared: &[PreparedGaussian],
    gaussians: &[Gaussian],
    ray: &Ray,
    sh_degree: usize,
) -> RaySample {
    hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.index.cmp(&b.index)));
    let mut sample = RaySample::empty(*ray);
    let mut transmittance = 1.0;
    let mut conf_raw = 0.0;
    for hit in hits {
        let i = hit.index as usize;
        let p = &prepared[i];
        let weight = transmittance * hit.alpha;
        let color = sh_eval(&gaussians[i].sh, &ray.direction, sh_degree);
        let normal = p.normal(&ray.direction);
        for c in 0..3 {
            sample.color[c] += weight * color[c];
        }
        sample.normal += normal * weight;
        sample.depth += weight * hit.t;
        conf_raw += weight * p.confidence;
        sample.contribs.push(Contrib {
            index: hit.index,
            weight,
            alpha: hit.alpha,
            t: hit.t,
            transmittance,
            color,
            normal,
            confidence: p.confidence,
            alpha_clamped: hit.alpha_clamped,
        });
        transmittance *= 1.0 - hit.alpha;
        if transmittance < TRANSMITTANCE_EPS {
            break;
        }
    }
    sample.transmittance = transmittance;
    sample.confidence_raw = conf_raw;
    sample.confidence = conf_raw.clamp(CONFIDENCE_MIN, CONFIDENCE_MAX);
    sample
}

/// Renders one ray against every primitive of the cloud.
pub fn render_ray(cloud: &GaussianCloud, ray: &Ray) -> RaySample {
    let prepared = PreparedGaussian::prepare_all(cloud);
    let hits = prepared.iter().filter_map(|p| p.hit(ray)).collect();
    blend_hits(hits, &prepared, cloud.gaussians(), ray, cloud.active_sh_degree)
}
