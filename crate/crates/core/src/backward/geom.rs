//! Chain from a contributor's opacity, depth and normal back to the
//! Gaussian's mean, rotation, scales and opacity logit.
//!
//! With `P = Σ⁻¹`, `e = x* - μ` and `b = dᵀPd`, the Mahalanobis form
//! `m = eᵀPe` is stationary in `t` at `x*`, so its total derivatives are the
//! partial ones: `∂m/∂μ = -2Pe`, `∂m/∂P = eeᵀ`. The depth `t*` contributes
//! `∂t*/∂μ = Pd/b` and `∂t*/∂P = -deᵀ/b`.

use nalgebra::Vector4;

use crate::math::quat_to_rotation_backward;
use crate::render::{max_contribution_point, PreparedGaussian, ALPHA_CUTOFF, ALPHA_MAX};
use crate::scene::{Gaussian, Ray};
use crate::{Mat3, Vec3};

/// Gradient w.r.t. a Gaussian's geometric parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlphaGeomGrad {
    pub position: Vec3,
    pub rotation: Vector4<f64>,
    pub log_scale: Vec3,
    pub opacity_logit: f64,
}

/// Per-Gaussian intermediate gradient, summed over contributors before the
/// (nonlinear) pull-back onto quaternion and scales.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeomAccum {
    pub d_mean: Vec3,
    /// W.r.t. the inverse covariance, unsymmetrized.
    pub d_inv_cov: Mat3,
    /// Direct gradient w.r.t. the rotation matrix (from the normal).
    pub d_rotation: Mat3,
    pub d_opacity_logit: f64,
}

/// One contributor's share of [`GeomAccum`]; `d_inv_cov = u eᵀ`.
#[derive(Clone, Copy, Debug)]
pub struct GeomTerm {
    pub d_mean: Vec3,
    pub u: Vec3,
    pub e: Vec3,
    pub normal_axis: usize,
    pub d_axis: Vec3,
    pub d_opacity_logit: f64,
}

impl GeomAccum {
    pub fn add(&mut self, term: &GeomTerm) {
        self.d_mean += term.d_mean;
        self.d_inv_cov += term.u * term.e.transpose();
        let mut col = self.d_rotation.column_mut(term.normal_axis);
        col += term.d_axis;
        self.d_opacity_logit += term.d_opacity_logit;
    }
}

/// Gradient terms of one contributor given `∂L/∂α`, `∂L/∂t*` and `∂L/∂n`.
pub fn geom_term(p: &PreparedGaussian, ray: &Ray, d_alpha: f64, alpha_clamped: bool, d_t: f64, d_normal: &Vec3) -> GeomTerm {
    let d = ray.direction;
    let pd = p.inv_cov * d;
    let b = d.dot(&pd);
    let mc = max_contribution_point(&p.mean, &p.inv_cov, ray);
    let e = mc.point - p.mean;
    let mut d_mean = pd * (d_t / b);
    let mut u = -d * (d_t / b);
    let mut d_logit = 0.0;
    if !alpha_clamped && d_alpha != 0.0 {
        let falloff = (-0.5 * mc.mahalanobis).exp();
        let alpha = p.opacity * falloff;
        let dm = -0.5 * alpha * d_alpha;
        d_mean -= p.inv_cov * e * (2.0 * dm);
        u += e * dm;
        d_logit = d_alpha * falloff * p.opacity * (1.0 - p.opacity);
    }
    let axis = p.rotation.column(p.normal_axis);
    let sign = if axis.dot(&d) > 0.0 { -1.0 } else { 1.0 };
    GeomTerm {
        d_mean,
        u,
        e,
        normal_axis: p.normal_axis,
        d_axis: d_normal * sign,
        d_opacity_logit: d_logit,
    }
}

/// Pulls the accumulated gradient back onto `(μ, q, log_scale, logit)`.
pub fn finalize(g: &Gaussian, acc: &GeomAccum) -> AlphaGeomGrad {
    let r = g.rotation_matrix();
    let inv_sq = g.log_scale.map(|s| (-2.0 * s).exp());
    let gsum = acc.d_inv_cov + acc.d_inv_cov.transpose();
    let rd = Mat3::from_fn(|i, j| r[(i, j)] * inv_sq[j]);
    let d_rot = acc.d_rotation + gsum * rd;
    let rgr = r.transpose() * acc.d_inv_cov * r;
    let log_scale = Vec3::from_fn(|k, _| -2.0 * inv_sq[k] * rgr[(k, k)]);
    AlphaGeomGrad {
        position: acc.d_mean,
        rotation: quat_to_rotation_backward(&g.rotation, &d_rot),
        log_scale,
        opacity_logit: acc.d_opacity_logit,
    }
}

/// Gradient of a loss with `∂L/∂α = d_alpha` w.r.t. the geometric parameters
/// of `g` along `ray`. Zero when the opacity is clamped or below the cutoff.
pub fn backward_alpha_geom(g: &Gaussian, ray: &Ray, d_alpha: f64) -> AlphaGeomGrad {
    let p = PreparedGaussian::new(0, g);
    let mc = max_contribution_point(&p.mean, &p.inv_cov, ray);
    let raw = p.opacity * (-0.5 * mc.mahalanobis).exp();
    if mc.behind || raw.min(ALPHA_MAX) < ALPHA_CUTOFF {
        return AlphaGeomGrad::default();
    }
    let mut acc = GeomAccum::default();
    acc.add(&geom_term(&p, ray, d_alpha, raw > ALPHA_MAX, 0.0, &Vec3::zeros()));
    finalize(g, &acc)
}
