use nalgebra::Vector4;

use crate::math::{quat_to_rotation, sigmoid};
use crate::sh::SH_C0;
use crate::{Mat3, Vec3};

pub const SH_DEGREE_MAX: usize = 3;
pub const SH_COEFFS: usize = (SH_DEGREE_MAX + 1) * (SH_DEGREE_MAX + 1);

/// Offsets of each field in the flat per-primitive parameter vector used by
/// gradient buffers and optimizer state.
pub mod param {
    pub const POSITION: usize = 0;
    pub const ROTATION: usize = 3;
    pub const LOG_SCALE: usize = 7;
    pub const OPACITY: usize = 10;
    pub const SH_DC: usize = 11;
    pub const SH_REST: usize = 14;
    pub const GAMMA: usize = 59;

    /// Name of the parameter group holding flat offset `k`.
    pub fn field_name(k: usize) -> &'static str {
        match k {
            0..=2 => "position",
            3..=6 => "rotation",
            7..=9 => "log_scale",
            10 => "opacity_logit",
            11..=13 => "sh_dc",
            14..=58 => "sh_rest",
            _ => "gamma",
        }
    }
}

pub const PARAM_COUNT: usize = 60;

/// One anisotropic 3D Gaussian.
///
/// Scales are stored as logs, opacity as a logit and confidence as the raw
/// `gamma`, so every activated quantity satisfies its range by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub position: Vec3,
    /// Quaternion `(w, x, y, z)`; kept at unit norm by the optimizer.
    pub rotation: Vector4<f64>,
    pub log_scale: Vec3,
    pub opacity_logit: f64,
    /// SH coefficients, `sh[k][channel]`, `k` in band order.
    pub sh: [[f64; 3]; SH_COEFFS],
    /// Raw confidence; the activated confidence is `exp(gamma)`.
    pub gamma: f64,
}

impl Gaussian {
    /// Isotropic Gaussian with the given base color (DC term only).
    pub fn isotropic(position: Vec3, scale: f64, opacity: f64, rgb: [f64; 3]) -> Self {
        let mut sh = [[0.0; 3]; SH_COEFFS];
        for c in 0..3 {
            sh[0][c] = (rgb[c] - 0.5) / SH_C0;
        }
        Gaussian {
            position,
            rotation: Vector4::new(1.0, 0.0, 0.0, 0.0),
            log_scale: Vec3::repeat(scale.ln()),
            opacity_logit: crate::math::logit(opacity),
            sh,
            gamma: 0.0,
        }
    }

    pub fn scales(&self) -> Vec3 {
        self.log_scale.map(f64::exp)
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn confidence(&self) -> f64 {
        self.gamma.exp()
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        quat_to_rotation(&self.rotation)
    }

    /// `Σ = R S Sᵀ Rᵀ` and its inverse, both from the same factorization.
    pub fn covariance(&self) -> (Mat3, Mat3) {
        let r = self.rotation_matrix();
        let s2 = self.log_scale.map(|l| (2.0 * l).exp());
        let cov = r * Mat3::from_diagonal(&s2) * r.transpose();
        let inv = r * Mat3::from_diagonal(&s2.map(|v| 1.0 / v)) * r.transpose();
        (symmetrize(&cov), symmetrize(&inv))
    }

    /// Index of the principal axis with the smallest scale (lowest index on ties).
    pub fn normal_axis(&self) -> usize {
        let s = self.log_scale;
        let mut k = 0;
        for i in 1..3 {
            if s[i] < s[k] {
                k = i;
            }
        }
        k
    }

    /// Shortest principal axis, oriented so that `dot(n, view_dir) <= 0`.
    pub fn normal(&self, view_dir: &Vec3) -> Vec3 {
        let r = self.rotation_matrix();
        let axis = r.column(self.normal_axis()).into_owned();
        if axis.dot(view_dir) > 0.0 {
            -axis
        } else {
            axis
        }
    }

    pub fn to_params(&self) -> [f64; PARAM_COUNT] {
        let mut p = [0.0; PARAM_COUNT];
        p[param::POSITION..param::POSITION + 3].copy_from_slice(self.position.as_slice());
        p[param::ROTATION..param::ROTATION + 4].copy_from_slice(self.rotation.as_slice());
        p[param::LOG_SCALE..param::LOG_SCALE + 3].copy_from_slice(self.log_scale.as_slice());
        p[param::OPACITY] = self.opacity_logit;
        for k in 0..SH_COEFFS {
            for c in 0..3 {
                p[param::SH_DC + 3 * k + c] = self.sh[k][c];
            }
        }
        p[param::GAMMA] = self.gamma;
        p
    }

    pub fn from_params(p: &[f64; PARAM_COUNT]) -> Self {
        let mut sh = [[0.0; 3]; SH_COEFFS];
        for (k, coeff) in sh.iter_mut().enumerate() {
            for (c, v) in coeff.iter_mut().enumerate() {
                *v = p[param::SH_DC + 3 * k + c];
            }
        }
        Gaussian {
            position: Vec3::new(p[0], p[1], p[2]),
            rotation: Vector4::new(p[3], p[4], p[5], p[6]),
            log_scale: Vec3::new(p[7], p[8], p[9]),
            opacity_logit: p[param::OPACITY],
            sh,
            gamma: p[param::GAMMA],
        }
    }
}

fn symmetrize(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Per-primitive densification statistics: accumulated world-space positional
/// gradient norms and the number of views that contributed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensifyStats {
    pub grad_accum: Vec<f64>,
    pub count: Vec<u32>,
}

impl DensifyStats {
    pub fn zeros(n: usize) -> Self {
        DensifyStats {
            grad_accum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.grad_accum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grad_accum.is_empty()
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.grad_accum[i] / self.count[i] as f64
        }
    }

    pub fn reset(&mut self) {
        self.grad_accum.iter_mut().for_each(|g| *g = 0.0);
        self.count.iter_mut().for_each(|c| *c = 0);
    }
}

/// Ordered collection of Gaussians plus the bookkeeping that must stay
/// row-aligned with it.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianCloud {
    gaussians: Vec<Gaussian>,
    pub densify: DensifyStats,
    pub active_sh_degree: usize,
}

impl Default for GaussianCloud {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl GaussianCloud {
    pub fn new(gaussians: Vec<Gaussian>) -> Self {
        let n = gaussians.len();
        GaussianCloud {
            gaussians,
            densify: DensifyStats::zeros(n),
            active_sh_degree: 0,
        }
    }

    pub fn with_sh_degree(mut self, degree: usize) -> Self {
        self.active_sh_degree = degree.min(SH_DEGREE_MAX);
        self
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    /// Mutable access to the primitives; the count cannot change through this.
    pub fn gaussians_mut(&mut self) -> &mut [Gaussian] {
        &mut self.gaussians
    }

    pub fn push(&mut self, g: Gaussian) {
        self.gaussians.push(g);
        self.densify.grad_accum.push(0.0);
        self.densify.count.push(0);
    }

    /// Keeps the rows where `keep[i]` is true, in order.
    pub fn retain_mask(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.len());
        let mut idx = 0;
        self.gaussians.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        let mut idx = 0;
        self.densify.grad_accum.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        let mut idx = 0;
        self.densify.count.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
    }

    /// Axis-aligned bounds of the centers, or `None` for an empty cloud.
    pub fn center_bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = self.gaussians.first()?.position;
        Some(self.gaussians.iter().fold((first, first), |(lo, hi), g| {
            (lo.inf(&g.position), hi.sup(&g.position))
        }))
    }

    pub fn max_scale(&self) -> f64 {
        self.gaussians
            .iter()
            .map(|g| g.scales().max())
            .fold(0.0, f64::max)
    }
}
