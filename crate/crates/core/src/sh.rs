//! Real spherical harmonics up to degree 3 (Condon–Shortley phase, the basis
//! used by standard 3DGS checkpoints) and the view-dependent color they define.

use crate::scene::SH_COEFFS;
use crate::Vec3;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values for unit direction `d`; entries above `degree` are zero.
pub fn basis(d: &Vec3, degree: usize) -> [f64; SH_COEFFS] {
    let mut b = [0.0; SH_COEFFS];
    b[0] = SH_C0;
    if degree == 0 {
        return b;
    }
    let (x, y, z) = (d.x, d.y, d.z);
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

/// Color before the clamp: `Σ_k θ_k Y_k(d) + 0.5` per channel.
pub fn eval_unclamped(coeffs: &[[f64; 3]; SH_COEFFS], d: &Vec3, degree: usize) -> [f64; 3] {
    let b = basis(d, degree);
    let n = (degree + 1) * (degree + 1);
    let mut out = [0.5; 3];
    for k in 0..n {
        for c in 0..3 {
            out[c] += coeffs[k][c] * b[k];
        }
    }
    out
}

/// View-dependent color, clamped at zero from below.
pub fn sh_eval(coeffs: &[[f64; 3]; SH_COEFFS], d: &Vec3, degree: usize) -> [f64; 3] {
    eval_unclamped(coeffs, d, degree).map(|v| v.max(0.0))
}

/// Accumulates `∂L/∂θ` given `∂L/∂color`. Channels clamped to zero in the
/// forward pass receive no gradient.
pub fn sh_backward(
    coeffs: &[[f64; 3]; SH_COEFFS],
    d: &Vec3,
    degree: usize,
    d_color: &[f64; 3],
    out: &mut [f64],
) {
    let raw = eval_unclamped(coeffs, d, degree);
    let b = basis(d, degree);
    let n = (degree + 1) * (degree + 1);
    for c in 0..3 {
        if raw[c] < 0.0 || d_color[c] == 0.0 {
            continue;
        }
        for k in 0..n {
            out[3 * k + c] += d_color[c] * b[k];
        }
    }
}
