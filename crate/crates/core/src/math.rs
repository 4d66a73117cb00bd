//! Scalar activations and quaternion/rotation helpers with their derivatives.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector4};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Rotation matrix of the normalized quaternion `q = (w, x, y, z)`.
pub fn quat_to_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    let n = q.norm();
    let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Pulls a gradient w.r.t. the rotation matrix back onto the raw (unnormalized)
/// quaternion used by [`quat_to_rotation`].
pub fn quat_to_rotation_backward(q: &Vector4<f64>, d_rot: &Matrix3<f64>) -> Vector4<f64> {
    let n = q.norm();
    let qn = q / n;
    let (w, x, y, z) = (qn[0], qn[1], qn[2], qn[3]);
    let g = |r: usize, c: usize| d_rot[(r, c)];

    let dw = 2.0
        * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    let dx = 2.0
        * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2)
            + z * g(2, 0)
            + w * g(2, 1)
            - 2.0 * x * g(2, 2));
    let dy = 2.0
        * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2)
            - w * g(2, 0)
            + z * g(2, 1)
            - 2.0 * y * g(2, 2));
    let dz = 2.0
        * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1)
            + y * g(1, 2)
            + x * g(2, 0)
            + y * g(2, 1));

    let dqn = Vector4::new(dw, dx, dy, dz);
    (dqn - qn * qn.dot(&dqn)) / n
}

/// Quaternion `(w, x, y, z)` of a rotation matrix.
pub fn rotation_to_quat(r: &Matrix3<f64>) -> Vector4<f64> {
    let rot = nalgebra::Rotation3::from_matrix(r);
    let uq = UnitQuaternion::from_rotation_matrix(&rot);
    let q: &Quaternion<f64> = uq.as_ref();
    Vector4::new(q.w, q.i, q.j, q.k)
}

pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

pub fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}
