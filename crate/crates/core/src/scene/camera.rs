use crate::math::orthonormality_error;
use crate::{Error, Mat3, Result, Vec3};

/// Ray `o + t d` with unit direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Pinhole camera (OpenCV convention: x right, y down, z forward).
///
/// `x_cam = rotation * x_world + translation`.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: Mat3,
    pub translation: Vec3,
    pub image_id: usize,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        rotation: Mat3,
        translation: Vec3,
        image_id: usize,
    ) -> Result<Self> {
        let cam = Camera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
            image_id,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` roughly opposite to the
    /// image y axis.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fov_x: f64,
        width: usize,
        height: usize,
        image_id: usize,
    ) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidArgument("look_at: up is parallel to the view direction".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        let fx = 0.5 * width as f64 / (0.5 * fov_x).tan();
        Camera::new(
            fx,
            fx,
            0.5 * width as f64,
            0.5 * height as f64,
            width,
            height,
            rotation,
            translation,
            image_id,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Scene(format!("focal lengths must be positive, got {} {}", self.fx, self.fy)));
        }
        if !(0.0..=self.width as f64).contains(&self.cx) || !(0.0..=self.height as f64).contains(&self.cy) {
            return Err(Error::Scene(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        if orthonormality_error(&self.rotation) > 1e-6 {
            return Err(Error::Scene("camera rotation is not orthonormal".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Ray through the center of pixel `(px, py)` in world space. Fractional
    /// pixel coordinates are accepted.
    pub fn pixel_ray(&self, px: f64, py: f64) -> Ray {
        let dir_cam = Vec3::new((px + 0.5 - self.cx) / self.fx, (py + 0.5 - self.cy) / self.fy, 1.0);
        Ray::new(self.center(), self.rotation.transpose() * dir_cam)
    }

    /// Projects a camera-space point to pixel coordinates (pixel centers at
    /// integer + 0.5).
    pub fn project_cam(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_cam(fx: f64, cx: f64, w: usize) -> Camera {
        Camera::new(fx, fx, cx, cx, w, w, Mat3::identity(), Vec3::zeros(), 0).unwrap()
    }

    #[test]
    fn principal_point_ray_is_optical_axis() {
        let cam = identity_cam(50.0, 4.0, 8);
        let ray = cam.pixel_ray(3.5, 3.5);
        assert!((ray.direction - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn pixel_center_offset_cancels() {
        let cam = identity_cam(1.0, 0.0, 1);
        let ray = cam.pixel_ray(-0.5, -0.5);
        assert!((ray.direction - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn translated_pose_origin_is_camera_center() {
        let eye = Vec3::new(1.5, -2.0, 3.0);
        let cam = Camera::look_at(eye, Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 0.8, 16, 12, 0).unwrap();
        let ray = cam.pixel_ray(5.0, 7.0);
        // Invert the rigid transform numerically: solve R x = -t.
        let origin = cam.rotation.try_inverse().unwrap() * (-cam.translation);
        assert!((ray.origin - origin).norm() < 1e-9);
        assert!((ray.origin - eye).norm() < 1e-9);
        assert!((ray.direction.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn look_at_centers_target() {
        let cam = Camera::look_at(Vec3::new(0.0, -3.0, 1.0), Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 0.8, 16, 16, 0).unwrap();
        let p = cam.world_to_camera(&Vec3::zeros());
        let (u, v) = cam.project_cam(&p);
        assert!((u - 8.0).abs() < 1e-9 && (v - 8.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_intrinsics_rejected() {
        assert!(Camera::new(0.0, 1.0, 0.0, 0.0, 4, 4, Mat3::identity(), Vec3::zeros(), 0).is_err());
        assert!(Camera::new(1.0, 1.0, 5.0, 0.0, 4, 4, Mat3::identity(), Vec3::zeros(), 0).is_err());
        assert!(Camera::new(1.0, 1.0, 2.0, 2.0, 4, 4, Mat3::identity() * 2.0, Vec3::zeros(), 0).is_err());
    }
}
