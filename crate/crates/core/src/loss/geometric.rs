//! Depth-normal consistency and depth distortion regularizers.

use super::variance::distortion_ray;
use crate::render::RenderOutputs;
use crate::scene::Camera;
use crate::Vec3;

/// Pixels whose accumulated opacity is below this are left out of the
/// depth-normal term.
pub const DEPTH_NORMAL_MIN_OPACITY: f64 = 0.5;
const MIN_NORMAL_NORM: f64 = 1e-6;
const MIN_CROSS_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeometricLosses {
    pub depth_normal: f64,
    pub distortion: f64,
    /// Pixels that entered the depth-normal mean.
    pub depth_normal_pixels: usize,
}

/// Unnormalized normal of the back-projected depth surface at an interior
/// pixel, as `(dx, dy, cross)`.
struct Stencil {
    dx: Vec3,
    dy: Vec3,
    cross: Vec3,
}

fn back_project(outputs: &RenderOutputs, cam: &Camera, x: usize, y: usize) -> (Vec3, Vec3) {
    let ray = cam.pixel_ray(x as f64, y as f64);
    (ray.origin + ray.direction * outputs.depth.data[y * outputs.width + x], ray.direction)
}

fn stencil(outputs: &RenderOutputs, cam: &Camera, x: usize, y: usize) -> Option<Stencil> {
    let (w, h) = (outputs.width, outputs.height);
    if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
        return None;
    }
    let opaque = |xx: usize, yy: usize| 1.0 - outputs.transmittance.data[yy * w + xx] >= DEPTH_NORMAL_MIN_OPACITY;
    if !(opaque(x, y) && opaque(x - 1, y) && opaque(x + 1, y) && opaque(x, y - 1) && opaque(x, y + 1)) {
        return None;
    }
    let dx = back_project(outputs, cam, x + 1, y).0 - back_project(outputs, cam, x - 1, y).0;
    let dy = back_project(outputs, cam, x, y + 1).0 - back_project(outputs, cam, x, y - 1).0;
    let cross = dx.cross(&dy);
    if cross.norm() < MIN_CROSS_NORM {
        return None;
    }
    Some(Stencil { dx, dy, cross })
}

fn blended_normal(outputs: &RenderOutputs, p: usize) -> Vec3 {
    Vec3::new(outputs.normal.data[3 * p], outputs.normal.data[3 * p + 1], outputs.normal.data[3 * p + 2])
}

/// Per-pixel depth-normal residual `1 - N̂·n_depth` (`None` for excluded pixels).
pub fn depth_normal_map(outputs: &RenderOutputs, cam: &Camera) -> Vec<Option<f64>> {
    (0..outputs.width * outputs.height)
        .map(|p| {
            let (x, y) = (p % outputs.width, p / outputs.width);
            let n = blended_normal(outputs, p);
            if n.norm() < MIN_NORMAL_NORM {
                return None;
            }
            let st = stencil(outputs, cam, x, y)?;
            let dir = cam.pixel_ray(x as f64, y as f64).direction;
            let mut nd = st.cross.normalize();
            if nd.dot(&dir) > 0.0 {
                nd = -nd;
            }
            Some(1.0 - n.normalize().dot(&nd))
        })
        .collect()
}

pub fn geometric_losses(outputs: &RenderOutputs, cam: &Camera) -> GeometricLosses {
    let map = depth_normal_map(outputs, cam);
    let valid: Vec<f64> = map.into_iter().flatten().collect();
    let depth_normal = if valid.is_empty() {
        0.0
    } else {
        valid.iter().sum::<f64>() / valid.len() as f64
    };
    GeometricLosses {
        depth_normal,
        distortion: distortion_mean(outputs),
        depth_normal_pixels: valid.len(),
    }
}

/// Mean over all rays of the per-ray weighted depth variance. Requires
/// retained samples.
pub fn distortion_mean(outputs: &RenderOutputs) -> f64 {
    let samples = outputs.samples();
    samples.iter().map(distortion_ray).sum::<f64>() / samples.len().max(1) as f64
}

/// Gradient of `scale · Σ_valid (1 - N̂·n_depth)` w.r.t. the blended normal
/// (3 per pixel) and depth buffers.
pub fn depth_normal_backward(outputs: &RenderOutputs, cam: &Camera, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (outputs.width, outputs.height);
    let mut d_normal = vec![0.0; 3 * w * h];
    let mut d_depth = vec![0.0; w * h];
    if scale == 0.0 {
        return (d_normal, d_depth);
    }
    for p in 0..w * h {
        let (x, y) = (p % w, p / w);
        let n = blended_normal(outputs, p);
        let n_len = n.norm();
        if n_len < MIN_NORMAL_NORM {
            continue;
        }
        let Some(st) = stencil(outputs, cam, x, y) else {
            continue;
        };
        let dir = cam.pixel_ray(x as f64, y as f64).direction;
        let c_len = st.cross.norm();
        let c_hat = st.cross / c_len;
        let sign = if c_hat.dot(&dir) > 0.0 { -1.0 } else { 1.0 };
        let n_hat = n / n_len;
        let nd = c_hat * sign;
        // value = 1 - n̂·nd
        let g_n = -(nd - n_hat * n_hat.dot(&nd)) / n_len * scale;
        let g_c = -(n_hat - c_hat * c_hat.dot(&n_hat)) * (sign / c_len) * scale;
        d_normal[3 * p] += g_n.x;
        d_normal[3 * p + 1] += g_n.y;
        d_normal[3 * p + 2] += g_n.z;
        // cross = dx × dy
        let g_dx = st.dy.cross(&g_c);
        let g_dy = g_c.cross(&st.dx);
        let mut push = |xx: usize, yy: usize, g: Vec3| {
            let d = cam.pixel_ray(xx as f64, yy as f64).direction;
            d_depth[yy * w + xx] += g.dot(&d);
        };
        push(x + 1, y, g_dx);
        push(x - 1, y, -g_dx);
        push(x, y + 1, g_dy);
        push(x, y - 1, -g_dy);
    }
    (d_normal, d_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::render_image;
    use crate::scene::{Gaussian, GaussianCloud};
    use nalgebra::Vector4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane_cloud() -> GaussianCloud {
        let mut gs = Vec::new();
        for i in -12..=12 {
            for j in -12..=12 {
                let mut g = Gaussian::isotropic(Vec3::new(i as f64 * 0.05, j as f64 * 0.05, 0.0), 0.05, 0.95, [0.5; 3]);
                g.log_scale.z = (1e-4f64).ln();
                gs.push(g);
            }
        }
        GaussianCloud::new(gs)
    }

    fn front_camera(w: usize, h: usize) -> Camera {
        Camera::look_at(Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::new(0.0, 1.0, 0.0), 0.4, w, h, 0).unwrap()
    }

    #[test]
    fn fronto_parallel_plane_is_consistent() {
        let cloud = plane_cloud();
        let cam = front_camera(16, 16);
        let out = render_image(&cloud, &cam, true);
        let g = geometric_losses(&out, &cam);
        assert!(g.depth_normal_pixels > 100);
        assert!(g.depth_normal < 1e-3, "{}", g.depth_normal);
    }

    #[test]
    fn single_contributor_rays_have_no_distortion() {
        let cloud = GaussianCloud::new(vec![Gaussian::isotropic(Vec3::zeros(), 0.3, 0.7, [0.5; 3])]);
        let cam = front_camera(8, 8);
        let out = render_image(&cloud, &cam, true);
        assert!(out.samples().iter().any(|s| s.contribs.len() == 1));
        assert!(distortion_mean(&out).abs() < 1e-15);
    }

    #[test]
    fn distortion_matches_weighted_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gs = (0..30)
            .map(|_| {
                let mut g = Gaussian::isotropic(
                    Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
                    rng.random_range(0.05..0.2),
                    rng.random_range(0.2..0.9),
                    [0.5; 3],
                );
                g.rotation = Vector4::new(rng.random(), rng.random(), rng.random(), rng.random());
                g
            })
            .collect();
        let cloud = GaussianCloud::new(gs);
        let cam = front_camera(12, 12);
        let out = render_image(&cloud, &cam, true);
        let mut total = 0.0;
        for s in out.samples() {
            let w: Vec<f64> = s.contribs.iter().map(|c| c.weight).collect();
            let t: Vec<f64> = s.contribs.iter().map(|c| c.t).collect();
            let ws: f64 = w.iter().sum();
            if ws > 0.0 {
                let mean = w.iter().zip(&t).map(|(a, b)| a * b).sum::<f64>() / ws;
                total += w.iter().zip(&t).map(|(a, b)| a * (b - mean).powi(2)).sum::<f64>();
            }
        }
        assert!((distortion_mean(&out) - total / 144.0).abs() < 1e-10);
    }

    #[test]
    fn depth_normal_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cloud = plane_cloud();
        for g in cloud.gaussians_mut() {
            g.position.z = rng.random_range(-0.05..0.05);
            g.rotation = Vector4::new(1.0, rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), 0.0);
        }
        let cam = front_camera(10, 10);
        let out = render_image(&cloud, &cam, true);
        let f = |o: &RenderOutputs| -> f64 { depth_normal_map(o, &cam).into_iter().flatten().sum::<f64>() * 0.7 };
        let (dn, dd) = depth_normal_backward(&out, &cam, 0.7);
        let h = 1e-6;
        for i in 0..dd.len() {
            let mut p = out.clone();
            let mut m = out.clone();
            p.depth.data[i] += h;
            m.depth.data[i] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            assert!((fd - dd[i]).abs() < 1e-6 * (1.0 + fd.abs()), "depth {i}: {fd} vs {}", dd[i]);
        }
        for i in 0..dn.len() {
            let mut p = out.clone();
            let mut m = out.clone();
            p.normal.data[i] += h;
            m.normal.data[i] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            assert!((fd - dn[i]).abs() < 1e-6 * (1.0 + fd.abs()), "normal {i}");
        }
    }
}
