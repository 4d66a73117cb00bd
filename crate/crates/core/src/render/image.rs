use rayon::prelude::*;

use super::ray::{blend_hits, PreparedGaussian, RaySample};
use crate::scene::{Camera, GaussianCloud, ImageBuffer};
use crate::Vec3;

const TILE: usize = 8;

/// Full-image render buffers, plus per-ray records when retained.
#[derive(Clone, Debug)]
pub struct RenderOutputs {
    pub width: usize,
    pub height: usize,
    pub color: ImageBuffer,
    pub normal: ImageBuffer,
    pub depth: ImageBuffer,
    pub confidence: ImageBuffer,
    pub transmittance: ImageBuffer,
    pub samples: Option<Vec<RaySample>>,
}

impl RenderOutputs {
    fn from_samples(width: usize, height: usize, samples: Vec<RaySample>, retain: bool) -> Self {
        let mut color = ImageBuffer::zeros(width, height, 3);
        let mut normal = ImageBuffer::zeros(width, height, 3);
        let mut depth = ImageBuffer::zeros(width, height, 1);
        let mut confidence = ImageBuffer::zeros(width, height, 1);
        let mut transmittance = ImageBuffer::zeros(width, height, 1);
        for (p, s) in samples.iter().enumerate() {
            color.data[3 * p..3 * p + 3].copy_from_slice(&s.color);
            normal.data[3 * p..3 * p + 3].copy_from_slice(s.normal.as_slice());
            depth.data[p] = s.depth;
            confidence.data[p] = s.confidence;
            transmittance.data[p] = s.transmittance;
        }
        RenderOutputs {
            width,
            height,
            color,
            normal,
            depth,
            confidence,
            transmittance,
            samples: retain.then_some(samples),
        }
    }

    pub fn samples(&self) -> &[RaySample] {
        self.samples.as_deref().expect("render was not run with retained samples")
    }
}

/// Renders every pixel of `cam`.
///
/// Primitives are binned into 8x8 pixel tiles by the screen-space bounds of
/// their cull sphere (the region where opacity can reach the cutoff), so the
/// output is identical to testing every primitive against every ray.
pub fn render_image(cloud: &GaussianCloud, cam: &Camera, retain: bool) -> RenderOutputs {
    let prepared = PreparedGaussian::prepare_all(cloud);
    let tiles_x = cam.width.div_ceil(TILE);
    let tiles_y = cam.height.div_ceil(TILE);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for p in &prepared {
        let Some((x0, x1, y0, y1)) = screen_bounds(p, cam) else {
            continue;
        };
        for ty in y0 / TILE..=y1 / TILE {
            for tx in x0 / TILE..=x1 / TILE {
                bins[ty * tiles_x + tx].push(p.index);
            }
        }
    }

    let gaussians = cloud.gaussians();
    let degree = cloud.active_sh_degree;
    let samples: Vec<RaySample> = (0..cam.pixel_count())
        .into_par_iter()
        .map(|pix| {
            let (x, y) = (pix % cam.width, pix / cam.width);
            let ray = cam.pixel_ray(x as f64, y as f64);
            let bin = &bins[(y / TILE) * tiles_x + x / TILE];
            let hits = bin
                .iter()
                .map(|&i| &prepared[i as usize])
                .filter(|p| !p.ray_misses(&ray))
                .filter_map(|p| p.hit(&ray))
                .collect();
            blend_hits(hits, &prepared, gaussians, &ray, degree)
        })
        .collect();
    RenderOutputs::from_samples(cam.width, cam.height, samples, retain)
}

/// Reference renderer testing every primitive against every ray.
pub fn render_image_brute_force(cloud: &GaussianCloud, cam: &Camera, retain: bool) -> RenderOutputs {
    let prepared = PreparedGaussian::prepare_all(cloud);
    let samples = (0..cam.pixel_count())
        .map(|pix| {
            let ray = cam.pixel_ray((pix % cam.width) as f64, (pix / cam.width) as f64);
            let hits = prepared.iter().filter_map(|p| p.hit(&ray)).collect();
            blend_hits(hits, &prepared, cloud.gaussians(), &ray, cloud.active_sh_degree)
        })
        .collect();
    RenderOutputs::from_samples(cam.width, cam.height, samples, retain)
}

/// Inclusive pixel bounds of the projected cull sphere, `None` if it cannot
/// touch any pixel.
fn screen_bounds(p: &PreparedGaussian, cam: &Camera) -> Option<(usize, usize, usize, usize)> {
    let r = p.cull_radius?;
    let c = cam.world_to_camera(&p.mean);
    if c.z + r <= 0.0 {
        return None;
    }
    let full = Some((0, cam.width - 1, 0, cam.height - 1));
    // Camera-space cube around the sphere; its projected corners bound the
    // projected sphere while every corner is in front of the camera.
    if c.z - r <= 1e-9 {
        return full;
    }
    let (mut umin, mut umax, mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for corner in 0..8 {
        let off = Vec3::new(
            if corner & 1 == 0 { -r } else { r },
            if corner & 2 == 0 { -r } else { r },
            if corner & 4 == 0 { -r } else { r },
        );
        let (u, v) = cam.project_cam(&(c + off));
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    // Pixel x has its center at x + 0.5.
    let x0 = (umin - 0.5).floor();
    let x1 = (umax - 0.5).ceil();
    let y0 = (vmin - 0.5).floor();
    let y1 = (vmax - 0.5).ceil();
    if x1 < 0.0 || y1 < 0.0 || x0 > (cam.width - 1) as f64 || y0 > (cam.height - 1) as f64 {
        return None;
    }
    Some((
        x0.max(0.0) as usize,
        (x1 as usize).min(cam.width - 1),
        y0.max(0.0) as usize,
        (y1 as usize).min(cam.height - 1),
    ))
}
