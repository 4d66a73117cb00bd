//! Analytic test scenes: a unit square on `z = 0`, a sphere resting on it,
//! or both, ray-cast with Lambertian checkerboard shading. A wide plain
//! floor below the objects fills the rest of every view; it is not part of
//! the ground-truth mesh.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mesh::TriMesh;
use crate::scene::{Camera, ImageBuffer, Ray};
use crate::train::Dataset;
use crate::{Result, Vec3};

pub const PLANE_HALF: f64 = 0.5;
pub const SPHERE_CENTER: [f64; 3] = [0.0, 0.0, 0.2];
pub const SPHERE_RADIUS: f64 = 0.2;
pub const FLOOR_Z: f64 = -0.15;
pub const FLOOR_HALF: f64 = 6.0;
const FLOOR_ALBEDO: [f64; 3] = [0.5, 0.47, 0.42];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    Plane,
    Sphere,
    PlaneSphere,
}

impl SceneKind {
    fn has_plane(self) -> bool {
        matches!(self, SceneKind::Plane | SceneKind::PlaneSphere)
    }

    fn has_sphere(self) -> bool {
        matches!(self, SceneKind::Sphere | SceneKind::PlaneSphere)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub kind: SceneKind,
    pub views: usize,
    pub resolution: usize,
    pub seed: u64,
    /// Per-image exposure factors `exp(ε)` with `ε ~ U(-j, j)`; 0 disables.
    pub exposure_jitter: f64,
    /// Initial points back-projected from the ground-truth depth.
    pub init_points: usize,
    /// Standard deviation of the noise added to those points.
    pub init_noise: f64,
    /// Sub-samples per pixel side.
    pub supersample: usize,
    pub camera_distance: f64,
    pub fov_x: f64,
    /// Render the backdrop floor; without it uncovered pixels are black.
    pub backdrop: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            kind: SceneKind::PlaneSphere,
            views: 16,
            resolution: 64,
            seed: 0,
            exposure_jitter: 0.0,
            init_points: 1000,
            init_noise: 0.005,
            supersample: 3,
            camera_distance: 1.8,
            fov_x: 0.85,
            backdrop: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub dataset: Dataset,
    /// Ground-truth depth along the ray per pixel center (`inf` on background).
    pub depths: Vec<ImageBuffer>,
    /// Exposure factor applied to each image.
    pub exposures: Vec<f64>,
}

impl SyntheticScene {
    /// Per-pixel flags of view `view`: true where the pixel center hits the
    /// square or the sphere rather than the backdrop or nothing.
    pub fn object_mask(&self, view: usize) -> Vec<bool> {
        let cam = &self.dataset.cameras[view];
        let depth = &self.depths[view];
        let mut mask = Vec::with_capacity(cam.pixel_count());
        for y in 0..cam.height {
            for x in 0..cam.width {
                let t = depth.get(x, y, 0);
                let p = cam.pixel_ray(x as f64, y as f64).at(t);
                mask.push(t.is_finite() && (p.z - FLOOR_Z).abs() > 1e-9);
            }
        }
        mask
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceHit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub albedo: [f64; 3],
}

fn checker(a: f64, b: f64, cell: f64) -> bool {
    ((a / cell).floor() as i64 + (b / cell).floor() as i64).rem_euclid(2) == 0
}

pub fn intersect_plane(ray: &Ray) -> Option<SurfaceHit> {
    if ray.direction.z.abs() < 1e-12 {
        return None;
    }
    let t = -ray.origin.z / ray.direction.z;
    if t <= 0.0 {
        return None;
    }
    let p = ray.at(t);
    if p.x.abs() > PLANE_HALF || p.y.abs() > PLANE_HALF {
        return None;
    }
    let albedo = if checker(p.x, p.y, 0.125) { [0.85, 0.8, 0.7] } else { [0.2, 0.35, 0.6] };
    let normal = if ray.direction.z < 0.0 { Vec3::z() } else { -Vec3::z() };
    Some(SurfaceHit {
        t,
        point: p,
        normal,
        albedo,
    })
}

pub fn intersect_floor(ray: &Ray) -> Option<SurfaceHit> {
    if ray.direction.z >= -1e-12 {
        return None;
    }
    let t = (FLOOR_Z - ray.origin.z) / ray.direction.z;
    let p = ray.at(t);
    if t <= 0.0 || p.x.abs() > FLOOR_HALF || p.y.abs() > FLOOR_HALF {
        return None;
    }
    Some(SurfaceHit {
        t,
        point: p,
        normal: Vec3::z(),
        albedo: FLOOR_ALBEDO,
    })
}

pub fn intersect_sphere(ray: &Ray) -> Option<SurfaceHit> {
    let c = Vec3::from(SPHERE_CENTER);
    let oc = ray.origin - c;
    let b = oc.dot(&ray.direction);
    let disc = b * b - (oc.norm_squared() - SPHERE_RADIUS * SPHERE_RADIUS);
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t = if -b - s > 0.0 { -b - s } else { -b + s };
    if t <= 0.0 {
        return None;
    }
    let p = ray.at(t);
    let n = (p - c) / SPHERE_RADIUS;
    let lon = n.y.atan2(n.x);
    let lat = n.z.asin();
    let albedo = if checker(lon, lat, std::f64::consts::PI / 6.0) { [0.9, 0.45, 0.2] } else { [0.3, 0.7, 0.35] };
    Some(SurfaceHit {
        t,
        point: p,
        normal: n,
        albedo,
    })
}

/// Nearest surface hit of the scene.
pub fn cast(kind: SceneKind, backdrop: bool, ray: &Ray) -> Option<SurfaceHit> {
    [
        kind.has_plane().then(|| intersect_plane(ray)).flatten(),
        kind.has_sphere().then(|| intersect_sphere(ray)).flatten(),
        backdrop.then(|| intersect_floor(ray)).flatten(),
    ]
    .into_iter()
    .flatten()
    .min_by(|a, b| a.t.total_cmp(&b.t))
}

fn light_dir() -> Vec3 {
    Vec3::new(0.4, -0.3, 1.0).normalize()
}

pub fn shade(hit: &SurfaceHit) -> [f64; 3] {
    let lambert = 0.35 + 0.65 * hit.normal.dot(&light_dir()).max(0.0);
    hit.albedo.map(|a| a * lambert)
}

/// Cameras on two interleaved rings (elevations 50° and 70°) looking at the
/// origin.
pub fn camera_ring(cfg: &SynthConfig) -> Result<Vec<Camera>> {
    (0..cfg.views)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * i as f64 / cfg.views as f64;
            let el = if i % 2 == 0 { 50f64 } else { 70f64 }.to_radians();
            let eye = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * cfg.camera_distance;
            Camera::look_at(eye, Vec3::new(0.0, 0.0, 0.05), Vec3::z(), cfg.fov_x, cfg.resolution, cfg.resolution, i)
        })
        .collect()
}

/// Ground-truth mesh: the square as two triangles and the sphere as a
/// subdivided icosahedron.
pub fn ground_truth_mesh(kind: SceneKind) -> TriMesh {
    let mut mesh = TriMesh::default();
    if kind.has_plane() {
        let h = PLANE_HALF;
        mesh.vertices.extend([Vec3::new(-h, -h, 0.0), Vec3::new(h, -h, 0.0), Vec3::new(h, h, 0.0), Vec3::new(-h, h, 0.0)]);
        mesh.triangles.extend([[0, 1, 2], [0, 2, 3]]);
    }
    if kind.has_sphere() {
        let s = icosphere(4);
        let off = mesh.vertices.len() as u32;
        let c = Vec3::from(SPHERE_CENTER);
        mesh.vertices.extend(s.vertices.iter().map(|v| c + v * SPHERE_RADIUS));
        mesh.triangles.extend(s.triangles.iter().map(|t| t.map(|i| i + off)));
    }
    mesh
}

/// Box around the ground-truth objects grown by `margin`; it excludes the
/// backdrop floor for margins below 0.15.
pub fn evaluation_region(kind: SceneKind, margin: f64) -> (Vec3, Vec3) {
    let mesh = ground_truth_mesh(kind);
    let (lo, hi) = mesh.bounds().expect("ground-truth mesh is never empty");
    (lo - Vec3::repeat(margin), hi + Vec3::repeat(margin))
}

/// Unit icosphere with `levels` rounds of 4-way subdivision.
pub fn icosphere(levels: usize) -> TriMesh {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut f: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid = std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, v: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a as usize] + v[b as usize]) / 2.0).normalize());
                (v.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(f.len() * 4);
        for [a, b, c] in f {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        f = next;
    }
    TriMesh::new(v, f)
}

fn render_view(kind: SceneKind, backdrop: bool, cam: &Camera, ss: usize, exposure: f64) -> (ImageBuffer, ImageBuffer) {
    let mut img = ImageBuffer::zeros(cam.width, cam.height, 3);
    let mut depth = ImageBuffer::filled(cam.width, cam.height, 1, f64::INFINITY);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let mut acc = [0.0; 3];
            for sy in 0..ss {
                for sx in 0..ss {
                    let ox = (sx as f64 + 0.5) / ss as f64 - 0.5;
                    let oy = (sy as f64 + 0.5) / ss as f64 - 0.5;
                    if let Some(h) = cast(kind, backdrop, &cam.pixel_ray(x as f64 + ox, y as f64 + oy)) {
                        let c = shade(&h);
                        for k in 0..3 {
                            acc[k] += c[k];
                        }
                    }
                }
            }
            let n = (ss * ss) as f64;
            for k in 0..3 {
                img.set(x, y, k, (acc[k] / n * exposure).clamp(0.0, 1.0));
            }
            if let Some(h) = cast(kind, backdrop, &cam.pixel_ray(x as f64, y as f64)) {
                depth.set(x, y, 0, h.t);
            }
        }
    }
    (img, depth)
}

/// Builds the scene deterministically from `cfg.seed`.
pub fn make_synthetic_scene(cfg: &SynthConfig) -> Result<SyntheticScene> {
    if cfg.views < 2 {
        return Err(crate::Error::InvalidArgument("a synthetic scene needs at least 2 views".into()));
    }
    if cfg.resolution == 0 || cfg.supersample == 0 {
        return Err(crate::Error::InvalidArgument("resolution and supersample must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cameras = camera_ring(cfg)?;
    let exposures: Vec<f64> = (0..cfg.views)
        .map(|_| {
            let e: f64 = rng.random_range(-1.0..1.0);
            (e * cfg.exposure_jitter).exp()
        })
        .collect();
    let (images, depths): (Vec<_>, Vec<_>) = cameras
        .iter()
        .zip(&exposures)
        .map(|(cam, &e)| render_view(cfg.kind, cfg.backdrop, cam, cfg.supersample, e))
        .unzip();

    let mut points = Vec::with_capacity(cfg.init_points);
    let noise = rand_distr::Normal::new(0.0, cfg.init_noise.max(0.0)).expect("non-negative std");
    let mut attempts = 0;
    while points.len() < cfg.init_points && attempts < cfg.init_points * 50 {
        attempts += 1;
        let v = rng.random_range(0..cameras.len());
        let cam = &cameras[v];
        let (x, y) = (rng.random_range(0..cam.width), rng.random_range(0..cam.height));
        let t = depths[v].get(x, y, 0);
        if !t.is_finite() {
            continue;
        }
        let p = cam.pixel_ray(x as f64, y as f64).at(t);
        let jitter = Vec3::new(rng.sample(noise), rng.sample(noise), rng.sample(noise));
        let rgb = [0, 1, 2].map(|c| images[v].get(x, y, c));
        points.push((p + jitter, rgb));
    }
    let dataset = Dataset::new(cameras, images, points, Some(ground_truth_mesh(cfg.kind)))?;
    Ok(SyntheticScene {
        dataset,
        depths,
        exposures,
    })
}
