use rayon::prelude::*;

use crate::mesh::TriMesh;
use crate::scene::{Camera, Gaussian, GaussianCloud, ImageBuffer};
use crate::sh::SH_C0;
use crate::{Error, Result, Vec3};

/// Posed training images with an optional initial point set and reference
/// surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub cameras: Vec<Camera>,
    pub images: Vec<ImageBuffer>,
    pub points: Vec<(Vec3, [f64; 3])>,
    pub gt_mesh: Option<TriMesh>,
}

impl Dataset {
    pub fn new(
        cameras: Vec<Camera>,
        images: Vec<ImageBuffer>,
        points: Vec<(Vec3, [f64; 3])>,
        gt_mesh: Option<TriMesh>,
    ) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::Scene("scene has no cameras".into()));
        }
        if cameras.len() != images.len() {
            return Err(Error::Scene(format!("{} cameras but {} images", cameras.len(), images.len())));
        }
        let mut seen = vec![false; cameras.len()];
        for (cam, img) in cameras.iter().zip(&images) {
            if img.channels != 3 || (img.width, img.height) != (cam.width, cam.height) {
                return Err(Error::Scene(format!("image {} does not match its camera", cam.image_id)));
            }
            if cam.image_id >= cameras.len() || std::mem::replace(&mut seen[cam.image_id], true) {
                return Err(Error::Scene(format!(
                    "image ids must be a permutation of 0..{}, got {}",
                    cameras.len(),
                    cam.image_id
                )));
            }
        }
        Ok(Dataset {
            cameras,
            images,
            points,
            gt_mesh,
        })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Mean camera center and 1.1x the largest distance of a camera from it.
    pub fn extent(&self) -> (Vec3, f64) {
        let centers: Vec<Vec3> = self.cameras.iter().map(Camera::center).collect();
        let mean = centers.iter().sum::<Vec3>() / centers.len() as f64;
        let radius = centers.iter().map(|c| (c - mean).norm()).fold(0.0, f64::max);
        (mean, 1.1 * radius.max(1e-6))
    }
}

/// One isotropic Gaussian per point: scale from the RMS distance to the
/// three nearest neighbors, opacity 0.1, DC color from the point color.
pub fn init_from_points(points: &[(Vec3, [f64; 3])]) -> GaussianCloud {
    let k = 3.min(points.len().saturating_sub(1));
    let scales: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, (p, _))| {
            if k == 0 {
                return 0.01;
            }
            let mut best = [f64::INFINITY; 3];
            for (j, (q, _)) in points.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (p - q).norm_squared();
                if d < best[2] {
                    best[2] = d;
                    best.sort_by(f64::total_cmp);
                }
            }
            (best[..k].iter().sum::<f64>() / k as f64).sqrt().max(1e-7)
        })
        .collect();
    let gs = points
        .iter()
        .zip(&scales)
        .map(|((p, rgb), &s)| {
            let mut g = Gaussian::isotropic(*p, s, 0.1, [0.5; 3]);
            for c in 0..3 {
                g.sh[0][c] = (rgb[c] - 0.5) / SH_C0;
            }
            g
        })
        .collect();
    GaussianCloud::new(gs)
}
