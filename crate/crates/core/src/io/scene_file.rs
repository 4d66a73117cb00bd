//! Scene description: a JSON list of cameras with their images, plus an
//! optional initial point set and ground-truth mesh.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::image_io::{load_image, save_image};
use super::mesh_io::{load_mesh, save_mesh, MeshFormat};
use super::ply::{read_ply, write_ply, Element, PlyData, PropertyKind, ScalarType};
use super::{create, open};
use crate::scene::{Camera, ImageBuffer};
use crate::train::Dataset;
use crate::{Error, Mat3, Result, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraEntry {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// World-to-camera rotation, row-major.
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    pub t: [f64; 3],
    pub image_id: usize,
    pub image_path: String,
}

impl CameraEntry {
    pub fn from_camera(cam: &Camera, image_path: String) -> Self {
        let r = cam.rotation;
        CameraEntry {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            rotation: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            t: [cam.translation.x, cam.translation.y, cam.translation.z],
            image_id: cam.image_id,
            image_path,
        }
    }

    pub fn camera(&self) -> Result<Camera> {
        Camera::new(
            self.fx,
            self.fy,
            self.cx,
            self.cy,
            self.width,
            self.height,
            Mat3::from_row_slice(&self.rotation),
            Vec3::from(self.t),
            self.image_id,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub cameras: Vec<CameraEntry>,
    /// PLY with `x, y, z` and optional `red, green, blue`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_mesh: Option<String>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.into()
    } else {
        base.join(p)
    }
}

pub fn read_points(data: &PlyData) -> Result<Vec<(Vec3, [f64; 3])>> {
    let e = data.element("vertex").ok_or_else(|| Error::Ply("no vertex element".into()))?;
    let (x, y, z) = (e.require("x")?, e.require("y")?, e.require("z")?);
    let colors: Option<Vec<(&[f64], f64)>> = ["red", "green", "blue"]
        .iter()
        .map(|n| {
            let col = e.get(n)?;
            let p = e.properties.iter().find(|p| p.name == *n)?;
            let scale = if p.kind == PropertyKind::Scalar(ScalarType::U8) { 1.0 / 255.0 } else { 1.0 };
            Some((col, scale))
        })
        .collect();
    Ok((0..e.count)
        .map(|i| {
            let rgb = colors.as_ref().map_or([0.5; 3], |c| [0, 1, 2].map(|k| c[k].0[i] * c[k].1));
            (Vec3::new(x[i], y[i], z[i]), rgb)
        })
        .collect())
}

pub fn points_to_ply(points: &[(Vec3, [f64; 3])]) -> PlyData {
    let mut e = Element::new("vertex", points.len());
    for (k, n) in ["x", "y", "z"].iter().enumerate() {
        e = e.scalar(n, ScalarType::F32, points.iter().map(|p| p.0[k]).collect());
    }
    for (k, n) in ["red", "green", "blue"].iter().enumerate() {
        e = e.scalar(n, ScalarType::U8, points.iter().map(|p| (p.1[k].clamp(0.0, 1.0) * 255.0).round()).collect());
    }
    PlyData { elements: vec![e] }
}

pub fn load_scene(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SceneFile = serde_json::from_str(&text).map_err(|e| Error::Scene(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut cameras = Vec::with_capacity(file.cameras.len());
    let mut images = Vec::with_capacity(file.cameras.len());
    for entry in &file.cameras {
        let cam = entry.camera()?;
        let img: ImageBuffer = load_image(&resolve(base, &entry.image_path))?;
        if (img.width, img.height) != (cam.width, cam.height) {
            return Err(Error::Scene(format!(
                "{} is {}x{}, camera says {}x{}",
                entry.image_path, img.width, img.height, cam.width, cam.height
            )));
        }
        cameras.push(cam);
        images.push(img);
    }
    let points = match &file.points {
        Some(p) => read_points(&read_ply(open(&resolve(base, p))?)?)?,
        None => Vec::new(),
    };
    let gt_mesh = file.gt_mesh.as_ref().map(|p| load_mesh(&resolve(base, p))).transpose()?;
    Dataset::new(cameras, images, points, gt_mesh)
}

/// Writes `scene.json`, `images/NNN.png`, `points.ply` and `gt_mesh.ply`
/// (when present) into `dir`, returning the JSON path.
pub fn save_scene(data: &Dataset, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir.join("images")).map_err(|e| Error::io(dir, e))?;
    let mut cameras = Vec::new();
    for (i, (cam, img)) in data.cameras.iter().zip(&data.images).enumerate() {
        let rel = format!("images/{i:03}.png");
        save_image(img, &dir.join(&rel))?;
        cameras.push(CameraEntry::from_camera(cam, rel));
    }
    let mut file = SceneFile {
        cameras,
        points: None,
        gt_mesh: None,
    };
    if !data.points.is_empty() {
        let p = dir.join("points.ply");
        let mut w = create(&p)?;
        write_ply(&points_to_ply(&data.points), &mut w)
            .and_then(|_| std::io::Write::flush(&mut w))
            .map_err(|e| Error::io(&p, e))?;
        file.points = Some("points.ply".into());
    }
    if let Some(m) = &data.gt_mesh {
        save_mesh(m, &dir.join("gt_mesh.ply"), MeshFormat::Ply)?;
        file.gt_mesh = Some("gt_mesh.ply".into());
    }
    let path = dir.join("scene.json");
    let json = serde_json::to_string_pretty(&file).map_err(|e| Error::Scene(e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
