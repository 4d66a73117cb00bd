//! File formats: PLY (clouds, meshes, point sets), OBJ, PNG/PPM/PFM images
//! and the scene JSON.

mod cloud;
mod image_io;
mod mesh_io;
pub mod ply;
mod scene_file;

pub use cloud::{cloud_from_ply, cloud_to_ply, load_cloud, save_cloud};
pub use image_io::{load_image, load_pfm, read_pfm, save_image, save_pfm, write_pfm};
pub use mesh_io::{load_mesh, mesh_from_ply, mesh_to_ply, read_obj, save_mesh, write_obj, MeshFormat};
pub use scene_file::{load_scene, points_to_ply, read_points, save_scene, CameraEntry, SceneFile};

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::{Error, Result};

pub(crate) fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}
