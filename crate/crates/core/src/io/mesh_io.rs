//! Mesh export and import as OBJ or binary PLY.

use std::io::{BufRead, Write};
use std::path::Path;

use super::ply::{read_ply, write_ply, Element, PlyData, ScalarType};
use super::{create, open};
use crate::mesh::TriMesh;
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("ply") => Ok(MeshFormat::Ply),
            _ => Err(Error::InvalidArgument(format!("cannot infer mesh format of {}", path.display()))),
        }
    }
}

pub fn write_obj<W: Write>(mesh: &TriMesh, mut w: W) -> std::io::Result<()> {
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for t in &mesh.triangles {
        writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
    }
    Ok(())
}

/// Reads `v` and `f` records; polygons are fan-triangulated and `v/vt/vn`
/// references use the vertex index only.
pub fn read_obj<R: BufRead>(r: R) -> Result<TriMesh> {
    let mut mesh = TriMesh::default();
    for line in r.lines() {
        let line = line.map_err(|e| Error::InvalidArgument(format!("obj read: {e}")))?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it.take(3).map(|s| s.parse::<f64>()).collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::InvalidArgument(format!("obj vertex: {e}")))?;
                if c.len() != 3 {
                    return Err(Error::InvalidArgument("obj vertex needs 3 coordinates".into()));
                }
                mesh.vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = it
                    .map(|s| {
                        let i: i64 = s.split('/').next().unwrap_or("").parse().map_err(|e| {
                            Error::InvalidArgument(format!("obj face index {s}: {e}"))
                        })?;
                        let n = mesh.vertices.len() as i64;
                        let i = if i < 0 { n + i } else { i - 1 };
                        if i < 0 || i >= n {
                            return Err(Error::InvalidArgument(format!("obj face index {s} out of range")));
                        }
                        Ok(i as u32)
                    })
                    .collect::<Result<_>>()?;
                for k in 1..idx.len().saturating_sub(1) {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn mesh_to_ply(mesh: &TriMesh) -> PlyData {
    let v = &mesh.vertices;
    let mut ve = Element::new("vertex", v.len())
        .scalar("x", ScalarType::F32, v.iter().map(|p| p.x).collect())
        .scalar("y", ScalarType::F32, v.iter().map(|p| p.y).collect())
        .scalar("z", ScalarType::F32, v.iter().map(|p| p.z).collect());
    if let Some(n) = &mesh.normals {
        for (k, name) in ["nx", "ny", "nz"].iter().enumerate() {
            ve = ve.scalar(name, ScalarType::F32, n.iter().map(|p| p[k]).collect());
        }
    }
    let fe = Element::new("face", mesh.triangles.len()).list(
        "vertex_indices",
        ScalarType::U8,
        ScalarType::I32,
        mesh.triangles.iter().map(|t| t.iter().map(|&i| i as f64).collect()).collect(),
    );
    PlyData {
        elements: vec![ve, fe],
    }
}

/// Vertices (and triangles, when a face element exists). A PLY with only a
/// vertex element loads as a point set with no triangles.
pub fn mesh_from_ply(data: &PlyData) -> Result<TriMesh> {
    let ve = data.element("vertex").ok_or_else(|| Error::Ply("no vertex element".into()))?;
    let (x, y, z) = (ve.require("x")?, ve.require("y")?, ve.require("z")?);
    let vertices: Vec<Vec3> = (0..ve.count).map(|i| Vec3::new(x[i], y[i], z[i])).collect();
    let mut triangles = Vec::new();
    if let Some(fe) = data.element("face") {
        let lists = fe
            .get_list("vertex_indices")
            .or_else(|| fe.get_list("vertex_index"))
            .ok_or_else(|| Error::Ply("face element has no vertex_indices list".into()))?;
        for l in lists {
            let idx: Vec<u32> = l.iter().map(|&v| v as u32).collect();
            if idx.iter().any(|&i| i as usize >= vertices.len()) {
                return Err(Error::Ply("face index out of range".into()));
            }
            for k in 1..idx.len().saturating_sub(1) {
                triangles.push([idx[0], idx[k], idx[k + 1]]);
            }
        }
    }
    Ok(TriMesh::new(vertices, triangles))
}

pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let mut w = create(path)?;
    match format {
        MeshFormat::Obj => write_obj(mesh, &mut w),
        MeshFormat::Ply => write_ply(&mesh_to_ply(mesh), &mut w),
    }
    .and_then(|_| w.flush())
    .map_err(|e| Error::io(path, e))
}

pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let r = open(path)?;
    match MeshFormat::from_path(path)? {
        MeshFormat::Obj => read_obj(r),
        MeshFormat::Ply => mesh_from_ply(&read_ply(r)?),
    }
}
