//! Gaussian cloud PLY in the common 3DGS layout plus a `gamma` property.

use std::path::Path;

use nalgebra::Vector4;

use super::ply::{read_ply, write_ply, Element, PlyData, ScalarType};
use super::{create, open};
use crate::scene::{Gaussian, GaussianCloud, SH_COEFFS, SH_DEGREE_MAX};
use crate::{Error, Result, Vec3};

const REST: usize = SH_COEFFS - 1;

pub fn cloud_to_ply(cloud: &GaussianCloud) -> PlyData {
    let g = cloud.gaussians();
    let col = |f: &dyn Fn(&Gaussian) -> f64| g.iter().map(f).collect::<Vec<f64>>();
    let mut e = Element::new("vertex", g.len());
    for (k, name) in ["x", "y", "z"].iter().enumerate() {
        e = e.scalar(name, ScalarType::F32, col(&|g| g.position[k]));
    }
    for c in 0..3 {
        e = e.scalar(&format!("f_dc_{c}"), ScalarType::F32, col(&|g| g.sh[0][c]));
    }
    for c in 0..3 {
        for k in 0..REST {
            e = e.scalar(&format!("f_rest_{}", c * REST + k), ScalarType::F32, col(&|g| g.sh[k + 1][c]));
        }
    }
    e = e.scalar("opacity", ScalarType::F32, col(&|g| g.opacity_logit));
    for k in 0..3 {
        e = e.scalar(&format!("scale_{k}"), ScalarType::F32, col(&|g| g.log_scale[k]));
    }
    for k in 0..4 {
        e = e.scalar(&format!("rot_{k}"), ScalarType::F32, col(&|g| g.rotation[k]));
    }
    e = e.scalar("gamma", ScalarType::F32, col(&|g| g.gamma));
    PlyData { elements: vec![e] }
}

/// Missing `f_rest_*` and `gamma` properties read as zero.
pub fn cloud_from_ply(data: &PlyData) -> Result<GaussianCloud> {
    let e = data.element("vertex").ok_or_else(|| Error::Ply("no vertex element".into()))?;
    let pos = ["x", "y", "z"].map(|n| e.require(n));
    let dc = ["f_dc_0", "f_dc_1", "f_dc_2"].map(|n| e.require(n));
    let rot = ["rot_0", "rot_1", "rot_2", "rot_3"].map(|n| e.require(n));
    let scale = ["scale_0", "scale_1", "scale_2"].map(|n| e.require(n));
    let opacity = e.require("opacity")?;
    let [x, y, z] = pos;
    let (x, y, z) = (x?, y?, z?);
    let dc: Vec<&[f64]> = dc.into_iter().collect::<Result<_>>()?;
    let rot: Vec<&[f64]> = rot.into_iter().collect::<Result<_>>()?;
    let scale: Vec<&[f64]> = scale.into_iter().collect::<Result<_>>()?;
    let rest: Vec<Option<&[f64]>> = (0..3 * REST).map(|i| e.get(&format!("f_rest_{i}"))).collect();
    let has_rest = rest.iter().all(Option::is_some);
    let gamma = e.get("gamma");
    let mut gs = Vec::with_capacity(e.count);
    for i in 0..e.count {
        let mut sh = [[0.0; 3]; SH_COEFFS];
        for c in 0..3 {
            sh[0][c] = dc[c][i];
            if has_rest {
                for k in 0..REST {
                    sh[k + 1][c] = rest[c * REST + k].expect("checked")[i];
                }
            }
        }
        let rotation = Vector4::new(rot[0][i], rot[1][i], rot[2][i], rot[3][i]);
        if !(rotation.norm() > 0.0) {
            return Err(Error::Ply(format!("vertex {i} has a zero quaternion")));
        }
        gs.push(Gaussian {
            position: Vec3::new(x[i], y[i], z[i]),
            rotation: rotation.normalize(),
            log_scale: Vec3::new(scale[0][i], scale[1][i], scale[2][i]),
            opacity_logit: opacity[i],
            sh,
            gamma: gamma.map_or(0.0, |g| g[i]),
        });
    }
    let degree = if has_rest { SH_DEGREE_MAX } else { 0 };
    Ok(GaussianCloud::new(gs).with_sh_degree(degree))
}

pub fn save_cloud(cloud: &GaussianCloud, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_ply(&cloud_to_ply(cloud), &mut w)
        .and_then(|_| std::io::Write::flush(&mut w))
        .map_err(|e| Error::io(path, e))
}

pub fn load_cloud(path: &Path) -> Result<GaussianCloud> {
    cloud_from_ply(&read_ply(open(path)?)?)
}
