//! Binary checkpoint of the appearance parameters.
//!
//! Layout (little-endian): 8-byte magic, `u32` version, `u32` kind,
//! `u32` image count, `u32` latent dim, `u32` hidden layer count followed by
//! that many `u32` widths, `u64` parameter count, then the parameters as `f32`.

use std::io::{Read, Write};
use std::path::Path;

use super::{AffineAppearance, AffineVariant, Appearance, AppearanceKind, CnnAppearance, CnnConfig};
use crate::{Error, Result};

pub const SIDECAR_MAGIC: &[u8; 8] = b"CSAPPR\0\0";
pub const SIDECAR_VERSION: u32 = 1;

fn kind_code(kind: AppearanceKind) -> u32 {
    match kind {
        AppearanceKind::None => 0,
        AppearanceKind::Cnn => 1,
        AppearanceKind::Pgsr => 2,
        AppearanceKind::H3dgs => 3,
    }
}

pub fn write_sidecar<W: Write>(app: &Appearance, mut w: W) -> std::io::Result<()> {
    let (count, cfg) = match app {
        Appearance::None => (0, CnnConfig { latent_dim: 0, widths: vec![] }),
        Appearance::Cnn(c) => (c.image_count, c.config.clone()),
        Appearance::Affine(a) => (a.image_count, CnnConfig { latent_dim: 0, widths: vec![] }),
    };
    w.write_all(SIDECAR_MAGIC)?;
    for v in [SIDECAR_VERSION, kind_code(app.kind()), count as u32, cfg.latent_dim as u32, cfg.widths.len() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &cfg.widths {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&(app.params().len() as u64).to_le_bytes())?;
    for &p in app.params() {
        w.write_all(&(p as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::Sidecar(e.to_string()))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_sidecar<R: Read>(mut r: R) -> Result<Appearance> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::Sidecar(e.to_string()))?;
    if &magic != SIDECAR_MAGIC {
        return Err(Error::Sidecar("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != SIDECAR_VERSION {
        return Err(Error::Sidecar(format!("unsupported version {version}")));
    }
    let kind = match read_u32(&mut r)? {
        0 => AppearanceKind::None,
        1 => AppearanceKind::Cnn,
        2 => AppearanceKind::Pgsr,
        3 => AppearanceKind::H3dgs,
        k => return Err(Error::Sidecar(format!("unknown kind {k}"))),
    };
    let count = read_u32(&mut r)? as usize;
    let latent_dim = read_u32(&mut r)? as usize;
    let n_widths = read_u32(&mut r)? as usize;
    if n_widths > 16 {
        return Err(Error::Sidecar(format!("implausible layer count {n_widths}")));
    }
    let widths = (0..n_widths).map(|_| read_u32(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(|e| Error::Sidecar(e.to_string()))?;
    let n = u64::from_le_bytes(b8) as usize;
    let mut app = match kind {
        AppearanceKind::None => Appearance::None,
        AppearanceKind::Cnn => Appearance::Cnn(CnnAppearance {
            params: vec![0.0; 0],
            config: CnnConfig { latent_dim, widths },
            image_count: count,
        }),
        AppearanceKind::Pgsr => Appearance::Affine(AffineAppearance::new(AffineVariant::Pgsr, count)),
        AppearanceKind::H3dgs => Appearance::Affine(AffineAppearance::new(AffineVariant::H3dgs, count)),
    };
    if let Appearance::Cnn(c) = &mut app {
        c.config.validate()?;
        c.params = vec![0.0; c.config.net_param_count() + count * latent_dim];
    }
    if app.params().len() != n {
        return Err(Error::Sidecar(format!("expected {} parameters, header says {n}", app.params().len())));
    }
    let mut buf = vec![0u8; 4 * n];
    r.read_exact(&mut buf).map_err(|e| Error::Sidecar(format!("truncated parameters: {e}")))?;
    for (p, chunk) in app.params_mut().iter_mut().zip(buf.chunks_exact(4)) {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")) as f64;
        if !v.is_finite() {
            return Err(Error::Sidecar("non-finite parameter".into()));
        }
        *p = v;
    }
    Ok(app)
}

pub fn save_sidecar(app: &Appearance, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_sidecar(app, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_sidecar(path: &Path) -> Result<Appearance> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_sidecar(std::io::BufReader::new(f))
}
