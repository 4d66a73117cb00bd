//! Image files: 8-bit PNG / PPM through the `image` crate and single-channel
//! float PFM.

use std::io::{BufRead, Write};
use std::path::Path;

use super::{create, open};
use crate::scene::ImageBuffer;
use crate::{Error, Result};

/// Loads an 8-bit image as RGB in `[0, 1]`.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.into(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let data = rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    ImageBuffer::from_data(w as usize, h as usize, 3, data)
}

/// Quantizes to 8 bits after clamping to `[0, 1]`; single-channel buffers
/// are written as gray RGB. Format follows the extension (png or ppm).
pub fn save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(img.pixel_count() * 3);
    for p in 0..img.pixel_count() {
        let px = img.pixel(p);
        for c in 0..3 {
            let v = px[if img.channels == 1 { 0 } else { c }];
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    image::save_buffer(path, &bytes, img.width as u32, img.height as u32, image::ExtendedColorType::Rgb8).map_err(|e| {
        Error::Image {
            path: path.into(),
            message: e.to_string(),
        }
    })
}

/// Writes channel 0 as a little-endian grayscale PFM (rows bottom to top).
pub fn write_pfm<W: Write>(img: &ImageBuffer, mut w: W) -> std::io::Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", img.width, img.height)?;
    for y in (0..img.height).rev() {
        for x in 0..img.width {
            w.write_all(&(img.get(x, y, 0) as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_pfm<R: BufRead>(mut r: R) -> Result<ImageBuffer> {
    let bad = |m: &str| Error::InvalidArgument(format!("pfm: {m}"));
    let mut header = Vec::new();
    while header.len() < 4 {
        let mut line = String::new();
        if r.read_line(&mut line).map_err(|e| bad(&e.to_string()))? == 0 {
            return Err(bad("truncated header"));
        }
        header.extend(line.split_whitespace().map(str::to_owned));
    }
    if header.len() < 4 || header[0] != "Pf" {
        return Err(bad("only grayscale Pf files are supported"));
    }
    let w: usize = header[1].parse().map_err(|_| bad("width"))?;
    let h: usize = header[2].parse().map_err(|_| bad("height"))?;
    let scale: f64 = header[3].parse().map_err(|_| bad("scale"))?;
    let mut body = vec![0u8; 4 * w * h];
    r.read_exact(&mut body).map_err(|_| bad("truncated data"))?;
    let mut img = ImageBuffer::zeros(w, h, 1);
    for (i, c) in body.chunks_exact(4).enumerate() {
        let b: [u8; 4] = c.try_into().expect("4 bytes");
        let v = if scale < 0.0 { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (x, y) = (i % w, h - 1 - i / w);
        img.set(x, y, 0, v as f64);
    }
    Ok(img)
}

pub fn save_pfm(img: &ImageBuffer, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write_pfm(img, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_pfm(path: &Path) -> Result<ImageBuffer> {
    read_pfm(open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_and_ppm_round_trip_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(5, 3, 3, |x, y, c| ((x * 31 + y * 17 + c * 5) % 256) as f64 / 255.0);
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            let back = load_image(&p).unwrap();
            for (a, b) in back.data.iter().zip(&img.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pfm_round_trip() {
        let img = ImageBuffer::from_fn(4, 3, 1, |x, y, _| x as f64 * 0.5 - y as f64);
        let mut buf = Vec::new();
        write_pfm(&img, &mut buf).unwrap();
        assert_eq!(read_pfm(buf.as_slice()).unwrap(), img);
    }
}
