use super::ssim::{dssim_decoupled_backward, dssim_decoupled_map};
use crate::scene::ImageBuffer;
use crate::Result;

/// Photometric loss and its per-pixel map.
#[derive(Clone, Debug)]
pub struct Photometric {
    /// `(1-λ)·L1 + λ·D-SSIM`, equal to the mean of `map`.
    pub value: f64,
    pub l1: f64,
    pub dssim: f64,
    /// Per-pixel `(1-λ)·|I - Î_app|₁/3 + λ·(1 - l·c·s)`.
    pub map: Vec<f64>,
}

pub fn l1_map(reference: &ImageBuffer, rendered: &ImageBuffer) -> Result<Vec<f64>> {
    reference.check_same_shape(rendered)?;
    let ch = reference.channels;
    Ok((0..reference.pixel_count())
        .map(|p| {
            (0..ch)
                .map(|c| (reference.data[p * ch + c] - rendered.data[p * ch + c]).abs())
                .sum::<f64>()
                / ch as f64
        })
        .collect())
}

/// `appearance` is the corrected render `Î_app`; pass the raw render when no
/// appearance model is used.
pub fn photometric(reference: &ImageBuffer, rendered: &ImageBuffer, appearance: &ImageBuffer, lambda_rgb: f64) -> Result<Photometric> {
    photometric_split(reference, rendered, appearance, appearance, lambda_rgb)
}

/// Photometric loss with separate sources for the L1 term and the SSIM
/// luminance term (contrast and structure always use the raw render).
pub fn photometric_split(
    reference: &ImageBuffer,
    rendered: &ImageBuffer,
    l1_source: &ImageBuffer,
    luminance_source: &ImageBuffer,
    lambda_rgb: f64,
) -> Result<Photometric> {
    let l1 = l1_map(reference, l1_source)?;
    let dssim = dssim_decoupled_map(reference, rendered, luminance_source)?;
    let n = l1.len() as f64;
    let map: Vec<f64> = l1.iter().zip(&dssim).map(|(a, d)| (1.0 - lambda_rgb) * a + lambda_rgb * d).collect();
    let l1_mean = l1.iter().sum::<f64>() / n;
    let dssim_mean = dssim.iter().sum::<f64>() / n;
    Ok(Photometric {
        value: map.iter().sum::<f64>() / n,
        l1: l1_mean,
        dssim: dssim_mean,
        map,
    })
}

/// Gradients of `Σ_p upstream[p]·map[p]` w.r.t. the raw render and `Î_app`.
pub fn photometric_backward(
    reference: &ImageBuffer,
    rendered: &ImageBuffer,
    appearance: &ImageBuffer,
    lambda_rgb: f64,
    upstream: &[f64],
) -> Result<(ImageBuffer, ImageBuffer)> {
    let (d_rendered, mut d_l1, d_lum) = photometric_split_backward(reference, rendered, appearance, appearance, lambda_rgb, upstream)?;
    d_l1.data.iter_mut().zip(&d_lum.data).for_each(|(a, b)| *a += b);
    Ok((d_rendered, d_l1))
}

/// Gradients of [`photometric_split`] w.r.t. the raw render, the L1 source
/// and the luminance source.
pub fn photometric_split_backward(
    reference: &ImageBuffer,
    rendered: &ImageBuffer,
    l1_source: &ImageBuffer,
    luminance_source: &ImageBuffer,
    lambda_rgb: f64,
    upstream: &[f64],
) -> Result<(ImageBuffer, ImageBuffer, ImageBuffer)> {
    let scaled: Vec<f64> = upstream.iter().map(|u| u * lambda_rgb).collect();
    let (d_rendered, d_lum) = if lambda_rgb != 0.0 {
        dssim_decoupled_backward(reference, rendered, luminance_source, &scaled)?
    } else {
        (rendered.map(|_| 0.0), luminance_source.map(|_| 0.0))
    };
    reference.check_same_shape(l1_source)?;
    let mut d_l1 = l1_source.map(|_| 0.0);
    let ch = reference.channels;
    for p in 0..reference.pixel_count() {
        let u = upstream[p] * (1.0 - lambda_rgb) / ch as f64;
        for c in 0..ch {
            let i = p * ch + c;
            let diff = l1_source.data[i] - reference.data[i];
            if diff != 0.0 {
                d_l1.data[i] += u * diff.signum();
            }
        }
    }
    Ok((d_rendered, d_l1, d_lum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |_, _, _| rng.random::<f64>())
    }

    #[test]
    fn identical_inputs_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = random_image(&mut rng, 8, 8);
        assert!(photometric(&a, &a, &a, 0.2).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_is_mean_absolute_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_image(&mut rng, 8, 8);
        let b = random_image(&mut rng, 8, 8);
        let mae = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data.len() as f64;
        assert!((photometric(&a, &b, &b, 0.0).unwrap().value - mae).abs() < 1e-12);
    }

    #[test]
    fn value_is_mean_of_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_image(&mut rng, 9, 7);
        let b = random_image(&mut rng, 9, 7);
        let c = random_image(&mut rng, 9, 7);
        let p = photometric(&a, &b, &c, 0.2).unwrap();
        let mean = p.map.iter().sum::<f64>() / p.map.len() as f64;
        assert!((p.value - mean).abs() < 1e-9);
        assert!((p.value - (0.8 * p.l1 + 0.2 * p.dssim)).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(&mut rng, 6, 5);
        let b = random_image(&mut rng, 6, 5);
        let c = random_image(&mut rng, 6, 5);
        let up: Vec<f64> = (0..30).map(|_| rng.random_range(0.5..1.5)).collect();
        let f = |b: &ImageBuffer, c: &ImageBuffer| -> f64 {
            photometric(&a, b, c, 0.2).unwrap().map.iter().zip(&up).map(|(m, u)| m * u).sum()
        };
        let (db, dc) = photometric_backward(&a, &b, &c, 0.2, &up).unwrap();
        let h = 1e-6;
        for i in 0..b.data.len() {
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp.data[i] += h;
            bm.data[i] -= h;
            let fd = (f(&bp, &c) - f(&bm, &c)) / (2.0 * h);
            assert!((fd - db.data[i]).abs() < 1e-7);
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp.data[i] += h;
            cm.data[i] -= h;
            let fd = (f(&b, &cp) - f(&b, &cm)) / (2.0 * h);
            assert!((fd - dc.data[i]).abs() < 1e-7);
        }
    }
}
