use crate::loss::ssim;
use crate::render::RenderOutputs;
use crate::scene::ImageBuffer;
use crate::Result;

/// `10 log10(1 / MSE)`; identical images give `+inf`.
pub fn psnr(reference: &ImageBuffer, image: &ImageBuffer) -> Result<f64> {
    reference.check_same_shape(image)?;
    let mse = reference.data.iter().zip(&image.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        / reference.data.len().max(1) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// Mean SSIM with the training window.
pub fn mean_ssim(reference: &ImageBuffer, image: &ImageBuffer) -> Result<f64> {
    ssim(reference, image)
}

/// Mean length of the blended normal over pixels whose remaining
/// transmittance is at most `max_transmittance`, with the number of such
/// pixels; `None` if there are none. Close to 1 when the primitives along
/// each ray agree on orientation. `mask`, when given, further restricts the
/// pixels.
pub fn saturated_normal_coherence(render: &RenderOutputs, max_transmittance: f64, mask: Option<&[bool]>) -> Option<(f64, usize)> {
    let (sum, n) = (0..render.width * render.height)
        .filter(|&p| render.transmittance.data[p] <= max_transmittance && mask.is_none_or(|m| m[p]))
        .map(|p| {
            let n = render.normal.pixel(p);
            (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
        })
        .fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    (n > 0).then(|| (sum / n as f64, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_is_infinite() {
        let a = ImageBuffer::filled(3, 3, 3, 0.4);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mse_hundredth_is_20_db() {
        let a = ImageBuffer::filled(4, 4, 3, 0.5);
        let b = ImageBuffer::filled(4, 4, 3, 0.6);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = ImageBuffer::from_fn(7, 5, 3, |_, _, _| rng.random());
        let b = ImageBuffer::from_fn(7, 5, 3, |_, _, _| rng.random());
        let mut se = 0.0;
        for i in 0..a.data.len() {
            se += (a.data[i] - b.data[i]).powi(2);
        }
        let expected = 10.0 * (1.0 / (se / a.data.len() as f64)).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_errors() {
        assert!(psnr(&ImageBuffer::zeros(2, 2, 3), &ImageBuffer::zeros(3, 2, 3)).is_err());
    }
}
