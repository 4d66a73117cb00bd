//! Per-image global affine color maps used as baselines.

use serde::{Deserialize, Serialize};

use crate::scene::ImageBuffer;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffineVariant {
    /// `exp(a) Î + b` with scalar `a`, `b`.
    Pgsr,
    /// `A Î + b` with a 3x3 matrix `A` and a 3-vector `b`.
    H3dgs,
}

impl AffineVariant {
    pub fn params_per_image(self) -> usize {
        match self {
            AffineVariant::Pgsr => 2,
            AffineVariant::H3dgs => 12,
        }
    }

    fn identity(self) -> Vec<f64> {
        match self {
            AffineVariant::Pgsr => vec![0.0, 0.0],
            AffineVariant::H3dgs => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        }
    }
}

/// Flat parameters, `params_per_image` consecutive values per image. H3DGS
/// stores `A` row-major followed by `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineAppearance {
    pub variant: AffineVariant,
    pub image_count: usize,
    pub params: Vec<f64>,
}

impl AffineAppearance {
    pub fn new(variant: AffineVariant, image_count: usize) -> Self {
        AffineAppearance {
            variant,
            image_count,
            params: (0..image_count).flat_map(|_| variant.identity()).collect(),
        }
    }

    pub fn range(&self, image_id: usize) -> Result<std::ops::Range<usize>> {
        if image_id >= self.image_count {
            return Err(Error::InvalidArgument(format!(
                "no affine parameters for image {image_id} ({} images)",
                self.image_count
            )));
        }
        let n = self.variant.params_per_image();
        Ok(image_id * n..(image_id + 1) * n)
    }

    pub fn image_params(&self, image_id: usize) -> Result<&[f64]> {
        Ok(&self.params[self.range(image_id)?])
    }

    pub fn forward(&self, image: &ImageBuffer, image_id: usize) -> Result<ImageBuffer> {
        let p = self.image_params(image_id)?;
        let mut out = image.clone();
        match self.variant {
            AffineVariant::Pgsr => {
                let s = p[0].exp();
                out.data.iter_mut().for_each(|v| *v = s * *v + p[1]);
            }
            AffineVariant::H3dgs => {
                for (o, i) in out.data.chunks_exact_mut(3).zip(image.data.chunks_exact(3)) {
                    for c in 0..3 {
                        o[c] = p[3 * c] * i[0] + p[3 * c + 1] * i[1] + p[3 * c + 2] * i[2] + p[9 + c];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Applies the inverse map of image `image_id`. A singular H3DGS matrix
    /// leaves the image unchanged.
    pub fn invert(&self, observed: &ImageBuffer, image_id: usize) -> Result<ImageBuffer> {
        let p = self.image_params(image_id)?;
        let mut out = observed.clone();
        match self.variant {
            AffineVariant::Pgsr => {
                let s = (-p[0]).exp();
                out.data.iter_mut().for_each(|v| *v = s * (*v - p[1]));
            }
            AffineVariant::H3dgs => {
                let a = nalgebra::Matrix3::from_row_slice(&p[..9]);
                let b = nalgebra::Vector3::new(p[9], p[10], p[11]);
                if let Some(inv) = a.try_inverse() {
                    for px in out.data.chunks_exact_mut(3) {
                        let v = inv * (nalgebra::Vector3::new(px[0], px[1], px[2]) - b);
                        px.copy_from_slice(v.as_slice());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Returns `∂L/∂Î` and the gradient of the flat parameter vector.
    pub fn backward(&self, image: &ImageBuffer, image_id: usize, d_app: &ImageBuffer) -> Result<(ImageBuffer, Vec<f64>)> {
        let range = self.range(image_id)?;
        let p = &self.params[range.clone()];
        let mut grad = vec![0.0; self.params.len()];
        let g = &mut grad[range];
        let mut d_image = ImageBuffer::zeros(image.width, image.height, 3);
        match self.variant {
            AffineVariant::Pgsr => {
                let s = p[0].exp();
                for ((di, &d), &v) in d_image.data.iter_mut().zip(&d_app.data).zip(&image.data) {
                    *di = s * d;
                    g[0] += d * s * v;
                    g[1] += d;
                }
            }
            AffineVariant::H3dgs => {
                for ((di, d), i) in d_image
                    .data
                    .chunks_exact_mut(3)
                    .zip(d_app.data.chunks_exact(3))
                    .zip(image.data.chunks_exact(3))
                {
                    for c in 0..3 {
                        for k in 0..3 {
                            g[3 * c + k] += d[c] * i[k];
                            di[k] += p[3 * c + k] * d[c];
                        }
                        g[9 + c] += d[c];
                    }
                }
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteAppearance { layer: 0 });
        }
        Ok((d_image, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn image(rng: &mut ChaCha8Rng) -> ImageBuffer {
        ImageBuffer::from_fn(4, 3, 3, |_, _, _| rng.random())
    }

    #[test]
    fn identity_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = image(&mut rng);
        for v in [AffineVariant::Pgsr, AffineVariant::H3dgs] {
            assert_eq!(AffineAppearance::new(v, 2).forward(&img, 1).unwrap(), img);
        }
    }

    #[test]
    fn h3dgs_bias_shifts_red() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = image(&mut rng);
        let mut a = AffineAppearance::new(AffineVariant::H3dgs, 1);
        a.params[9] = 0.1;
        let out = a.forward(&img, 0).unwrap();
        for (o, i) in out.data.chunks(3).zip(img.data.chunks(3)) {
            assert!((o[0] - i[0] - 0.1).abs() < 1e-15);
            assert_eq!((o[1], o[2]), (i[1], i[2]));
        }
    }

    #[test]
    fn pgsr_example_value() {
        let mut a = AffineAppearance::new(AffineVariant::Pgsr, 1);
        a.params = vec![2f64.ln(), 0.05];
        let img = ImageBuffer::filled(1, 1, 3, 0.3);
        let out = a.forward(&img, 0).unwrap();
        assert!(out.data.iter().all(|v| (v - 0.65).abs() < 1e-12));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = image(&mut rng);
        let up = image(&mut rng);
        for v in [AffineVariant::Pgsr, AffineVariant::H3dgs] {
            let mut a = AffineAppearance::new(v, 2);
            a.params.iter_mut().for_each(|p| *p += rng.random_range(-0.3..0.3));
            let f = |a: &AffineAppearance, x: &ImageBuffer| -> f64 {
                a.forward(x, 1).unwrap().data.iter().zip(&up.data).map(|(p, q)| p * q).sum()
            };
            let (di, g) = a.backward(&img, 1, &up).unwrap();
            let h = 1e-6;
            for k in 0..a.params.len() {
                let mut p = a.clone();
                let mut m = a.clone();
                p.params[k] += h;
                m.params[k] -= h;
                assert!(((f(&p, &img) - f(&m, &img)) / (2.0 * h) - g[k]).abs() < 1e-7);
            }
            for k in 0..img.data.len() {
                let mut p = img.clone();
                let mut m = img.clone();
                p.data[k] += h;
                m.data[k] -= h;
                assert!(((f(&a, &p) - f(&a, &m)) / (2.0 * h) - di.data[k]).abs() < 1e-7);
            }
            assert!(g[..v.params_per_image()].iter().all(|&x| x == 0.0));
        }
    }
}
