//! Convolutional appearance network: a low-resolution head fed with the
//! detached downsampled render, the per-image latent and a positional
//! encoding, upsampled back to full resolution and turned into a
//! multiplicative `exp(M)` correction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::input::{downsample_reflect, pad_split, positional_encoding};
use super::tensor::{
    conv3x3, conv3x3_backward, crop, crop_backward, leaky_relu, leaky_relu_backward, upsample2, upsample2_backward,
    Tensor,
};
use crate::scene::ImageBuffer;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub latent_dim: usize,
    /// Output widths of the hidden convolutions; one x2 upsampling follows
    /// each, so the total upsampling factor is `2^widths.len()`.
    pub widths: Vec<usize>,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            latent_dim: 64,
            widths: vec![64, 32, 16, 16, 16],
        }
    }
}

impl CnnConfig {
    pub fn input_channels(&self) -> usize {
        3 + self.latent_dim + 3
    }

    pub fn factor(&self) -> usize {
        1 << self.widths.len()
    }

    /// `(in, out)` channels of every convolution, final layer last.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut cin = self.input_channels();
        let mut out = Vec::new();
        for &w in &self.widths {
            out.push((cin, w));
            cin = w;
        }
        out.push((cin, 3));
        out
    }

    /// Offsets of each layer's weights and biases in the flat net parameter vector.
    pub fn offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.layers()
            .iter()
            .map(|&(i, o)| {
                let w = off;
                let b = w + o * i * 9;
                off = b + o;
                (w, b)
            })
            .collect()
    }

    pub fn net_param_count(&self) -> usize {
        self.layers().iter().map(|&(i, o)| o * i * 9 + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::InvalidArgument("appearance network needs at least one nonzero hidden width".into()));
        }
        Ok(())
    }
}

/// Network weights followed by one latent per training image, in one flat
/// vector so the optimizer can treat them uniformly.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnAppearance {
    pub config: CnnConfig,
    pub image_count: usize,
    pub params: Vec<f64>,
}

/// Activations retained by [`CnnAppearance::forward`].
#[derive(Clone, Debug)]
pub struct CnnCache {
    image_id: usize,
    /// Input to each hidden convolution (after the previous upsampling).
    conv_inputs: Vec<Tensor>,
    pre_activations: Vec<Tensor>,
    final_input: Tensor,
    pad: (usize, usize),
    padded: (usize, usize),
    exp_m: Vec<f64>,
    output: Vec<f64>,
}

impl CnnCache {
    /// Divides `observed` by the cached `exp(M)`.
    pub fn invert(&self, observed: &ImageBuffer) -> Result<ImageBuffer> {
        if observed.data.len() != self.exp_m.len() {
            return Err(crate::Error::Shape {
                expected: self.exp_m.len().to_string(),
                actual: observed.data.len().to_string(),
            });
        }
        let mut out = observed.clone();
        out.data.iter_mut().zip(&self.exp_m).for_each(|(v, e)| *v /= e);
        Ok(out)
    }
}

impl CnnAppearance {
    /// Hidden layers get a seeded Kaiming-normal init, latents small normal
    /// values, and the final layer zeros so the module starts as the identity.
    pub fn new(config: CnnConfig, image_count: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; config.net_param_count() + image_count * config.latent_dim];
        let layers = config.layers();
        let offsets = config.offsets();
        for (&(cin, cout), &(w, _)) in layers.iter().zip(&offsets).take(layers.len() - 1) {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for v in &mut params[w..w + cout * cin * 9] {
                *v = normal.sample(&mut rng);
            }
        }
        let latent = Normal::new(0.0, 0.01).expect("positive std");
        let start = config.net_param_count();
        for v in &mut params[start..] {
            *v = latent.sample(&mut rng);
        }
        Ok(CnnAppearance {
            config,
            image_count,
            params,
        })
    }

    pub fn latent_range(&self, image_id: usize) -> std::ops::Range<usize> {
        let s = self.config.net_param_count() + image_id * self.config.latent_dim;
        s..s + self.config.latent_dim
    }

    pub fn latent(&self, image_id: usize) -> &[f64] {
        &self.params[self.latent_range(image_id)]
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64], usize) {
        let (cin, cout) = self.config.layers()[l];
        let (w, b) = self.config.offsets()[l];
        (&self.params[w..w + cout * cin * 9], &self.params[b..b + cout], cout)
    }

    fn check_image(&self, image_id: usize) -> Result<()> {
        if image_id >= self.image_count {
            return Err(Error::InvalidArgument(format!(
                "no appearance latent for image {image_id} ({} images)",
                self.image_count
            )));
        }
        Ok(())
    }

    /// Low-resolution network input: downsampled render, broadcast latent and
    /// positional encoding.
    pub fn head_input(&self, image: &ImageBuffer, image_id: usize) -> Tensor {
        let low = downsample_reflect(image, self.config.factor());
        let (w, h) = (low.width, low.height);
        let pe = positional_encoding(w, h);
        let latent = self.latent(image_id);
        let mut t = Tensor::zeros(self.config.input_channels(), h, w);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    t.data[(c * h + y) * w + x] = low.get(x, y, c);
                }
                for (k, &z) in latent.iter().enumerate() {
                    t.data[((3 + k) * h + y) * w + x] = z;
                }
                for c in 0..3 {
                    t.data[((3 + latent.len() + c) * h + y) * w + x] = pe.get(x, y, c);
                }
            }
        }
        t
    }

    /// Correction map `M` (3 channels, full resolution) and the retained
    /// activations.
    fn correction(&self, head: &ImageBuffer, image_id: usize) -> Result<(Tensor, CnnCache)> {
        self.check_image(image_id)?;
        let hidden = self.config.widths.len();
        let image = head;
        let mut x = self.head_input(head, image_id);
        let mut conv_inputs = Vec::with_capacity(hidden);
        let mut pre_activations = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let (w, b, cout) = self.layer(l);
            let pre = conv3x3(&x, w, b, cout);
            let act = upsample2(&leaky_relu(&pre));
            conv_inputs.push(x);
            pre_activations.push(pre);
            x = act;
        }
        let factor = self.config.factor();
        let pad = (pad_split(image.height, factor).0, pad_split(image.width, factor).0);
        let padded = (x.height, x.width);
        let final_input = crop(&x, pad.0, pad.1, image.height, image.width);
        let (w, b, cout) = self.layer(hidden);
        let m = conv3x3(&final_input, w, b, cout);
        let cache = CnnCache {
            image_id,
            conv_inputs,
            pre_activations,
            final_input,
            pad,
            padded,
            exp_m: Vec::new(),
            output: Vec::new(),
        };
        Ok((m, cache))
    }

    /// `Î_app = Î ⊙ exp(M)`.
    pub fn forward(&self, image: &ImageBuffer, image_id: usize) -> Result<(ImageBuffer, CnnCache)> {
        self.forward_with_head(image, image, image_id)
    }

    /// Forward where the network head sees `head` and the correction is
    /// applied to `image` (same shape).
    pub fn forward_with_head(
        &self,
        image: &ImageBuffer,
        head: &ImageBuffer,
        image_id: usize,
    ) -> Result<(ImageBuffer, CnnCache)> {
        image.check_same_shape(head)?;
        let (m, mut cache) = self.correction(head, image_id)?;
        let (w, h) = (image.width, image.height);
        let mut out = ImageBuffer::zeros(w, h, 3);
        let mut exp_m = vec![0.0; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let i = out.index(x, y, c);
                    let e = m.at(c, y, x).exp();
                    exp_m[i] = e;
                    out.data[i] = image.data[i] * e;
                }
            }
        }
        cache.exp_m = exp_m;
        cache.output = out.data.clone();
        Ok((out, cache))
    }

    /// Gradients of the flat parameter vector and of the input render given
    /// `∂L/∂Î_app`. The downsampled input is treated as a constant.
    pub fn backward(&self, cache: &CnnCache, d_app: &ImageBuffer) -> Result<(ImageBuffer, Vec<f64>)> {
        let (w, h) = (d_app.width, d_app.height);
        let mut d_image = ImageBuffer::zeros(w, h, 3);
        let mut dm = Tensor::zeros(3, h, w);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let i = d_app.index(x, y, c);
                    d_image.data[i] = cache.exp_m[i] * d_app.data[i];
                    dm.data[(c * h + y) * w + x] = d_app.data[i] * cache.output[i];
                }
            }
        }
        let mut grad = vec![0.0; self.params.len()];
        let offsets = self.config.offsets();
        let layers = self.config.layers();
        let hidden = self.config.widths.len();

        let (fw, _, _) = self.layer(hidden);
        let (wo, bo) = offsets[hidden];
        let (cin, cout) = layers[hidden];
        let (gw, gb) = grad[wo..bo + cout].split_at_mut(cout * cin * 9);
        let d_crop = conv3x3_backward(&cache.final_input, fw, &dm, gw, gb, true);
        check_layer(gw, gb, hidden)?;
        let mut g = crop_backward(&d_crop, cache.pad.0, cache.pad.1, cache.padded.0, cache.padded.1);

        for l in (0..hidden).rev() {
            let d_act = upsample2_backward(&g);
            let d_pre = leaky_relu_backward(&cache.pre_activations[l], &d_act);
            let (lw, _, _) = self.layer(l);
            let (wo, bo) = offsets[l];
            let (cin, cout) = layers[l];
            let (gw, gb) = grad[wo..bo + cout].split_at_mut(cout * cin * 9);
            g = conv3x3_backward(&cache.conv_inputs[l], lw, &d_pre, gw, gb, true);
            check_layer(gw, gb, l)?;
        }

        let range = self.latent_range(cache.image_id);
        for (k, gi) in range.enumerate() {
            grad[gi] = g.plane(3 + k).iter().sum();
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteAppearance { layer: 0 });
        }
        Ok((d_image, grad))
    }
}

fn check_layer(w: &[f64], b: &[f64], layer: usize) -> Result<()> {
    if w.iter().chain(b).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteAppearance { layer })
    }
}
