//! Per-image appearance compensation applied to the render before the
//! photometric loss: the convolutional `exp(M)` model and two global affine
//! baselines.

mod affine;
mod cnn;
mod input;
mod sidecar;
pub mod tensor;

pub use affine::{AffineAppearance, AffineVariant};
pub use cnn::{CnnAppearance, CnnCache, CnnConfig};
pub use input::{downsample32_reflect, downsample_reflect, pad_split, positional_encoding};
pub use sidecar::{load_sidecar, read_sidecar, save_sidecar, write_sidecar, SIDECAR_MAGIC, SIDECAR_VERSION};

use serde::{Deserialize, Serialize};

use crate::scene::ImageBuffer;
use crate::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AppearanceKind {
    #[default]
    None,
    Cnn,
    Pgsr,
    H3dgs,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Appearance {
    None,
    Cnn(CnnAppearance),
    Affine(AffineAppearance),
}

/// Whatever the backward pass needs from the forward pass.
#[derive(Clone, Debug)]
pub enum AppearanceCache {
    Cnn(CnnCache),
    Affine { input: ImageBuffer, image_id: usize },
}

impl Appearance {
    pub fn new(kind: AppearanceKind, image_count: usize, config: CnnConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            AppearanceKind::None => Appearance::None,
            AppearanceKind::Cnn => Appearance::Cnn(CnnAppearance::new(config, image_count, seed)?),
            AppearanceKind::Pgsr => Appearance::Affine(AffineAppearance::new(AffineVariant::Pgsr, image_count)),
            AppearanceKind::H3dgs => Appearance::Affine(AffineAppearance::new(AffineVariant::H3dgs, image_count)),
        })
    }

    pub fn kind(&self) -> AppearanceKind {
        match self {
            Appearance::None => AppearanceKind::None,
            Appearance::Cnn(_) => AppearanceKind::Cnn,
            Appearance::Affine(a) => match a.variant {
                AffineVariant::Pgsr => AppearanceKind::Pgsr,
                AffineVariant::H3dgs => AppearanceKind::H3dgs,
            },
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Appearance::None)
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Appearance::None => &[],
            Appearance::Cnn(c) => &c.params,
            Appearance::Affine(a) => &a.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Appearance::None => &mut [],
            Appearance::Cnn(c) => &mut c.params,
            Appearance::Affine(a) => &mut a.params,
        }
    }

    /// The CNN variant feeds the structure terms of D-SSIM from the raw
    /// render and the luminance term from the compensated one; the affine
    /// baselines only replace the L1 input.
    pub fn decoupled_luminance(&self) -> bool {
        matches!(self, Appearance::Cnn(_))
    }

    /// Compensated render, or `None` when no model is configured.
    pub fn forward(&self, image: &ImageBuffer, image_id: usize) -> Result<Option<(ImageBuffer, AppearanceCache)>> {
        Ok(match self {
            Appearance::None => None,
            Appearance::Cnn(c) => {
                let (out, cache) = c.forward(image, image_id)?;
                Some((out, AppearanceCache::Cnn(cache)))
            }
            Appearance::Affine(a) => Some((
                a.forward(image, image_id)?,
                AppearanceCache::Affine {
                    input: image.clone(),
                    image_id,
                },
            )),
        })
    }

    /// Maps an observed image through the inverse of the correction cached
    /// by [`Appearance::forward`], giving the colors the raw render should
    /// match.
    pub fn invert(&self, observed: &ImageBuffer, cache: &AppearanceCache) -> Result<ImageBuffer> {
        match (self, cache) {
            (Appearance::Cnn(_), AppearanceCache::Cnn(cache)) => cache.invert(observed),
            (Appearance::Affine(a), AppearanceCache::Affine { image_id, .. }) => a.invert(observed, *image_id),
            _ => Err(crate::Error::InvalidArgument("appearance cache does not match the model".into())),
        }
    }

    /// `(∂L/∂Î, ∂L/∂params)` given `∂L/∂Î_app`.
    pub fn backward(&self, cache: &AppearanceCache, d_app: &ImageBuffer) -> Result<(ImageBuffer, Vec<f64>)> {
        match (self, cache) {
            (Appearance::Cnn(c), AppearanceCache::Cnn(cache)) => c.backward(cache, d_app),
            (Appearance::Affine(a), AppearanceCache::Affine { input, image_id }) => a.backward(input, *image_id, d_app),
            _ => Err(crate::Error::InvalidArgument("appearance cache does not match the model".into())),
        }
    }
}
