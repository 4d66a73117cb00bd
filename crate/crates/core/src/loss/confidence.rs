use crate::render::{CONFIDENCE_MAX, CONFIDENCE_MIN};
use crate::{Error, Result};

fn check_range(confidence: &[f64]) -> Result<()> {
    for &c in confidence {
        if !(CONFIDENCE_MIN..=CONFIDENCE_MAX).contains(&c) {
            return Err(Error::ConfidenceRange {
                value: c,
                min: CONFIDENCE_MIN,
                max: CONFIDENCE_MAX,
            });
        }
    }
    Ok(())
}

/// `mean_p(L_rgb·Ĉ - β·ln Ĉ)`.
pub fn confidence_loss(rgb_map: &[f64], confidence: &[f64], beta: f64) -> Result<f64> {
    check_range(confidence)?;
    if rgb_map.len() != confidence.len() {
        return Err(Error::Shape {
            expected: rgb_map.len().to_string(),
            actual: confidence.len().to_string(),
        });
    }
    let sum: f64 = rgb_map.iter().zip(confidence).map(|(l, c)| l * c - beta * c.ln()).sum();
    Ok(sum / rgb_map.len() as f64)
}

/// Per-pixel `∂/∂Ĉ (L_rgb·Ĉ - β ln Ĉ) = L_rgb - β/Ĉ`, before the mean.
#[inline]
pub fn confidence_pixel_gradient(rgb: f64, confidence: f64, beta: f64) -> f64 {
    rgb - beta / confidence
}

/// Mean-reduced gradient of [`confidence_loss`] w.r.t. each pixel's `Ĉ`.
/// Pixels whose raw blended confidence sat outside the clamp range get zero.
pub fn confidence_backward(rgb_map: &[f64], confidence: &[f64], clamped: &[bool], beta: f64) -> Result<Vec<f64>> {
    check_range(confidence)?;
    let n = rgb_map.len() as f64;
    Ok(rgb_map
        .iter()
        .zip(confidence)
        .zip(clamped)
        .map(|((&l, &c), &k)| if k { 0.0 } else { confidence_pixel_gradient(l, c, beta) / n })
        .collect())
}
