//! Network inputs: the reflection-padded low-resolution copy of the render and
//! the positional encoding grid.

use crate::loss::ssim::reflect;
use crate::scene::ImageBuffer;

/// Padding that brings `n` up to the next multiple of `factor`, split as
/// `(before, after)` with the smaller half first.
pub fn pad_split(n: usize, factor: usize) -> (usize, usize) {
    let total = n.div_ceil(factor) * factor - n;
    (total / 2, total - total / 2)
}

/// Reflection-pads each dimension to a multiple of `factor`, then box-averages
/// `factor x factor` blocks. Output is `ceil(H/factor) x ceil(W/factor)`.
pub fn downsample_reflect(image: &ImageBuffer, factor: usize) -> ImageBuffer {
    let (w, h, ch) = (image.width, image.height, image.channels);
    let (ow, oh) = (w.div_ceil(factor), h.div_ceil(factor));
    let (px, _) = pad_split(w, factor);
    let (py, _) = pad_split(h, factor);
    let norm = 1.0 / (factor * factor) as f64;
    let mut out = ImageBuffer::zeros(ow, oh, ch);
    for oy in 0..oh {
        for ox in 0..ow {
            for dy in 0..factor {
                let sy = reflect((oy * factor + dy) as isize - py as isize, h);
                for dx in 0..factor {
                    let sx = reflect((ox * factor + dx) as isize - px as isize, w);
                    for c in 0..ch {
                        let i = out.index(ox, oy, c);
                        out.data[i] += image.get(sx, sy, c) * norm;
                    }
                }
            }
        }
    }
    out
}

/// [`downsample_reflect`] with the 32x factor used by the appearance network.
pub fn downsample32_reflect(image: &ImageBuffer) -> ImageBuffer {
    downsample_reflect(image, 32)
}

fn span(i: usize, n: usize) -> f64 {
    if n == 1 {
        0.0
    } else {
        -1.0 + 2.0 * i as f64 / (n - 1) as f64
    }
}

/// Three channels `(u, v, r)` with `u, v` spanning `[-1, 1]` across pixel
/// centers and `r = sqrt(u^2 + v^2)`.
pub fn positional_encoding(width: usize, height: usize) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, 3, |x, y, c| {
        let (u, v) = (span(x, width), span(y, height));
        match c {
            0 => u,
            1 => v,
            _ => u.hypot(v),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_stays_constant() {
        let img = ImageBuffer::filled(45, 70, 3, 0.37);
        let low = downsample32_reflect(&img);
        assert_eq!((low.width, low.height), (2, 3));
        assert!(low.data.iter().all(|v| (v - 0.37).abs() < 1e-12));
    }

    #[test]
    fn exact_multiple_is_plain_box_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = ImageBuffer::from_fn(64, 64, 1, |_, _, _| rng.random());
        let low = downsample32_reflect(&img);
        assert_eq!((low.width, low.height), (2, 2));
        for by in 0..2 {
            for bx in 0..2 {
                let mut s = 0.0;
                for y in 0..32 {
                    for x in 0..32 {
                        s += img.get(bx * 32 + x, by * 32 + y, 0);
                    }
                }
                assert!((low.get(bx, by, 0) - s / 1024.0).abs() < 1e-12);
            }
        }
    }

    /// Builds the 64x64 padded image explicitly (mirror without repeating the
    /// edge pixel, 15 rows/cols before and 16 after) and averages it.
    #[test]
    fn padded_33_matches_explicit_padding() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let img = ImageBuffer::from_fn(33, 33, 3, |_, _, _| rng.random());
        let mirror = |i: isize| -> usize {
            if i < 0 {
                (-i) as usize
            } else if i > 32 {
                (64 - i) as usize
            } else {
                i as usize
            }
        };
        let mut padded = vec![0.0; 64 * 64 * 3];
        for y in 0..64 {
            for x in 0..64 {
                for c in 0..3 {
                    padded[(y * 64 + x) * 3 + c] = img.get(mirror(x as isize - 15), mirror(y as isize - 15), c);
                }
            }
        }
        let low = downsample32_reflect(&img);
        assert_eq!((low.width, low.height), (2, 2));
        for by in 0..2 {
            for bx in 0..2 {
                for c in 0..3 {
                    let mut s = 0.0;
                    for y in 0..32 {
                        for x in 0..32 {
                            s += padded[((by * 32 + y) * 64 + bx * 32 + x) * 3 + c];
                        }
                    }
                    assert!((low.get(bx, by, c) - s / 1024.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn encoding_center_and_corners() {
        let pe = positional_encoding(7, 5);
        for c in 0..3 {
            assert_eq!(pe.get(3, 2, c), 0.0);
        }
        for (x, y) in [(0, 0), (6, 0), (0, 4), (6, 4)] {
            assert!((pe.get(x, y, 2) - 2f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(pe.get(0, 0, 0), -1.0);
        assert_eq!(pe.get(6, 4, 1), 1.0);
    }

    #[test]
    fn radius_symmetric_under_half_turn() {
        for (w, h) in [(1, 1), (2, 3), (8, 5), (13, 13)] {
            let pe = positional_encoding(w, h);
            for y in 0..h {
                for x in 0..w {
                    assert!((pe.get(x, y, 2) - pe.get(w - 1 - x, h - 1 - y, 2)).abs() < 1e-12);
                }
            }
        }
    }
}
