//! Windowed SSIM split into luminance, contrast and structure terms, the
//! decoupled D-SSIM that takes luminance from a second image, and the adjoint
//! of both w.r.t. the rendered images.

use std::sync::OnceLock;

use crate::scene::ImageBuffer;
use crate::Result;

pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;
pub const C3: f64 = C2 / 2.0;
pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
const RADIUS: isize = (WINDOW / 2) as isize;

/// Normalized 1D Gaussian window; the 2D window is its outer product.
pub fn window_1d() -> &'static [f64; WINDOW] {
    static W: OnceLock<[f64; WINDOW]> = OnceLock::new();
    W.get_or_init(|| {
        let mut w = [0.0; WINDOW];
        for (k, v) in w.iter_mut().enumerate() {
            let d = k as f64 - RADIUS as f64;
            *v = (-d * d / (2.0 * SIGMA * SIGMA)).exp();
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    })
}

/// Mirror index without repeating the edge sample (`reflect` padding), valid
/// for any offset.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Reflection-padded separable Gaussian blur of one plane.
pub fn blur(src: &[f64], w: usize, h: usize) -> Vec<f64> {
    let g = window_1d();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                acc += gk * row[reflect(x as isize + k as isize - RADIUS, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, gk) in g.iter().enumerate() {
                acc += gk * tmp[reflect(y as isize + k as isize - RADIUS, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Adjoint of [`blur`]: `<blur(a), b> = <a, blur_adjoint(b)>`.
pub fn blur_adjoint(grad: &[f64], w: usize, h: usize) -> Vec<f64> {
    let g = window_1d();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = grad[y * w + x];
            if v == 0.0 {
                continue;
            }
            for (k, gk) in g.iter().enumerate() {
                tmp[reflect(y as isize + k as isize - RADIUS, h) * w + x] += gk * v;
            }
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = tmp[y * w + x];
            if v == 0.0 {
                continue;
            }
            for (k, gk) in g.iter().enumerate() {
                out[y * w + reflect(x as isize + k as isize - RADIUS, w)] += gk * v;
            }
        }
    }
    out
}

/// Windowed first and second moments of one channel pair.
struct Moments {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    var_x: Vec<f64>,
    var_y: Vec<f64>,
    cov_xy: Vec<f64>,
}

fn plane(img: &ImageBuffer, c: usize) -> Vec<f64> {
    (0..img.pixel_count()).map(|p| img.data[p * img.channels + c]).collect()
}

fn moments(x: &[f64], y: &[f64], w: usize, h: usize) -> Moments {
    let mu_x = blur(x, w, h);
    let mu_y = blur(y, w, h);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let exx = blur(&xx, w, h);
    let eyy = blur(&yy, w, h);
    let exy = blur(&xy, w, h);
    let n = w * h;
    Moments {
        var_x: (0..n).map(|i| exx[i] - mu_x[i] * mu_x[i]).collect(),
        var_y: (0..n).map(|i| eyy[i] - mu_y[i] * mu_y[i]).collect(),
        cov_xy: (0..n).map(|i| exy[i] - mu_x[i] * mu_y[i]).collect(),
        mu_x,
        mu_y,
    }
}

#[inline]
fn luminance(mx: f64, my: f64) -> f64 {
    (2.0 * mx * my + C1) / (mx * mx + my * my + C1)
}

/// Contrast times structure; equal to `c * s` because `C3 = C2 / 2`.
#[inline]
fn contrast_structure(vx: f64, vy: f64, cxy: f64) -> f64 {
    (2.0 * cxy + C2) / (vx + vy + C2)
}

/// Per-pixel, per-channel luminance, contrast and structure maps.
#[derive(Clone, Debug)]
pub struct SsimMaps {
    pub luminance: ImageBuffer,
    pub contrast: ImageBuffer,
    pub structure: ImageBuffer,
}

impl SsimMaps {
    /// Per-pixel `l·c·s`, averaged over channels.
    pub fn lcs_map(&self) -> Vec<f64> {
        let ch = self.luminance.channels;
        (0..self.luminance.pixel_count())
            .map(|p| {
                (0..ch)
                    .map(|c| {
                        let i = p * ch + c;
                        self.luminance.data[i] * self.contrast.data[i] * self.structure.data[i]
                    })
                    .sum::<f64>()
                    / ch as f64
            })
            .collect()
    }

    pub fn mean_ssim(&self) -> f64 {
        let m = self.lcs_map();
        m.iter().sum::<f64>() / m.len() as f64
    }
}

pub fn ssim_components(reference: &ImageBuffer, rendered: &ImageBuffer) -> Result<SsimMaps> {
    reference.check_same_shape(rendered)?;
    let (w, h, ch) = (reference.width, reference.height, reference.channels);
    let mut l = ImageBuffer::zeros(w, h, ch);
    let mut c = ImageBuffer::zeros(w, h, ch);
    let mut s = ImageBuffer::zeros(w, h, ch);
    for k in 0..ch {
        let m = moments(&plane(reference, k), &plane(rendered, k), w, h);
        for p in 0..w * h {
            let sx = m.var_x[p].max(0.0).sqrt();
            let sy = m.var_y[p].max(0.0).sqrt();
            l.data[p * ch + k] = luminance(m.mu_x[p], m.mu_y[p]);
            c.data[p * ch + k] = (2.0 * sx * sy + C2) / (m.var_x[p] + m.var_y[p] + C2);
            s.data[p * ch + k] = (m.cov_xy[p] + C3) / (sx * sy + C3);
        }
    }
    Ok(SsimMaps {
        luminance: l,
        contrast: c,
        structure: s,
    })
}

/// Classic mean SSIM.
pub fn ssim(reference: &ImageBuffer, rendered: &ImageBuffer) -> Result<f64> {
    Ok(ssim_components(reference, rendered)?.mean_ssim())
}

/// Per-pixel `1 - l(I, Î_app)·c(I, Î)·s(I, Î)`, averaged over channels.
pub fn dssim_decoupled_map(reference: &ImageBuffer, rendered: &ImageBuffer, appearance: &ImageBuffer) -> Result<Vec<f64>> {
    reference.check_same_shape(rendered)?;
    reference.check_same_shape(appearance)?;
    let (w, h, ch) = (reference.width, reference.height, reference.channels);
    let mut map = vec![0.0; w * h];
    for k in 0..ch {
        let x = plane(reference, k);
        let raw = moments(&x, &plane(rendered, k), w, h);
        let mu_app = blur(&plane(appearance, k), w, h);
        for p in 0..w * h {
            let v = luminance(raw.mu_x[p], mu_app[p]) * contrast_structure(raw.var_x[p], raw.var_y[p], raw.cov_xy[p]);
            map[p] += v / ch as f64;
        }
    }
    map.iter_mut().for_each(|v| *v = 1.0 - *v);
    Ok(map)
}

pub fn dssim_decoupled(reference: &ImageBuffer, rendered: &ImageBuffer, appearance: &ImageBuffer) -> Result<f64> {
    let map = dssim_decoupled_map(reference, rendered, appearance)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}

/// Gradients of `Σ_p upstream[p] · dssim_map[p]` w.r.t. the rendered image
/// (contrast/structure path) and the appearance image (luminance path).
pub fn dssim_decoupled_backward(
    reference: &ImageBuffer,
    rendered: &ImageBuffer,
    appearance: &ImageBuffer,
    upstream: &[f64],
) -> Result<(ImageBuffer, ImageBuffer)> {
    reference.check_same_shape(rendered)?;
    reference.check_same_shape(appearance)?;
    let (w, h, ch) = (reference.width, reference.height, reference.channels);
    let n = w * h;
    let mut d_rendered = ImageBuffer::zeros(w, h, ch);
    let mut d_app = ImageBuffer::zeros(w, h, ch);
    for k in 0..ch {
        let x = plane(reference, k);
        let y = plane(rendered, k);
        let raw = moments(&x, &y, w, h);
        let mu_app = blur(&plane(appearance, k), w, h);

        let mut d_mu_app = vec![0.0; n];
        let mut d_mu_y = vec![0.0; n];
        let mut d_eyy = vec![0.0; n];
        let mut d_exy = vec![0.0; n];
        for p in 0..n {
            // map = 1 - mean_c(l·cs)
            let dv = -upstream[p] / ch as f64;
            if dv == 0.0 {
                continue;
            }
            let (mx, ma) = (raw.mu_x[p], mu_app[p]);
            let l_num = 2.0 * mx * ma + C1;
            let l_den = mx * mx + ma * ma + C1;
            let l = l_num / l_den;
            let cs_num = 2.0 * raw.cov_xy[p] + C2;
            let cs_den = raw.var_x[p] + raw.var_y[p] + C2;
            let cs = cs_num / cs_den;

            d_mu_app[p] = dv * cs * (2.0 * mx * l_den - l_num * 2.0 * ma) / (l_den * l_den);
            let d_cov = dv * l * 2.0 / cs_den;
            let d_var_y = -dv * l * cs / cs_den;
            // var_y = E[y²] - μy², cov = E[xy] - μx μy
            d_eyy[p] = d_var_y;
            d_exy[p] = d_cov;
            d_mu_y[p] = -2.0 * raw.mu_y[p] * d_var_y - mx * d_cov;
        }
        let g_mu_app = blur_adjoint(&d_mu_app, w, h);
        let g_mu_y = blur_adjoint(&d_mu_y, w, h);
        let g_eyy = blur_adjoint(&d_eyy, w, h);
        let g_exy = blur_adjoint(&d_exy, w, h);
        for p in 0..n {
            d_rendered.data[p * ch + k] = g_mu_y[p] + 2.0 * y[p] * g_eyy[p] + x[p] * g_exy[p];
            d_app.data[p * ch + k] = g_mu_app[p];
        }
    }
    Ok((d_rendered, d_app))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, 3, |_, _, _| rng.random::<f64>())
    }

    /// Direct 11x11 window evaluation with explicit reflection, one pixel at a time.
    pub(crate) fn reference_ssim(x: &ImageBuffer, y: &ImageBuffer) -> f64 {
        let g = window_1d();
        let (w, h) = (x.width, x.height);
        let mut total = 0.0;
        for c in 0..x.channels {
            for py in 0..h {
                for px in 0..w {
                    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for (j, gj) in g.iter().enumerate() {
                        for (i, gi) in g.iter().enumerate() {
                            let qx = reflect(px as isize + i as isize - 5, w);
                            let qy = reflect(py as isize + j as isize - 5, h);
                            let wgt = gi * gj;
                            let a = x.get(qx, qy, c);
                            let b = y.get(qx, qy, c);
                            mx += wgt * a;
                            my += wgt * b;
                            sxx += wgt * a * a;
                            syy += wgt * b * b;
                            sxy += wgt * a * b;
                        }
                    }
                    let vx = sxx - mx * mx;
                    let vy = syy - my * my;
                    let cxy = sxy - mx * my;
                    total += ((2.0 * mx * my + C1) * (2.0 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
                }
            }
        }
        total / (w * h * x.channels) as f64
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(-5, 4), 1);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn identical_images_give_unit_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = random_image(&mut rng, 12, 9);
        let maps = ssim_components(&img, &img).unwrap();
        for v in maps.luminance.data.iter().chain(&maps.contrast.data).chain(&maps.structure.data) {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_shift_keeps_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 12, 12);
        let shifted = img.map(|v| v + 0.1);
        let maps = ssim_components(&img, &shifted).unwrap();
        assert!(maps.structure.data.iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(maps.luminance.data.iter().all(|&v| v < 1.0));
    }

    #[test]
    fn matches_reference_ssim() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let a = random_image(&mut rng, 13, 10);
            let b = random_image(&mut rng, 13, 10);
            let maps = ssim_components(&a, &b).unwrap();
            assert!((maps.mean_ssim() - reference_ssim(&a, &b)).abs() < 1e-8);
        }
    }

    #[test]
    fn component_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_image(&mut rng, 16, 16);
        let b = random_image(&mut rng, 16, 16);
        let maps = ssim_components(&a, &b).unwrap();
        for i in 0..maps.luminance.data.len() {
            assert!(maps.luminance.data[i] > 0.0 && maps.luminance.data[i] <= 1.0 + 1e-12);
            assert!(maps.contrast.data[i] > 0.0 && maps.contrast.data[i] <= 1.0 + 1e-12);
            assert!(maps.structure.data[i].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn blur_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (w, h) in [(8, 8), (4, 4), (13, 3), (1, 6)] {
            let a: Vec<f64> = (0..w * h).map(|_| rng.random()).collect();
            let b: Vec<f64> = (0..w * h).map(|_| rng.random()).collect();
            let lhs: f64 = blur(&a, w, h).iter().zip(&b).map(|(p, q)| p * q).sum();
            let rhs: f64 = a.iter().zip(blur_adjoint(&b, w, h)).map(|(p, q)| p * q).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_is_identity_without_appearance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_image(&mut rng, 10, 10);
        let b = random_image(&mut rng, 10, 10);
        assert!(dssim_decoupled(&a, &a, &a).unwrap().abs() < 1e-12);
        let classic = 1.0 - ssim(&a, &b).unwrap();
        assert!((dssim_decoupled(&a, &b, &b).unwrap() - classic).abs() < 1e-8);
    }

    #[test]
    fn decoupled_luminance_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_image(&mut rng, 10, 10);
        let doubled = a.map(|v| 2.0 * v);
        let d = dssim_decoupled(&a, &a, &doubled).unwrap();
        assert!(d > 0.0);
        let l = ssim_components(&a, &doubled).unwrap().luminance;
        let expected = 1.0 - l.data.iter().sum::<f64>() / l.data.len() as f64;
        assert!((d - expected).abs() < 1e-12);
    }

    #[test]
    fn decoupled_composes_component_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_image(&mut rng, 9, 11);
        let b = random_image(&mut rng, 9, 11);
        let c = random_image(&mut rng, 9, 11);
        let raw = ssim_components(&a, &b).unwrap();
        let app = ssim_components(&a, &c).unwrap();
        let mut total = 0.0;
        for i in 0..raw.luminance.data.len() {
            total += app.luminance.data[i] * raw.contrast.data[i] * raw.structure.data[i];
        }
        let expected = 1.0 - total / raw.luminance.data.len() as f64;
        assert!((dssim_decoupled(&a, &b, &c).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for (w, h) in [(8, 8), (4, 4), (7, 12)] {
            let a = random_image(&mut rng, w, h);
            let b = random_image(&mut rng, w, h);
            let c = random_image(&mut rng, w, h);
            let up: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.1..2.0)).collect();
            let f = |b: &ImageBuffer, c: &ImageBuffer| -> f64 {
                dssim_decoupled_map(&a, b, c).unwrap().iter().zip(&up).map(|(m, u)| m * u).sum()
            };
            let (db, dc) = dssim_decoupled_backward(&a, &b, &c, &up).unwrap();
            let step = 1e-6;
            for i in (0..b.data.len()).step_by(5) {
                let mut bp = b.clone();
                let mut bm = b.clone();
                bp.data[i] += step;
                bm.data[i] -= step;
                let fd = (f(&bp, &c) - f(&bm, &c)) / (2.0 * step);
                assert!((fd - db.data[i]).abs() < 1e-7 * (1.0 + fd.abs()), "rendered {i}: {fd} vs {}", db.data[i]);
                let mut cp = c.clone();
                let mut cm = c.clone();
                cp.data[i] += step;
                cm.data[i] -= step;
                let fd = (f(&b, &cp) - f(&b, &cm)) / (2.0 * step);
                assert!((fd - dc.data[i]).abs() < 1e-7 * (1.0 + fd.abs()), "appearance {i}");
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = ImageBuffer::zeros(4, 4, 3);
        let b = ImageBuffer::zeros(4, 5, 3);
        assert!(ssim_components(&a, &b).is_err());
    }
}
