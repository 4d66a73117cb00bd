use crate::loss::NormalVarGradient;
use crate::render::RaySample;
use crate::Vec3;

/// Upstream gradients for one ray.
#[derive(Clone, Copy, Debug, Default)]
pub struct BlendUpstream {
    pub color: [f64; 3],
    pub normal: Vec3,
    pub depth: f64,
    /// W.r.t. the clamped confidence; ignored when the ray's confidence sat
    /// outside the clamp range.
    pub confidence: f64,
    /// Scale and target pixel of the color-variance term.
    pub color_var: Option<(f64, [f64; 3])>,
    pub normal_var: Option<(f64, NormalVarGradient)>,
    /// Scale of the per-ray depth variance term.
    pub distortion: f64,
}

/// Gradients w.r.t. the per-primitive quantities of one contributor.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ContribGrad {
    pub color: [f64; 3],
    pub normal: Vec3,
    pub t: f64,
    /// W.r.t. the activated confidence `γ̃`.
    pub confidence: f64,
    pub alpha: f64,
}

/// Back-propagates through front-to-back blending.
///
/// Every output is a blended quantity `Q = Σ w_i q_i` (or a function of such
/// sums), so with `g_i = ∂L/∂w_i` the opacity gradient is
/// `∂L/∂α_i = g_i·T_i - S_i/(1-α_i)`, where `S_i = Σ_{j>i} w_j g_j` is obtained
/// by peeling the ray total front to back.
pub fn backward_blend(sample: &RaySample, up: &BlendUpstream) -> Vec<ContribGrad> {
    let contribs = &sample.contribs;
    if contribs.is_empty() {
        return Vec::new();
    }
    let d_conf = if sample.confidence_clamped() { 0.0 } else { up.confidence };
    let w_sum: f64 = contribs.iter().map(|c| c.weight).sum();
    let n_blend = sample.normal;
    let mean_depth = if w_sum > 0.0 { sample.depth / w_sum } else { 0.0 };

    let mut grads = Vec::with_capacity(contribs.len());
    let mut g = Vec::with_capacity(contribs.len());
    for c in contribs {
        let w = c.weight;
        let mut gi = up.depth * c.t + d_conf * c.confidence + up.normal.dot(&c.normal);
        let mut out = ContribGrad {
            normal: up.normal * w,
            t: w * up.depth,
            confidence: w * d_conf,
            ..Default::default()
        };
        for k in 0..3 {
            gi += up.color[k] * c.color[k];
            out.color[k] = w * up.color[k];
        }
        if let Some((scale, target)) = up.color_var {
            let mut sq = 0.0;
            for k in 0..3 {
                let diff = c.color[k] - target[k];
                sq += diff * diff;
                out.color[k] += scale * 2.0 * w * diff;
            }
            gi += scale * sq;
        }
        if let Some((scale, mode)) = up.normal_var {
            let diff = c.normal - n_blend;
            match mode {
                NormalVarGradient::Appendix => {
                    gi += scale * diff.norm_squared();
                    out.normal += diff * (2.0 * w * scale);
                }
                NormalVarGradient::Exact => {
                    let open = 1.0 - w_sum;
                    gi += scale * (diff.norm_squared() - 2.0 * open * n_blend.dot(&c.normal));
                    out.normal += (diff * (2.0 * w) - n_blend * (2.0 * open * w)) * scale;
                }
            }
        }
        if up.distortion != 0.0 {
            let dev = c.t - mean_depth;
            gi += up.distortion * dev * dev;
            out.t += up.distortion * 2.0 * w * dev;
        }
        g.push(gi);
        grads.push(out);
    }

    let total: f64 = contribs.iter().zip(&g).map(|(c, gi)| c.weight * gi).sum();
    let mut prefix = 0.0;
    for (i, c) in contribs.iter().enumerate() {
        prefix += c.weight * g[i];
        let behind = if i + 1 == contribs.len() { 0.0 } else { (total - prefix) / (1.0 - c.alpha) };
        grads[i].alpha = g[i] * c.transmittance - behind;
    }
    grads
}

/// Color-variance gradients only (`2 w_i (c_i - I)` and the α chain).
pub fn backward_color_var(sample: &RaySample, target: &[f64; 3]) -> Vec<ContribGrad> {
    backward_blend(
        sample,
        &BlendUpstream {
            color_var: Some((1.0, *target)),
            ..Default::default()
        },
    )
}

/// Normal-variance gradients only.
pub fn backward_normal_var(sample: &RaySample, mode: NormalVarGradient) -> Vec<ContribGrad> {
    backward_blend(
        sample,
        &BlendUpstream {
            normal_var: Some((1.0, mode)),
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{color_variance_loss, distortion_ray, normal_variance_loss};
    use crate::render::{Contrib, CONFIDENCE_MAX, CONFIDENCE_MIN};
    use crate::scene::Ray;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Per-contributor inputs of a synthetic ray.
    #[derive(Clone)]
    struct Prim {
        alpha: f64,
        color: [f64; 3],
        normal: Vec3,
        t: f64,
        conf: f64,
    }

    fn blend(prims: &[Prim]) -> RaySample {
        let mut s = RaySample::empty(Ray::new(Vec3::zeros(), Vec3::z()));
        let mut tr = 1.0;
        let mut raw = 0.0;
        for (i, p) in prims.iter().enumerate() {
            let w = tr * p.alpha;
            for k in 0..3 {
                s.color[k] += w * p.color[k];
            }
            s.normal += p.normal * w;
            s.depth += w * p.t;
            raw += w * p.conf;
            s.contribs.push(Contrib {
                index: i as u32,
                weight: w,
                alpha: p.alpha,
                t: p.t,
                transmittance: tr,
                color: p.color,
                normal: p.normal,
                confidence: p.conf,
                alpha_clamped: false,
            });
            tr *= 1.0 - p.alpha;
        }
        s.transmittance = tr;
        s.confidence_raw = raw;
        s.confidence = raw.clamp(CONFIDENCE_MIN, CONFIDENCE_MAX);
        s
    }

    fn random_prims(rng: &mut ChaCha8Rng, n: usize) -> Vec<Prim> {
        (0..n)
            .map(|_| Prim {
                alpha: rng.random_range(0.05..0.9),
                color: [rng.random(), rng.random(), rng.random()],
                normal: Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize(),
                t: rng.random_range(1.0..3.0),
                conf: rng.random_range(0.3..3.0),
            })
            .collect()
    }

    fn loss(prims: &[Prim], up: &BlendUpstream) -> f64 {
        let s = blend(prims);
        let mut l = up.depth * s.depth + up.normal.dot(&s.normal) + up.confidence * s.confidence;
        for k in 0..3 {
            l += up.color[k] * s.color[k];
        }
        if let Some((scale, target)) = up.color_var {
            l += scale * color_variance_loss(&s, &target);
        }
        if let Some((scale, _)) = up.normal_var {
            l += scale * normal_variance_loss(&s);
        }
        l + up.distortion * distortion_ray(&s)
    }

    fn check(actual: f64, fd: f64, what: &str) {
        if fd.abs() > 1e-6 {
            assert!(((actual - fd) / fd).abs() < 1e-5, "{what}: {actual} vs {fd}");
        } else {
            assert!((actual - fd).abs() < 1e-7, "{what}: {actual} vs {fd}");
        }
    }

    fn fd_check(prims: &[Prim], up: &BlendUpstream) {
        let grads = backward_blend(&blend(prims), up);
        let h = 1e-5;
        let perturb = |f: &dyn Fn(&mut Prim, f64)| -> Vec<f64> {
            (0..prims.len())
                .map(|i| {
                    let mut p = prims.to_vec();
                    let mut m = prims.to_vec();
                    f(&mut p[i], h);
                    f(&mut m[i], -h);
                    (loss(&p, up) - loss(&m, up)) / (2.0 * h)
                })
                .collect()
        };
        let fd_alpha = perturb(&|p, d| p.alpha += d);
        let fd_t = perturb(&|p, d| p.t += d);
        let fd_conf = perturb(&|p, d| p.conf += d);
        for i in 0..prims.len() {
            check(grads[i].alpha, fd_alpha[i], "alpha");
            check(grads[i].t, fd_t[i], "t");
            check(grads[i].confidence, fd_conf[i], "confidence");
        }
        for k in 0..3 {
            let fd_c = perturb(&|p, d| p.color[k] += d);
            let fd_n = perturb(&|p, d| p.normal[k] += d);
            for i in 0..prims.len() {
                check(grads[i].color[k], fd_c[i], "color");
                check(grads[i].normal[k], fd_n[i], "normal");
            }
        }
    }

    #[test]
    fn single_contributor_alpha_gradient_is_value() {
        let prims = [Prim { alpha: 0.6, color: [0.3, 0.7, 0.2], normal: Vec3::z(), t: 2.0, conf: 1.0 }];
        let up = BlendUpstream { color: [1.0, 0.0, 0.0], ..Default::default() };
        let g = backward_blend(&blend(&prims), &up);
        assert!((g[0].alpha - 0.3).abs() < 1e-15);
    }

    #[test]
    fn two_contributor_alpha_gradient() {
        let p = |c: [f64; 3]| Prim { alpha: 0.5, color: c, normal: Vec3::z(), t: 1.0, conf: 1.0 };
        let prims = [p([1.0, 0.0, 0.0]), p([0.0, 1.0, 0.0])];
        for ch in 0..3 {
            let mut up = BlendUpstream::default();
            up.color[ch] = 1.0;
            let g = backward_blend(&blend(&prims), &up);
            let expected = prims[0].color[ch] - 0.5 * prims[1].color[ch];
            assert!((g[0].alpha - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn color_var_hand_expansion() {
        let p = |c: [f64; 3]| Prim { alpha: 0.5, color: c, normal: Vec3::z(), t: 1.0, conf: 1.0 };
        let prims = [p([1.0, 0.0, 0.0]), p([0.0, 1.0, 0.0])];
        let target = [0.5, 0.25, 0.0];
        let g = backward_color_var(&blend(&prims), &target);
        // ‖c0 - I‖² = 0.3125, ‖c1 - I‖² = 0.8125, w = (0.5, 0.25)
        assert!((g[0].alpha - (0.3125 - 0.25 * 0.8125 / 0.5)).abs() < 1e-12);
        assert!((g[1].alpha - 0.8125 * 0.5).abs() < 1e-12);
        assert!((g[0].color[0] - 2.0 * 0.5 * 0.5).abs() < 1e-12);
        assert!((g[1].color[1] - 2.0 * 0.25 * 0.75).abs() < 1e-12);
    }

    #[test]
    fn color_var_zero_when_colors_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut prims = random_prims(&mut rng, 4);
        prims.iter_mut().for_each(|p| p.color = [0.2, 0.4, 0.6]);
        for g in backward_color_var(&blend(&prims), &[0.2, 0.4, 0.6]) {
            assert_eq!(g, ContribGrad::default());
        }
    }

    #[test]
    fn normal_var_appendix_two_contributors() {
        let prims = [
            Prim { alpha: 0.5, color: [0.0; 3], normal: Vec3::x(), t: 1.0, conf: 1.0 },
            Prim { alpha: 1.0, color: [0.0; 3], normal: Vec3::z(), t: 1.0, conf: 1.0 },
        ];
        let g = backward_normal_var(&blend(&prims), NormalVarGradient::Appendix);
        assert!((g[0].normal - Vec3::new(0.5, 0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn normal_var_zero_when_normals_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut prims = random_prims(&mut rng, 4);
        prims.last_mut().unwrap().alpha = 1.0;
        prims.iter_mut().for_each(|p| p.normal = Vec3::y());
        for g in backward_normal_var(&blend(&prims), NormalVarGradient::Appendix) {
            assert!(g.normal.norm() < 1e-12 && g.alpha.abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn generic_blend_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.random_range(1..7);
            let prims = random_prims(&mut rng, n);
            let up = BlendUpstream {
                color: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                normal: Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                depth: rng.random_range(-1.0..1.0),
                confidence: rng.random_range(-1.0..1.0),
                color_var: Some((0.7, [rng.random(), rng.random(), rng.random()])),
                normal_var: Some((0.3, NormalVarGradient::Exact)),
                distortion: 0.9,
            };
            fd_check(&prims, &up);
        }
    }

    #[test]
    fn clamped_confidence_has_no_gradient() {
        let prims = [Prim { alpha: 0.9, color: [0.0; 3], normal: Vec3::z(), t: 1.0, conf: 20.0 }];
        let up = BlendUpstream { confidence: 1.0, ..Default::default() };
        let g = backward_blend(&blend(&prims), &up);
        assert_eq!(g[0].confidence, 0.0);
        assert_eq!(g[0].alpha, 0.0);
    }
}
