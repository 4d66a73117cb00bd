//! Acceptance criteria, one line each.
//!
//! Runs without the libtest harness so every verdict is printed even when it
//! passes. A failed criterion is reported on its line and in the closing
//! tally; the process still exits 0 so the rest of the test suite runs.
//! Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 2 6`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use confsplat::appearance::{write_sidecar, Appearance, AppearanceKind, CnnAppearance, CnnConfig};
use confsplat::backward::gradcheck::{random_scene, run_gradcheck, GradcheckConfig};
use confsplat::eval::{
    evaluate_meshes, make_synthetic_scene, psnr, saturated_normal_coherence, MeshEvalConfig, MetricsReport, SynthConfig,
};
use confsplat::io::{cloud_to_ply, mesh_to_ply, ply::write_ply};
use confsplat::loss::{
    confidence_loss, confidence_pixel_gradient, dssim_decoupled, normal_variance_fast, normal_variance_sum, ssim,
    ssim_components, total_loss, LossInputs, LossWeights,
};
use confsplat::mesh::{extract_mesh, MeshConfig};
use confsplat::render::{alpha_3d, max_contribution_point, render_image, render_ray, ALPHA_CUTOFF, TRANSMITTANCE_EPS};
use confsplat::scene::{Gaussian, GaussianCloud, ImageBuffer, Ray};
use confsplat::train::{effective_threshold, Dataset, TrainConfig, Trainer};
use confsplat::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageBuffer {
    ImageBuffer::from_fn(w, h, 3, |_, _, _| rng.random())
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn gradient_suite() -> Verdict {
    let start = Instant::now();
    let report = run_gradcheck(&GradcheckConfig::default()).expect("gradcheck runs");
    let secs = start.elapsed().as_secs_f64();
    let terms = ["l1", "ssim", "confidence", "color_var", "normal_var", "appearance"];
    let covered = terms.iter().all(|t| report.rows.iter().any(|r| r.term == *t && r.checked > 0));
    let worst = report.rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let checked: usize = report.rows.iter().map(|r| r.checked).sum();
    let failing: Vec<String> = report.rows.iter().filter(|r| !r.passed()).map(|r| format!("{}/{}", r.param_class, r.term)).collect();
    verdict(
        report.passed() && covered && secs <= 120.0,
        format!("{checked} checks, worst rel err {worst:.2e}, {secs:.0}s, failing rows {failing:?}"),
    )
}

fn appendix_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_a: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..12);
        let mut t = 1.0;
        let mut weights = Vec::new();
        for i in 0..k {
            let a: f64 = if i + 1 == k { 1.0 } else { rng.random_range(0.0..1.0) };
            weights.push(t * a);
            t *= 1.0 - a;
        }
        let normals: Vec<Vec3> = (0..k).map(|_| random_unit(&mut rng)).collect();
        let blended: Vec3 = weights.iter().zip(&normals).map(|(w, n)| n * *w).sum();
        worst_a = worst_a.max((normal_variance_sum(&weights, &normals) - normal_variance_fast(&blended)).abs());
    }

    let beta = 0.075;
    let mut worst_b: f64 = 0.0;
    for _ in 0..200 {
        let n = 16;
        let rgb: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
        let conf: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..4.0)).collect();
        let p = rng.random_range(0..n);
        let h = 1e-6;
        let mut plus = conf.clone();
        plus[p] += h;
        let mut minus = conf.clone();
        minus[p] -= h;
        let fd = (confidence_loss(&rgb, &plus, beta).unwrap() - confidence_loss(&rgb, &minus, beta).unwrap()) / (2.0 * h) * n as f64;
        worst_b = worst_b.max((fd - confidence_pixel_gradient(rgb[p], conf[p], beta)).abs());
    }

    let at_clamp = confidence_pixel_gradient(0.0, 0.001, beta);
    verdict(
        worst_a <= 1e-10 && worst_b <= 1e-6 && at_clamp == -75.0,
        format!("(a) max |sum - (1-|N|^2)| {worst_a:.1e}; (b) max FD err {worst_b:.1e}; (c) gradient at clamp {at_clamp}"),
    )
}

fn confidence_reductions() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rgb: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..1.0)).collect();
        let mean = rgb.iter().sum::<f64>() / rgb.len() as f64;
        let l = confidence_loss(&rgb, &vec![1.0; rgb.len()], 0.075).unwrap();
        worst = worst.max((l - mean).abs());
    }
    let tau = 2e-4;
    let below = (0..1_000_000)
        .filter(|_| {
            let g = rng.random_range(-12.0f64..12.0).exp();
            effective_threshold(tau, g) < tau
        })
        .count();
    verdict(
        worst <= 1e-12 && below == 0,
        format!("max |L_conf - L_rgb| at C=1: {worst:.1e}; thresholds below tau: {below} of 1000000"),
    )
}

/// Direct windowed SSIM: 11x11 Gaussian window (sigma 1.5), reflect padding,
/// combined formula.
fn reference_ssim(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    let g: Vec<f64> = {
        let w: Vec<f64> = (0..11).map(|k| (-((k as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    };
    let reflect = |i: isize, n: usize| -> usize {
        let mut i = i;
        while i < 0 || i >= n as isize {
            i = if i < 0 { -i } else { 2 * (n as isize - 1) - i };
        }
        i as usize
    };
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    for c in 0..3 {
        for y in 0..a.height {
            for x in 0..a.width {
                let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..11 {
                    for dx in 0..11 {
                        let w = g[dy] * g[dx];
                        let sx = reflect(x as isize + dx as isize - 5, a.width);
                        let sy = reflect(y as isize + dy as isize - 5, a.height);
                        let (p, q) = (a.get(sx, sy, c), b.get(sx, sy, c));
                        mx += w * p;
                        my += w * q;
                        xx += w * p * p;
                        yy += w * q * q;
                        xy += w * p * q;
                    }
                }
                let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
                total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
    }
    total / (3 * a.width * a.height) as f64
}

fn ssim_decomposition() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_lcs, mut worst_dssim): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let (w, h) = (rng.random_range(8..24), rng.random_range(8..24));
        let a = random_image(&mut rng, w, h);
        let b = random_image(&mut rng, w, h);
        let lcs = ssim_components(&a, &b).unwrap().mean_ssim();
        worst_lcs = worst_lcs.max((lcs - reference_ssim(&a, &b)).abs());
        let classic = 1.0 - ssim(&a, &b).unwrap();
        worst_dssim = worst_dssim.max((dssim_decoupled(&a, &b, &b).unwrap() - classic).abs());
    }
    verdict(
        worst_lcs <= 1e-8 && worst_dssim <= 1e-8,
        format!("max |mean(lcs) - reference| {worst_lcs:.1e}; max |decoupled - classic| {worst_dssim:.1e}"),
    )
}

fn appearance_identity() -> Verdict {
    let scene = random_scene(5);
    let render = render_image(&scene.cloud, &scene.camera, true);
    let app = Appearance::Cnn(CnnAppearance::new(CnnConfig::default(), 3, 11).unwrap());
    let (corrected, _) = app.forward(&render.color, 0).unwrap().expect("cnn has a forward");
    let bitwise = corrected.data.iter().zip(&render.color.data).all(|(a, b)| a.to_bits() == b.to_bits());
    let weights = LossWeights::default();
    let base = LossInputs {
        target: &scene.target,
        render: &render,
        appearance: None,
        decoupled_luminance: true,
        camera: &scene.camera,
        iteration: 0,
        color_var_target: None,
    };
    let with = LossInputs { appearance: Some(&corrected), ..base };
    let a = total_loss(&base, &weights).unwrap().total;
    let b = total_loss(&with, &weights).unwrap().total;
    verdict(bitwise && (a - b).abs() <= 1e-12, format!("bitwise identity: {bitwise}; loss difference {:.1e}", (a - b).abs()))
}

/// O(N^2) reference: every weight recomputes its transmittance product.
fn brute_force_ray(cloud: &GaussianCloud, ray: &Ray) -> ([f64; 3], f64, Vec<f64>) {
    let mut hits: Vec<(f64, usize, f64)> = cloud
        .gaussians()
        .iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let (_, inv) = g.covariance();
            let t = max_contribution_point(&g.position, &inv, ray).t;
            let a = alpha_3d(g, ray);
            (t > 0.0 && a >= ALPHA_CUTOFF).then_some((t, i, a))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut color = [0.0; 3];
    let mut weights = Vec::new();
    for k in 0..hits.len() {
        let t_before: f64 = hits[..k].iter().map(|h| 1.0 - h.2).product();
        if k > 0 && t_before < TRANSMITTANCE_EPS {
            break;
        }
        let w = t_before * hits[k].2;
        let c = confsplat::sh::sh_eval(&cloud.gaussians()[hits[k].1].sh, &ray.direction, cloud.active_sh_degree);
        for ch in 0..3 {
            color[ch] += w * c[ch];
        }
        weights.push(w);
    }
    let t_final = 1.0 - weights.iter().sum::<f64>();
    (color, t_final, weights)
}

fn blending_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut worst_sum): (f64, f64) = (0.0, 0.0);
    for s in 0..50 {
        let scene = random_scene(100 + s);
        for _ in 0..20 {
            let eye = Vec3::new(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4), 2.5);
            let target = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.2));
            let ray = Ray::new(eye, target - eye);
            let sample = render_ray(&scene.cloud, &ray);
            let (color, t, weights) = brute_force_ray(&scene.cloud, &ray);
            let mut err = (sample.transmittance - t).abs();
            for c in 0..3 {
                err = err.max((sample.color[c] - color[c]).abs());
            }
            if weights.len() == sample.contribs.len() {
                for (w, c) in weights.iter().zip(&sample.contribs) {
                    err = err.max((w - c.weight).abs());
                }
            } else {
                err = f64::INFINITY;
            }
            worst = worst.max(err);
            worst_sum = worst_sum.max((sample.weight_sum() + sample.transmittance - 1.0).abs());
        }
    }
    verdict(
        worst <= 1e-10 && worst_sum <= 1e-9,
        format!("1000 rays: max deviation from reference {worst:.1e}; max |sum w + T - 1| {worst_sum:.1e}"),
    )
}

fn mean_train_psnr(data: &Dataset, cloud: &GaussianCloud) -> f64 {
    let total: f64 = data
        .cameras
        .iter()
        .zip(&data.images)
        .map(|(cam, img)| psnr(img, &render_image(cloud, cam, false).color.clamped01()).unwrap())
        .sum();
    total / data.len() as f64
}

/// Lattice box: the ground-truth bounds grown by 0.1, which keeps the
/// backdrop floor out.
fn region(data: &Dataset) -> Option<(Vec3, Vec3)> {
    let (lo, hi) = data.gt_mesh.as_ref()?.bounds()?;
    Some((lo - Vec3::repeat(0.1), hi + Vec3::repeat(0.1)))
}

fn mesh_f1(data: &Dataset, cloud: &GaussianCloud) -> f64 {
    let mesh = extract_mesh(cloud, &MeshConfig { region: region(data), ..Default::default() }).unwrap();
    if mesh.is_empty() {
        return 0.0;
    }
    let mut report = MetricsReport::empty(0.05, 0, 0);
    evaluate_meshes(&mesh, data.gt_mesh.as_ref().unwrap(), &MeshEvalConfig::default(), &mut report).unwrap();
    report.f1.unwrap()
}

fn end_to_end() -> Verdict {
    let scene = make_synthetic_scene(&SynthConfig::default()).unwrap();
    let data = &scene.dataset;
    let mut cfg = TrainConfig::new(5000);
    cfg.densify.max_primitives = 5000;
    let start = Instant::now();
    let mut trainer = Trainer::new(data, cfg).unwrap();
    let mut peak = trainer.cloud.len();
    trainer
        .run(|t| {
            peak = peak.max(t.cloud.len());
            Ok(())
        })
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let out = trainer.finish();
    let p = mean_train_psnr(data, &out.cloud);
    let f1 = mesh_f1(data, &out.cloud);
    verdict(
        p >= 25.0 && f1 >= 0.8 && peak <= 5000 && secs <= 900.0,
        format!("psnr {p:.2} dB, F1@0.05 {f1:.3}, peak primitives {peak}, training {secs:.0}s"),
    )
}

const ABLATION_ITERATIONS: usize = 1500;
const ABLATION_RESOLUTION: usize = 32;

/// (F1, mean |N| over saturated rays) for one configuration.
fn ablation_run(seed: u64, appearance: AppearanceKind, variance: bool) -> (f64, f64) {
    let scene = make_synthetic_scene(&SynthConfig {
        seed,
        resolution: ABLATION_RESOLUTION,
        exposure_jitter: 0.3,
        ..Default::default()
    })
    .unwrap();
    let data = &scene.dataset;
    let mut cfg = TrainConfig::new(ABLATION_ITERATIONS);
    cfg.seed = seed;
    cfg.appearance = appearance;
    cfg.densify.max_primitives = 3000;
    if !variance {
        cfg.weights = cfg.weights.without_variance();
    }
    let mut trainer = Trainer::new(data, cfg).unwrap();
    trainer.run(|_| Ok(())).unwrap();
    let cloud = trainer.finish().cloud;
    let (mut sum, mut count) = (0.0, 0usize);
    for (v, cam) in data.cameras.iter().enumerate() {
        let mask = scene.object_mask(v);
        if let Some((m, n)) = saturated_normal_coherence(&render_image(&cloud, cam, false), 0.01, Some(&mask)) {
            sum += m * n as f64;
            count += n;
        }
    }
    (mesh_f1(data, &cloud), if count > 0 { sum / count as f64 } else { 0.0 })
}

fn ablation_direction() -> Verdict {
    let mut app_wins = 0;
    let mut var_holds = 0;
    let mut rows = Vec::new();
    for seed in 1..=3 {
        let (f_full, n_full) = ablation_run(seed, AppearanceKind::Cnn, true);
        let (f_noapp, _) = ablation_run(seed, AppearanceKind::None, true);
        let (f_novar, n_novar) = ablation_run(seed, AppearanceKind::Cnn, false);
        if f_full > f_noapp {
            app_wins += 1;
        }
        if f_full >= f_novar - 0.02 && n_full > n_novar {
            var_holds += 1;
        }
        rows.push(format!(
            "seed {seed}: F1 full {f_full:.3} / no-app {f_noapp:.3} / no-var {f_novar:.3}, |N| {n_full:.4} vs {n_novar:.4}"
        ));
    }
    verdict(
        app_wins >= 2 && var_holds >= 2,
        format!("appearance helps {app_wins}/3, variance holds {var_holds}/3 ({ABLATION_ITERATIONS} iterations at {ABLATION_RESOLUTION} px); {}", rows.join("; ")),
    )
}

fn meshing_geometry() -> Verdict {
    let cloud = GaussianCloud::new(vec![Gaussian::isotropic(Vec3::zeros(), 1.0, 0.999, [0.5; 3])]);
    let mesh = extract_mesh(&cloud, &MeshConfig::default()).unwrap();
    let r = (2.0 * (0.999f64 / 0.5).ln()).sqrt();
    let worst = mesh.vertices.iter().map(|v| (v.norm() - r).abs()).fold(0.0, f64::max);
    let open = mesh.boundary_edge_count();
    verdict(
        !mesh.is_empty() && worst <= 1e-3 && open == 0,
        format!("{} triangles, max radial error {worst:.2e}, edges not shared by exactly two triangles: {open}", mesh.triangles.len()),
    )
}

/// Serialized checkpoint, mesh and metrics of a short run.
fn determinism_artifacts(threads: usize) -> (Vec<u8>, Vec<u8>, Vec<u8>, String) {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let scene = make_synthetic_scene(&SynthConfig {
            views: 6,
            resolution: 32,
            init_points: 300,
            exposure_jitter: 0.2,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let data = &scene.dataset;
        let mut cfg = TrainConfig::new(300);
        cfg.seed = 9;
        cfg.appearance = AppearanceKind::Cnn;
        cfg.densify.start = 50;
        cfg.densify.interval = 50;
        let mut trainer = Trainer::new(data, cfg).unwrap();
        trainer.run(|_| Ok(())).unwrap();
        let out = trainer.finish();
        let mut ply = Vec::new();
        write_ply(&cloud_to_ply(&out.cloud), &mut ply).unwrap();
        let mut app = Vec::new();
        write_sidecar(&out.appearance, &mut app).unwrap();
        let mesh = extract_mesh(&out.cloud, &MeshConfig { resolution: 64, region: region(data), ..Default::default() }).unwrap();
        let mut mesh_bytes = Vec::new();
        write_ply(&mesh_to_ply(&mesh), &mut mesh_bytes).unwrap();
        let mut report = MetricsReport::empty(0.05, 20_000, 0);
        let eval = MeshEvalConfig {
            samples: 20_000,
            ..Default::default()
        };
        if !mesh.is_empty() {
            evaluate_meshes(&mesh, data.gt_mesh.as_ref().unwrap(), &eval, &mut report).unwrap();
        }
        report.psnr = Some(mean_train_psnr(data, &out.cloud));
        (ply, app, mesh_bytes, report.to_json())
    })
}

fn determinism() -> Verdict {
    let a = determinism_artifacts(1);
    let b = determinism_artifacts(1);
    let c = determinism_artifacts(4);
    let same_run = a == b;
    let same_workers = a == c;
    verdict(
        same_run && same_workers,
        format!(
            "repeat run identical: {same_run}; 1 vs 4 workers identical: {same_workers} ({} checkpoint bytes, {} mesh bytes)",
            a.0.len(),
            a.2.len()
        ),
    )
}

type Criterion = (u32, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 10] = [
    (1, "gradient suite", gradient_suite),
    (2, "appendix identities", appendix_identities),
    (3, "confidence reductions", confidence_reductions),
    (4, "ssim decomposition", ssim_decomposition),
    (5, "appearance identity at init", appearance_identity),
    (6, "blending oracle", blending_oracle),
    (7, "end-to-end synthetic", end_to_end),
    (8, "ablation direction", ablation_direction),
    (9, "meshing geometry", meshing_geometry),
    (10, "determinism", determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let took: Duration = start.elapsed();
        println!(
            "criterion {n:>2} {:<4} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
        ran += 1;
        if !v.pass {
            failed += 1;
        }
    }
    println!("{} of {ran} acceptance criteria passed", ran - failed);
}
