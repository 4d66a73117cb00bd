use confsplat::appearance::AppearanceKind;
use confsplat::eval::{make_synthetic_scene, SceneKind, SynthConfig};
use confsplat::io::{load_scene, save_scene};
use confsplat::train::{init_from_points, train, train_to_dir, TrainConfig, Trainer};

fn plane_scene(views: usize, resolution: usize) -> confsplat::train::Dataset {
    make_synthetic_scene(&SynthConfig {
        kind: SceneKind::Plane,
        views,
        resolution,
        init_points: 400,
        ..Default::default()
    })
    .unwrap()
    .dataset
}

#[test]
fn zero_iterations_returns_the_initialization() {
    let data = plane_scene(4, 16);
    let out = train(&data, TrainConfig::new(0)).unwrap();
    assert_eq!(out.cloud, init_from_points(&data.points));
    assert!(out.log.is_empty());
    assert!(out.appearance.is_none());
}

#[test]
fn plane_psnr_improves_window_over_window() {
    let data = plane_scene(8, 32);
    let mut cfg = TrainConfig::new(2000);
    cfg.densify.max_primitives = 3000;
    let out = train(&data, cfg).unwrap();
    let windows: Vec<f64> = out
        .log
        .chunks(500)
        .map(|w| w.iter().map(|r| r.psnr).sum::<f64>() / w.len() as f64)
        .collect();
    assert_eq!(windows.len(), 4);
    for pair in windows.windows(2) {
        assert!(pair[1] > pair[0], "{windows:?}");
    }
}

#[test]
fn densification_respects_the_cap_and_fires_on_schedule() {
    let data = plane_scene(4, 24);
    let mut cfg = TrainConfig::new(400);
    cfg.densify.start = 50;
    cfg.densify.interval = 50;
    cfg.densify.max_primitives = 600;
    let out = train(&data, cfg).unwrap();
    assert!(!out.densify_events.is_empty());
    for e in &out.densify_events {
        assert_eq!(e.iteration % 50, 0);
        assert!(e.iteration > 50 && e.iteration <= 240);
        assert!(e.primitives <= 600);
    }
    assert!(out.log.iter().all(|r| r.primitives <= 600));
}

#[test]
fn checkpoints_are_bit_identical_across_runs() {
    let data = plane_scene(4, 16);
    let run = |dir: &std::path::Path| {
        let mut cfg = TrainConfig::new(120);
        cfg.seed = 3;
        cfg.appearance = AppearanceKind::H3dgs;
        cfg.densify.start = 30;
        cfg.densify.interval = 30;
        train_to_dir(&data, cfg, dir, 60, 0).unwrap();
        ["checkpoints/iter_000060.ply", "checkpoints/iter_000120.app", "cloud.ply", "loss.csv"]
            .map(|f| std::fs::read(dir.join(f)).unwrap())
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn saved_scene_trains_like_the_original() {
    let data = plane_scene(3, 12);
    let dir = tempfile::tempdir().unwrap();
    let path = save_scene(&data, dir.path()).unwrap();
    let loaded = load_scene(&path).unwrap();
    assert_eq!(loaded.len(), data.len());
    for (a, b) in loaded.images.iter().zip(&data.images) {
        assert!(a.data.iter().zip(&b.data).all(|(x, y)| (x - y).abs() <= 0.5 / 255.0 + 1e-12));
    }
    let t = Trainer::new(&loaded, TrainConfig::new(10)).unwrap();
    assert_eq!(t.cloud.len(), data.points.len());
}
