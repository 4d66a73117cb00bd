//! Command line front end.
//!
//! Exit codes: 0 on success, 1 when a command fails at runtime, 2 on usage
//! errors (unknown flags, missing arguments, no subcommand).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::appearance::AppearanceKind;
use crate::backward::gradcheck::{run_gradcheck, GradcheckConfig};
use crate::eval::{evaluate_meshes, make_synthetic_scene, mean_ssim, psnr, MeshEvalConfig, MetricsReport, SceneKind, SynthConfig};
use crate::io::{load_cloud, load_mesh, load_scene, save_image, save_mesh, save_pfm, save_scene, MeshFormat};
use crate::mesh::{extract_mesh, MeshConfig};
use crate::render::render_image;
use crate::train::{train_to_dir, TrainConfig};
use crate::{Error, Result, Vec3};

#[derive(Debug, Parser)]
#[command(name = "confsplat", version, about = "Confidence-aware Gaussian splatting on the CPU", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a Gaussian cloud against the images of a scene file.
    Train(TrainArgs),
    /// Render color, depth, confidence and transmittance for scene cameras.
    Render(RenderArgs),
    /// Extract a triangle mesh from a trained cloud.
    Mesh(MeshArgs),
    /// Compute metrics and print them as JSON.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences on random scenes.
    Gradcheck(GradcheckArgs),
    /// Write an analytic synthetic scene (images, cameras, points, mesh).
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to 7000, or the value in `--config`.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Plain photometric loss instead of the confidence-weighted one.
    #[arg(long)]
    no_confidence: bool,
    /// Disable the color and normal variance losses.
    #[arg(long)]
    no_var_losses: bool,
    #[arg(long, value_enum)]
    appearance: Option<AppearanceKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Full training configuration as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_primitives: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    checkpoint_interval: usize,
    /// Write a PPM render of view 0 every N iterations (0 disables).
    #[arg(long, default_value_t = 500)]
    render_interval: usize,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only this camera (by position in the scene file).
    #[arg(long)]
    view: Option<usize>,
}

#[derive(Debug, Args)]
struct MeshArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    res: usize,
    #[arg(long, default_value_t = 0.5)]
    iso: f64,
    #[arg(long, default_value_t = 10)]
    refine: usize,
    /// Mesh only inside this box: `xmin,ymin,zmin,xmax,ymax,zmax`.
    #[arg(long, value_delimiter = ',', num_args = 6, allow_hyphen_values = true)]
    region: Option<Vec<f64>>,
    /// Defaults to the output extension.
    #[arg(long, value_enum)]
    format: Option<MeshFormat>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, requires = "gt")]
    pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    gt: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep predicted samples outside the ground-truth bounds.
    #[arg(long)]
    no_crop: bool,
    /// Cloud whose renders are compared with the scene images.
    #[arg(long, requires = "scene")]
    cloud: Option<PathBuf>,
    #[arg(long, requires = "cloud")]
    scene: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    scenes: usize,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SceneKind::PlaneSphere)]
    kind: SceneKind,
    #[arg(long, default_value_t = 16)]
    views: usize,
    #[arg(long, default_value_t = 64)]
    res: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exposure jitter half-range `j`: factors `exp(ε)`, `ε ~ U(-j, j)`.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 1000)]
    points: usize,
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Train(a) => train(a),
        Command::Render(a) => render(a),
        Command::Mesh(a) => mesh(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Synth(a) => synth(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let mut cfg: TrainConfig = read_json(path)?;
            if let Some(n) = a.iters {
                cfg.iterations = n;
                cfg.weights = cfg.weights.scheduled_for(n);
            }
            cfg
        }
        None => TrainConfig::new(a.iters.unwrap_or(7000)),
    };
    if let Some(beta) = a.beta {
        cfg.weights.beta = beta;
    }
    if a.no_confidence {
        cfg.weights.confidence = false;
        cfg.densify.confidence_steered = false;
    }
    if a.no_var_losses {
        cfg.weights = cfg.weights.without_variance();
    }
    if let Some(kind) = a.appearance {
        cfg.appearance = kind;
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(cap) = a.max_primitives {
        cfg.densify.max_primitives = cap;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(a: TrainArgs) -> Result<i32> {
    let cfg = train_config(&a)?;
    let data = load_scene(&a.scene)?;
    let art = train_to_dir(&data, cfg, &a.out, a.checkpoint_interval, a.render_interval)?;
    if let Some(last) = art.output.log.last() {
        println!("iterations: {}", art.output.log.len());
        println!("last view psnr: {:.2} dB", last.psnr);
    }
    println!("primitives: {}", art.output.cloud.len());
    println!("cloud: {}", art.cloud.display());
    println!("appearance: {}", art.appearance.display());
    println!("log: {}", art.log.display());
    Ok(0)
}

fn render(a: RenderArgs) -> Result<i32> {
    let cloud = load_cloud(&a.cloud)?;
    let data = load_scene(&a.scene)?;
    let views: Vec<usize> = match a.view {
        Some(v) if v >= data.len() => {
            return Err(Error::InvalidArgument(format!("view {v} out of range (scene has {})", data.len())))
        }
        Some(v) => vec![v],
        None => (0..data.len()).collect(),
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    for v in views {
        let r = render_image(&cloud, &data.cameras[v], false);
        let stem = a.out.join(format!("view_{v:03}"));
        save_image(&r.color, &stem.with_extension("ppm"))?;
        save_pfm(&r.depth, &with_suffix(&stem, "_depth.pfm"))?;
        save_pfm(&r.confidence, &with_suffix(&stem, "_confidence.pfm"))?;
        save_pfm(&r.transmittance, &with_suffix(&stem, "_transmittance.pfm"))?;
        println!("view {v:3}  psnr {:6.2} dB", psnr(&data.images[v], &r.color.clamped01())?);
    }
    Ok(0)
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn mesh(a: MeshArgs) -> Result<i32> {
    let format = match a.format {
        Some(f) => f,
        None => MeshFormat::from_path(&a.out).unwrap_or(MeshFormat::Obj),
    };
    let cloud = load_cloud(&a.cloud)?;
    let cfg = MeshConfig {
        resolution: a.res,
        iso: a.iso,
        refine_iters: a.refine,
        region: a.region.map(|r| (Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5]))),
        ..Default::default()
    };
    let mesh = extract_mesh(&cloud, &cfg)?;
    save_mesh(&mesh, &a.out, format)?;
    println!("{} vertices, {} triangles -> {}", mesh.vertices.len(), mesh.triangles.len(), a.out.display());
    Ok(0)
}

fn eval(a: EvalArgs) -> Result<i32> {
    if a.pred.is_none() && a.cloud.is_none() {
        return Err(Error::InvalidArgument("nothing to evaluate: pass --pred/--gt and/or --cloud/--scene".into()));
    }
    if !(a.tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {}", a.tau)));
    }
    let mut report = MetricsReport::empty(a.tau, a.samples, a.seed);
    if let (Some(pred), Some(gt)) = (&a.pred, &a.gt) {
        let cfg = MeshEvalConfig {
            tau: a.tau,
            samples: a.samples,
            seed: a.seed,
            crop: !a.no_crop,
        };
        evaluate_meshes(&load_mesh(pred)?, &load_mesh(gt)?, &cfg, &mut report)?;
    }
    if let (Some(cloud), Some(scene)) = (&a.cloud, &a.scene) {
        let cloud = load_cloud(cloud)?;
        let data = load_scene(scene)?;
        let (mut p, mut s) = (0.0, 0.0);
        for (cam, img) in data.cameras.iter().zip(&data.images) {
            let r = render_image(&cloud, cam, false).color.clamped01();
            p += psnr(img, &r)?;
            s += mean_ssim(img, &r)?;
        }
        report.psnr = Some(p / data.len() as f64);
        report.ssim = Some(s / data.len() as f64);
    }
    println!("{}", report.to_json());
    Ok(0)
}

fn gradcheck(a: GradcheckArgs) -> Result<i32> {
    let cfg = GradcheckConfig {
        scenes: a.scenes,
        seed: a.seed,
        ..Default::default()
    };
    let report = run_gradcheck(&cfg)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", report.table());
    }
    Ok(if report.passed() { 0 } else { 1 })
}

fn synth(a: SynthArgs) -> Result<i32> {
    let cfg = SynthConfig {
        kind: a.kind,
        views: a.views,
        resolution: a.res,
        seed: a.seed,
        exposure_jitter: a.jitter,
        init_points: a.points,
        ..Default::default()
    };
    let scene = make_synthetic_scene(&cfg)?;
    let path = save_scene(&scene.dataset, &a.out)?;
    println!("{}", path.display());
    Ok(0)
}
