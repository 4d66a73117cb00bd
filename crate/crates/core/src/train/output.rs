use std::io::Write;
use std::path::{Path, PathBuf};

use super::dataset::Dataset;
use super::trainer::{IterationRecord, TrainConfig, TrainOutput, Trainer};
use crate::appearance::save_sidecar;
use crate::io::{save_cloud, save_image};
use crate::render::render_image;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct TrainArtifacts {
    pub cloud: PathBuf,
    pub appearance: PathBuf,
    pub log: PathBuf,
    pub output: TrainOutput,
}

fn checkpoint(t: &Trainer, dir: &Path, stem: &str) -> Result<()> {
    save_cloud(&t.cloud, &dir.join(format!("{stem}.ply")))?;
    save_sidecar(&t.appearance, &dir.join(format!("{stem}.app")))
}

/// Trains and writes into `out`:
/// `config.json`, `loss.csv`, `checkpoints/iter_NNNNNN.{ply,app}` every
/// `checkpoint_interval` iterations, `renders/iter_NNNNNN.ppm` of view 0
/// every `render_interval` iterations (0 disables), and the final
/// `cloud.ply` / `appearance.app`. A failing iteration leaves a
/// `checkpoints/failed.{ply,app}` snapshot of the last good state (a step
/// fails before it updates anything).
pub fn train_to_dir(
    data: &Dataset,
    config: TrainConfig,
    out: &Path,
    checkpoint_interval: usize,
    render_interval: usize,
) -> Result<TrainArtifacts> {
    let ckpt = out.join("checkpoints");
    let renders = out.join("renders");
    std::fs::create_dir_all(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
    if render_interval > 0 {
        std::fs::create_dir_all(&renders).map_err(|e| Error::io(&renders, e))?;
    }
    let cfg_path = out.join("config.json");
    let json = serde_json::to_string_pretty(&config).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(&cfg_path, json).map_err(|e| Error::io(&cfg_path, e))?;

    let log_path = out.join("loss.csv");
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
    writeln!(log, "{}", IterationRecord::csv_header()).map_err(|e| Error::io(&log_path, e))?;

    let mut trainer = Trainer::new(data, config)?;
    let result = loop {
        if trainer.iteration >= trainer.config.iterations {
            break Ok(());
        }
        match trainer.step() {
            Ok(rec) => {
                writeln!(log, "{}", rec.csv_row()).map_err(|e| Error::io(&log_path, e))?;
            }
            Err(e) => {
                checkpoint(&trainer, &ckpt, "failed")?;
                break Err(e);
            }
        }
        let it = trainer.iteration;
        if checkpoint_interval > 0 && it % checkpoint_interval == 0 {
            checkpoint(&trainer, &ckpt, &format!("iter_{it:06}"))?;
        }
        if render_interval > 0 && it % render_interval == 0 {
            let r = render_image(&trainer.cloud, &data.cameras[0], false);
            save_image(&r.color, &renders.join(format!("iter_{it:06}.ppm")))?;
        }
    };
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    result?;

    let cloud_path = out.join("cloud.ply");
    let app_path = out.join("appearance.app");
    save_cloud(&trainer.cloud, &cloud_path)?;
    save_sidecar(&trainer.appearance, &app_path)?;
    Ok(TrainArtifacts {
        cloud: cloud_path,
        appearance: app_path,
        log: log_path,
        output: trainer.finish(),
    })
}
