use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::geometry::{chamfer, crop_to_bounds, f1_score, sample_surface};
use crate::mesh::TriMesh;
use crate::{Error, Result};

/// Metric summary as emitted by `eval`. Image metrics are `null` when no
/// images were compared; an infinite PSNR is written as the string `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(serialize_with = "ser_psnr", deserialize_with = "de_psnr")]
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub chamfer: Option<f64>,
    pub tau: f64,
    pub n_samples: usize,
    pub seed: u64,
}

fn ser_psnr<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) if x.is_infinite() && *x > 0.0 => s.serialize_str("inf"),
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_none(),
    }
}

fn de_psnr<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(x)) => Ok(Some(x)),
        Some(Raw::Str(s)) if s == "inf" => Ok(Some(f64::INFINITY)),
        Some(Raw::Str(s)) => Err(serde::de::Error::custom(format!("unexpected psnr value {s}"))),
    }
}

impl MetricsReport {
    pub fn empty(tau: f64, n_samples: usize, seed: u64) -> Self {
        MetricsReport {
            psnr: None,
            ssim: None,
            precision: None,
            recall: None,
            f1: None,
            chamfer: None,
            tau,
            n_samples,
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("metrics json: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshEvalConfig {
    pub tau: f64,
    pub samples: usize,
    pub seed: u64,
    /// Drop predicted samples outside the ground-truth bounds (grown by tau).
    pub crop: bool,
}

impl Default for MeshEvalConfig {
    fn default() -> Self {
        MeshEvalConfig {
            tau: 0.05,
            samples: 100_000,
            seed: 0,
            crop: true,
        }
    }
}

/// Fills the geometric fields of `report` from surface samples of both meshes.
pub fn evaluate_meshes(pred: &TriMesh, gt: &TriMesh, cfg: &MeshEvalConfig, report: &mut MetricsReport) -> Result<()> {
    let gt_pts = sample_surface(gt, cfg.samples, cfg.seed);
    let mut pred_pts = sample_surface(pred, cfg.samples, cfg.seed.wrapping_add(1));
    if cfg.crop {
        pred_pts = crop_to_bounds(&pred_pts, &gt_pts, cfg.tau);
    }
    let f = f1_score(&pred_pts, &gt_pts, cfg.tau)?;
    report.precision = Some(f.precision);
    report.recall = Some(f.recall);
    report.f1 = Some(f.f1);
    report.chamfer = Some(chamfer(&pred_pts, &gt_pts, cfg.tau)?);
    report.tau = cfg.tau;
    report.n_samples = cfg.samples;
    report.seed = cfg.seed;
    Ok(())
}
