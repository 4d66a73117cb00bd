use rayon::prelude::*;

use crate::scene::GaussianCloud;
use crate::{Mat3, Vec3};

/// Upper bound of the field; keeps the iso level reachable for any `iso < 1`.
pub const FIELD_MAX: f64 = 0.999;

/// Contributions below this are dropped by the accelerated lookup.
const CUTOFF: f64 = 1e-9;

/// Max-contribution opacity at `x`, evaluated against every primitive.
pub fn field_eval(cloud: &GaussianCloud, x: &Vec3) -> f64 {
    cloud
        .gaussians()
        .iter()
        .map(|g| {
            let (_, inv) = g.covariance();
            let d = x - g.position;
            g.opacity() * (-0.5 * d.dot(&(inv * d))).exp()
        })
        .fold(0.0, f64::max)
        .min(FIELD_MAX)
}

#[derive(Clone, Debug)]
struct Primitive {
    mean: Vec3,
    inv_cov: Mat3,
    opacity: f64,
}

impl Primitive {
    fn value(&self, x: &Vec3) -> f64 {
        let d = x - self.mean;
        self.opacity * (-0.5 * d.dot(&(self.inv_cov * d))).exp()
    }
}

/// Opacity field with primitives binned on a coarse grid so a point query
/// only visits primitives whose cutoff box covers it.
#[derive(Clone, Debug)]
pub struct OpacityField {
    prims: Vec<Primitive>,
    lo: Vec3,
    bin_size: Vec3,
    dims: [usize; 3],
    /// CSR layout: primitives of bin `b` are `members[starts[b]..starts[b + 1]]`.
    starts: Vec<usize>,
    members: Vec<u32>,
}

impl OpacityField {
    /// Bins the cloud over the box `[lo, hi]` with at most `max_bins` bins per axis.
    pub fn new(cloud: &GaussianCloud, lo: Vec3, hi: Vec3, max_bins: usize) -> Self {
        let mut prims = Vec::new();
        let mut boxes = Vec::new();
        for g in cloud.gaussians() {
            let o = g.opacity();
            if o <= CUTOFF {
                continue;
            }
            let (cov, inv_cov) = g.covariance();
            let m = (2.0 * (o / CUTOFF).ln()).sqrt();
            let half = Vec3::new(cov[(0, 0)].sqrt(), cov[(1, 1)].sqrt(), cov[(2, 2)].sqrt()) * m;
            boxes.push((g.position - half, g.position + half));
            prims.push(Primitive {
                mean: g.position,
                inv_cov,
                opacity: o,
            });
        }
        let n = max_bins.max(1);
        let dims = [n; 3];
        let size = (hi - lo).map(|e| (e / n as f64).max(f64::MIN_POSITIVE));
        let bin_of = |p: f64, axis: usize| -> usize { (((p - lo[axis]) / size[axis]).floor().max(0.0) as usize).min(n - 1) };
        let ranges: Vec<Option<[(usize, usize); 3]>> = boxes
            .iter()
            .map(|(a, b)| {
                if (0..3).any(|k| b[k] < lo[k] || a[k] > hi[k]) {
                    return None;
                }
                Some([0, 1, 2].map(|k| (bin_of(a[k], k), bin_of(b[k], k))))
            })
            .collect();
        let bin = |i: usize, j: usize, k: usize| (k * dims[1] + j) * dims[0] + i;
        let mut counts = vec![0usize; n * n * n + 1];
        for r in ranges.iter().flatten() {
            for k in r[2].0..=r[2].1 {
                for j in r[1].0..=r[1].1 {
                    for i in r[0].0..=r[0].1 {
                        counts[bin(i, j, k) + 1] += 1;
                    }
                }
            }
        }
        for b in 1..counts.len() {
            counts[b] += counts[b - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut members = vec![0u32; *starts.last().unwrap_or(&0)];
        for (p, r) in ranges.iter().enumerate() {
            let Some(r) = r else { continue };
            for k in r[2].0..=r[2].1 {
                for j in r[1].0..=r[1].1 {
                    for i in r[0].0..=r[0].1 {
                        let b = bin(i, j, k);
                        members[fill[b]] = p as u32;
                        fill[b] += 1;
                    }
                }
            }
        }
        OpacityField {
            prims,
            lo,
            bin_size: size,
            dims,
            starts,
            members,
        }
    }

    /// Field value at `x`; exact up to contributions below `1e-9`. Points
    /// outside the binned box read as zero.
    pub fn eval(&self, x: &Vec3) -> f64 {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let f = ((x[k] - self.lo[k]) / self.bin_size[k]).floor();
            if f < -1e-9 || f > self.dims[k] as f64 {
                return 0.0;
            }
            idx[k] = (f.max(0.0) as usize).min(self.dims[k] - 1);
        }
        let b = (idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0];
        self.members[self.starts[b]..self.starts[b + 1]]
            .iter()
            .map(|&p| self.prims[p as usize].value(x))
            .fold(0.0, f64::max)
            .min(FIELD_MAX)
    }

    /// Values at every point of `points`, in parallel.
    pub fn eval_many(&self, points: &[Vec3]) -> Vec<f64> {
        points.par_iter().map(|p| self.eval(p)).collect()
    }
}
