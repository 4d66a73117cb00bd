//! Point-set metrics: nearest neighbors on a uniform grid, F1 and Chamfer,
//! and area-stratified surface sampling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::mesh::TriMesh;
use crate::{Error, Result, Vec3};

/// Uniform hash grid over a point set.
pub struct PointGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (i, p) in points.iter().enumerate() {
            let k = Self::key(p, cell);
            for a in 0..3 {
                lo[a] = lo[a].min(k[a]);
                hi[a] = hi[a].max(k[a]);
            }
            cells.entry(k).or_default().push(i as u32);
        }
        PointGrid {
            points,
            cell,
            cells,
            lo,
            hi,
        }
    }

    fn key(p: &Vec3, cell: f64) -> [i64; 3] {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    /// Nearest point index and distance; ties go to the lowest index.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let k = Self::key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        // Largest shell that can still hold points.
        let max_r = (0..3).map(|a| (k[a] - self.lo[a]).abs().max((self.hi[a] - k[a]).abs())).max().unwrap_or(0);
        for r in 0..=max_r {
            // Any point in shell r is at least (r - 1) cells away.
            if let Some((_, d)) = best {
                if ((r - 1) as f64) * self.cell > d {
                    break;
                }
            }
            for dx in -r..=r {
                for dy in -r..=r {
                    for dz in -r..=r {
                        if dx.abs() != r && dy.abs() != r && dz.abs() != r {
                            continue;
                        }
                        if let Some(list) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &i in list {
                                let d = (self.points[i as usize] - q).norm();
                                let better = match best {
                                    None => true,
                                    Some((bi, bd)) => d < bd || (d == bd && (i as usize) < bi),
                                };
                                if better {
                                    best = Some((i as usize, d));
                                }
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

pub fn nearest_brute_force(points: &[Vec3], q: &Vec3) -> Option<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - q).norm()))
        .fold(None, |best, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        })
}

/// Distance from every query to its nearest point in `set`.
pub fn nearest_distances(queries: &[Vec3], set: &[Vec3], cell: f64) -> Vec<f64> {
    let grid = PointGrid::new(set, cell);
    queries
        .par_iter()
        .map(|q| grid.nearest(q).expect("non-empty set").1)
        .collect()
}

fn non_empty(name: &'static str, pts: &[Vec3]) -> Result<()> {
    if pts.is_empty() {
        Err(Error::EmptyPointSet(name))
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct F1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1 {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        F1 {
            precision,
            recall,
            f1,
        }
    }
}

fn fraction_within(d: &[f64], tau: f64) -> f64 {
    d.iter().filter(|&&v| v <= tau).count() as f64 / d.len() as f64
}

/// Precision / recall at threshold `tau` (distances `<= tau` count).
pub fn f1_score(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<F1> {
    non_empty("pred", pred)?;
    non_empty("gt", gt)?;
    let p = fraction_within(&nearest_distances(pred, gt, tau), tau);
    let r = fraction_within(&nearest_distances(gt, pred, tau), tau);
    Ok(F1::from_pr(p, r))
}

pub fn f1_score_brute_force(pred: &[Vec3], gt: &[Vec3], tau: f64) -> Result<F1> {
    non_empty("pred", pred)?;
    non_empty("gt", gt)?;
    let d = |a: &[Vec3], b: &[Vec3]| -> Vec<f64> { a.iter().map(|q| nearest_brute_force(b, q).expect("non-empty").1).collect() };
    Ok(F1::from_pr(fraction_within(&d(pred, gt), tau), fraction_within(&d(gt, pred), tau)))
}

/// Symmetric mean nearest-neighbor distance. `cell` sizes the search grid.
pub fn chamfer(pred: &[Vec3], gt: &[Vec3], cell: f64) -> Result<f64> {
    non_empty("pred", pred)?;
    non_empty("gt", gt)?;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    Ok(0.5 * (mean(nearest_distances(pred, gt, cell)) + mean(nearest_distances(gt, pred, cell))))
}

/// Keeps the points inside the axis-aligned box of `reference` grown by `margin`.
pub fn crop_to_bounds(points: &[Vec3], reference: &[Vec3], margin: f64) -> Vec<Vec3> {
    let Some(first) = reference.first() else {
        return Vec::new();
    };
    let (lo, hi) = reference.iter().fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
    let (lo, hi) = (lo.add_scalar(-margin), hi.add_scalar(margin));
    points
        .iter()
        .filter(|p| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a]))
        .copied()
        .collect()
}

/// `n` points stratified over the cumulative-area distribution: sample `k`
/// falls in the area quantile `[(k)/n, (k+1)/n)`, then lands uniformly in
/// its triangle. A mesh without triangles yields its vertices.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Vec<Vec3> {
    if mesh.triangles.is_empty() {
        return mesh.vertices.clone();
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(t);
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return mesh.vertices.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let u = (k as f64 + rng.random::<f64>()) / n as f64 * acc;
            let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            a + (b - a) * r1 + (c - a) * r2
        })
        .collect()
}
