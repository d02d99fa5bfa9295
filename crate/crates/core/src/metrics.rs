//! Point-to-point distortion: Chamfer distance and D1 PSNR with exact
//! nearest neighbors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel::PointCloud;

/// PSNR reported for identical clouds.
pub const PSNR_CAP_DB: f64 = 120.0;

/// Static 3-d tree stored implicitly: the median of every index range is the
/// node, its halves are the subtrees.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

impl KdTree {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut points = points.to_vec();
        build(&mut points, 0);
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `q` to its nearest stored point.
    pub fn nearest_dist2(&self, q: &[f64; 3]) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        search(&self.points, 0, q, &mut best);
        Some(best)
    }
}

fn build(points: &mut [[f64; 3]], axis: usize) {
    if points.len() <= 1 {
        return;
    }
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let (lo, hi) = points.split_at_mut(mid);
    build(lo, (axis + 1) % 3);
    build(&mut hi[1..], (axis + 1) % 3);
}

fn search(points: &[[f64; 3]], axis: usize, q: &[f64; 3], best: &mut f64) {
    if points.is_empty() {
        return;
    }
    let mid = points.len() / 2;
    let p = &points[mid];
    *best = best.min(dist2(p, q));
    let delta = q[axis] - p[axis];
    let (near, far) = if delta < 0.0 {
        (&points[..mid], &points[mid + 1..])
    } else {
        (&points[mid + 1..], &points[..mid])
    };
    let next = (axis + 1) % 3;
    search(near, next, q, best);
    if delta * delta <= *best {
        search(far, next, q, best);
    }
}

/// Squared nearest-neighbor distance from every point of `a` to `b`.
fn nn_dist2(a: &PointCloud, b: &KdTree) -> Vec<f64> {
    a.points
        .par_iter()
        .map(|p| b.nearest_dist2(p).expect("non-empty tree"))
        .collect()
}

fn check(a: &PointCloud, b: &PointCloud) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub d1_psnr_db: f64,
    pub chamfer: f64,
    pub mse_ab: f64,
    pub mse_ba: f64,
}

/// All metrics in one pass over both nearest-neighbor directions.
pub fn distortion(a: &PointCloud, b: &PointCloud, peak: f64) -> Result<DistortionReport> {
    check(a, b)?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidInput(format!("peak {peak}")));
    }
    let ab = nn_dist2(a, &KdTree::new(&b.points));
    let ba = nn_dist2(b, &KdTree::new(&a.points));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_sqrt = |v: &[f64]| v.iter().map(|d| d.sqrt()).sum::<f64>() / v.len() as f64;
    let (mse_ab, mse_ba) = (mean(&ab), mean(&ba));
    Ok(DistortionReport {
        d1_psnr_db: psnr_db(mse_ab.max(mse_ba), peak),
        chamfer: 0.5 * mean_sqrt(&ab) + 0.5 * mean_sqrt(&ba),
        mse_ab,
        mse_ba,
    })
}

fn psnr_db(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (3.0 * peak * peak / mse).log10()).min(PSNR_CAP_DB)
}

/// Symmetric mean nearest-neighbor Euclidean distance.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    check(a, b)?;
    let ab = nn_dist2(a, &KdTree::new(&b.points));
    let ba = nn_dist2(b, &KdTree::new(&a.points));
    let half_mean = |v: &[f64]| 0.5 * v.iter().map(|d| d.sqrt()).sum::<f64>() / v.len() as f64;
    Ok(half_mean(&ab) + half_mean(&ba))
}

/// Point-to-point PSNR, `10 log10(3 peak² / max(MSE_ab, MSE_ba))`, capped at
/// [`PSNR_CAP_DB`].
pub fn d1_psnr(a: &PointCloud, b: &PointCloud, peak: f64) -> Result<f64> {
    distortion(a, b, peak).map(|r| r.d1_psnr_db)
}
