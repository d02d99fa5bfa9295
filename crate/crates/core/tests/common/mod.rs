#![allow(dead_code)]

pub mod gradcheck;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reno_core::{Coord, SparseGeometry};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random voxel set mixing uniform noise with a few dense blobs, so that both
/// sparse and crowded parents show up.
pub fn random_geometry(rng: &mut ChaCha8Rng, depth: u8, target: usize) -> SparseGeometry {
    let side = 1u32 << depth;
    let mut set = BTreeSet::new();
    let blobs = rng.gen_range(1..=4);
    let centers: Vec<[u32; 3]> = (0..blobs)
        .map(|_| {
            [
                rng.gen_range(0..side),
                rng.gen_range(0..side),
                rng.gen_range(0..side),
            ]
        })
        .collect();
    let mut attempts = 0;
    while set.len() < target && attempts < target * 50 {
        attempts += 1;
        let c = if rng.gen_bool(0.3) {
            [
                rng.gen_range(0..side),
                rng.gen_range(0..side),
                rng.gen_range(0..side),
            ]
        } else {
            let k = centers[rng.gen_range(0..centers.len())];
            let r = (side / 8).max(2) as i64;
            std::array::from_fn(|a| {
                (k[a] as i64 + rng.gen_range(-r..=r)).clamp(0, side as i64 - 1) as u32
            })
        };
        set.insert((c[0], c[1], c[2]));
    }
    let coords = set
        .into_iter()
        .map(|(x, y, z)| Coord::new(x, y, z))
        .collect();
    SparseGeometry::from_unsorted(depth, coords).unwrap()
}

/// Parent cells and occupancy codes at one level, as a sorted set.
pub type LevelCodes = BTreeSet<([u32; 3], u8)>;

/// Octree built by recursive subdivision of the root cube. Returns, for every
/// level `l = 0..depth`, the occupied cells at level `l` with the code of
/// their occupied sub-cells (bit `dx + 2 dy + 4 dz`).
pub fn brute_force_octree(voxels: &[[u32; 3]], depth: u8) -> Vec<LevelCodes> {
    let mut levels = vec![LevelCodes::new(); depth as usize];
    subdivide(voxels, [0, 0, 0], 0, depth, &mut levels);
    levels
}

fn subdivide(inside: &[[u32; 3]], cell: [u32; 3], level: u8, depth: u8, out: &mut [LevelCodes]) {
    if inside.is_empty() || level == depth {
        return;
    }
    let shift = depth - level - 1;
    let mut code = 0u8;
    for dz in 0..2u32 {
        for dy in 0..2u32 {
            for dx in 0..2u32 {
                let child = [2 * cell[0] + dx, 2 * cell[1] + dy, 2 * cell[2] + dz];
                let members: Vec<[u32; 3]> = inside
                    .iter()
                    .copied()
                    .filter(|v| (0..3).all(|a| v[a] >> shift == child[a]))
                    .collect();
                if !members.is_empty() {
                    code |= 1 << (dx + 2 * dy + 4 * dz);
                    subdivide(&members, child, level + 1, depth, out);
                }
            }
        }
    }
    out[level as usize].insert((cell, code));
}

pub fn voxels(g: &SparseGeometry) -> Vec<[u32; 3]> {
    g.coords().iter().map(|c| c.as_array()).collect()
}

/// Five-point central-difference derivative of `f` at `x`, exact up to
/// fourth-order terms in `h`.
pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    let near = f(x + h) - f(x - h);
    let far = f(x + 2.0 * h) - f(x - 2.0 * h);
    (8.0 * near - far) / (12.0 * h)
}

/// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` in the L2 norm;
/// zero when both vectors vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn max_abs_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
}
