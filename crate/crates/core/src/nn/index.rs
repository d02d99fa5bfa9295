use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::voxel::{Coord, SparseGeometry};

use super::ROW_BLOCK;

/// Kernel offsets in lexicographic `(dz, dy, dx)` order, each in `-r..=r`.
///
/// Offset `o` and offset `len - 1 - o` are negations of each other.
pub fn kernel_offsets(kernel_size: usize) -> Vec<[i32; 3]> {
    assert!(kernel_size % 2 == 1, "kernel size must be odd");
    let r = (kernel_size / 2) as i32;
    let mut out = Vec::with_capacity(kernel_size.pow(3));
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

/// For every voxel of a geometry, the row index of each kernel-offset
/// neighbor (or [`NeighborIndex::NONE`]).
///
/// Built once per geometry and shared by every convolution on it.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    kernel_size: usize,
    volume: usize,
    rows: usize,
    table: Vec<u32>,
}

impl NeighborIndex {
    pub const NONE: u32 = u32::MAX;

    pub fn build(g: &SparseGeometry, kernel_size: usize) -> Self {
        let offsets = kernel_offsets(kernel_size);
        let volume = offsets.len();
        let rows = g.len();
        let coords = g.coords();
        let lookup: FxHashMap<u64, u32> = coords
            .iter()
            .enumerate()
            .map(|(i, c)| (c.morton_key(), i as u32))
            .collect();
        let bound = 1i64 << g.depth();

        let mut table = vec![Self::NONE; rows * volume];
        table
            .par_chunks_mut(volume * ROW_BLOCK)
            .enumerate()
            .for_each(|(block, chunk)| {
                for (r, slots) in chunk.chunks_mut(volume).enumerate() {
                    let row = block * ROW_BLOCK + r;
                    let c = coords[row];
                    let base = [i64::from(c.x), i64::from(c.y), i64::from(c.z)];
                    for (slot, off) in slots.iter_mut().zip(&offsets) {
                        if *off == [0, 0, 0] {
                            *slot = row as u32;
                            continue;
                        }
                        let n: [i64; 3] = std::array::from_fn(|k| base[k] + i64::from(off[k]));
                        if n.iter().any(|&v| v < 0 || v >= bound) {
                            continue;
                        }
                        let key = Coord::new(n[0] as u32, n[1] as u32, n[2] as u32).morton_key();
                        if let Some(&j) = lookup.get(&key) {
                            *slot = j;
                        }
                    }
                }
            });
        Self {
            kernel_size,
            volume,
            rows,
            table,
        }
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    /// Number of kernel taps.
    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn neighbors(&self, row: usize) -> &[u32] {
        &self.table[row * self.volume..(row + 1) * self.volume]
    }

    /// Mean number of occupied taps per voxel, center included.
    pub fn mean_occupancy(&self) -> f64 {
        if self.rows == 0 {
            return 0.0;
        }
        let hits = self.table.iter().filter(|&&n| n != Self::NONE).count();
        hits as f64 / self.rows as f64
    }
}
