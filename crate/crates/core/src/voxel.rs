//! Lattice coordinates, the canonical Morton order, and quantization between
//! metric point clouds and depth-`D` voxel grids.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest supported grid; 3 × 21 interleaved bits fit in one `u64` key.
pub const MAX_DEPTH: u8 = 21;

/// An occupied integer lattice cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coord {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

#[inline]
fn spread_bits(v: u32) -> u64 {
    let mut x = u64::from(v) & 0x1f_ffff;
    x = (x | x << 32) & 0x001f_0000_0000_ffff;
    x = (x | x << 16) & 0x001f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact_bits(key: u64) -> u32 {
    let mut x = key & 0x1249_2492_4924_9249;
    x = (x | x >> 2) & 0x10c3_0c30_c30c_30c3;
    x = (x | x >> 4) & 0x100f_00f0_0f00_f00f;
    x = (x | x >> 8) & 0x001f_0000_ff00_00ff;
    x = (x | x >> 16) & 0x001f_0000_0000_ffff;
    x = (x | x >> 32) & 0x1f_ffff;
    x as u32
}

impl Coord {
    pub const fn new(x: u32, y: u32, z: u32) -> Self {
        Self { x, y, z }
    }

    /// Morton key with `z` as the most significant bit of every triple.
    ///
    /// The lowest three bits of the key are exactly the octant of the
    /// coordinate inside its parent, so siblings are contiguous and ordered
    /// by octant.
    #[inline]
    pub fn morton_key(self) -> u64 {
        spread_bits(self.x) | spread_bits(self.y) << 1 | spread_bits(self.z) << 2
    }

    #[inline]
    pub fn from_morton_key(key: u64) -> Self {
        Self {
            x: compact_bits(key),
            y: compact_bits(key >> 1),
            z: compact_bits(key >> 2),
        }
    }

    #[inline]
    pub fn parent(self) -> Self {
        Self::new(self.x >> 1, self.y >> 1, self.z >> 1)
    }

    /// Child of `self` in octant `octant` (bit 0: x, bit 1: y, bit 2: z).
    #[inline]
    pub fn child(self, octant: u8) -> Self {
        Self::new(
            self.x << 1 | u32::from(octant & 1),
            self.y << 1 | u32::from(octant >> 1 & 1),
            self.z << 1 | u32::from(octant >> 2 & 1),
        )
    }

    #[inline]
    pub fn as_array(self) -> [u32; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    fn fits(self, depth: u8) -> bool {
        let bound = 1u64 << depth;
        u64::from(self.x) < bound && u64::from(self.y) < bound && u64::from(self.z) < bound
    }
}

/// Canonical order used by every symbol stream: Morton order, z-major.
#[inline]
pub fn canonical_order(a: Coord, b: Coord) -> Ordering {
    a.morton_key().cmp(&b.morton_key())
}

impl Ord for Coord {
    fn cmp(&self, other: &Self) -> Ordering {
        canonical_order(*self, *other)
    }
}

impl PartialOrd for Coord {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A depth-tagged, canonically ordered, duplicate-free set of voxels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseGeometry {
    depth: u8,
    coords: Vec<Coord>,
}

impl SparseGeometry {
    /// Validates ordering and bounds of an already canonical coordinate list.
    pub fn new(depth: u8, coords: Vec<Coord>) -> Result<Self> {
        check_depth(depth)?;
        if let Some(c) = coords.iter().find(|c| !c.fits(depth)) {
            return Err(Error::InvalidInput(format!(
                "coordinate {:?} outside depth-{depth} grid",
                c.as_array()
            )));
        }
        if coords
            .windows(2)
            .any(|w| w[0].morton_key() >= w[1].morton_key())
        {
            return Err(Error::InvalidInput(
                "coordinates are not strictly increasing in canonical order".into(),
            ));
        }
        Ok(Self { depth, coords })
    }

    /// Sorts and deduplicates arbitrary coordinates.
    pub fn from_unsorted(depth: u8, mut coords: Vec<Coord>) -> Result<Self> {
        check_depth(depth)?;
        if let Some(c) = coords.iter().find(|c| !c.fits(depth)) {
            return Err(Error::InvalidInput(format!(
                "coordinate {:?} outside depth-{depth} grid",
                c.as_array()
            )));
        }
        coords.sort_unstable_by_key(|c| c.morton_key());
        coords.dedup();
        Ok(Self { depth, coords })
    }

    /// Caller guarantees canonical order and bounds.
    pub(crate) fn from_canonical_unchecked(depth: u8, coords: Vec<Coord>) -> Self {
        debug_assert!(coords.windows(2).all(|w| w[0] < w[1]));
        Self { depth, coords }
    }

    pub fn empty(depth: u8) -> Self {
        Self {
            depth,
            coords: Vec::new(),
        }
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Coord> {
        self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Row of `c` in this geometry, by binary search on the canonical order.
    pub fn position(&self, c: Coord) -> Option<usize> {
        let key = c.morton_key();
        self.coords
            .binary_search_by_key(&key, |c| c.morton_key())
            .ok()
    }
}

fn check_depth(depth: u8) -> Result<()> {
    if depth > MAX_DEPTH {
        return Err(Error::UnsupportedDepth(u32::from(depth)));
    }
    Ok(())
}

/// Metric point cloud in meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().flatten().all(|v| v.is_finite())
    }
}

/// Affine map between voxel indices and meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizationTransform {
    pub origin: [f64; 3],
    pub step: f64,
    pub depth: u8,
}

impl QuantizationTransform {
    /// Corner convention: voxel `k` maps to `origin + step * k`.
    #[inline]
    pub fn voxel_to_point(&self, c: Coord) -> [f64; 3] {
        let c = c.as_array();
        std::array::from_fn(|i| self.origin[i] + self.step * f64::from(c[i]))
    }
}

/// Quantizes a cloud onto a `2^depth` grid spanning its bounding box.
///
/// The longest axis is mapped onto `[0, 2^depth - 1]`; indices round half up.
pub fn quantize(pc: &PointCloud, depth: u8) -> Result<(SparseGeometry, QuantizationTransform)> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(Error::UnsupportedDepth(u32::from(depth)));
    }
    if pc.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !pc.is_finite() {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in &pc.points {
        for i in 0..3 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let extent = (0..3).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
    let max_index = (1u64 << depth) - 1;
    let step = if extent > 0.0 {
        extent / max_index as f64
    } else {
        1.0
    };

    let coords = pc
        .points
        .iter()
        .map(|p| {
            let idx: [u32; 3] = std::array::from_fn(|i| {
                let u = ((p[i] - lo[i]) / step + 0.5).floor();
                u.clamp(0.0, max_index as f64) as u32
            });
            Coord::new(idx[0], idx[1], idx[2])
        })
        .collect();
    let geometry = SparseGeometry::from_unsorted(depth, coords)?;
    Ok((
        geometry,
        QuantizationTransform {
            origin: lo,
            step,
            depth,
        },
    ))
}

pub fn dequantize(g: &SparseGeometry, t: &QuantizationTransform) -> Result<PointCloud> {
    if g.depth() != t.depth {
        return Err(Error::DepthMismatch {
            geometry: g.depth(),
            transform: t.depth,
        });
    }
    Ok(PointCloud::new(
        g.coords().iter().map(|&c| t.voxel_to_point(c)).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn order_examples() {
        let o = Coord::new(0, 0, 0);
        assert_eq!(canonical_order(o, o), Ordering::Equal);
        assert_eq!(canonical_order(o, Coord::new(1, 1, 1)), Ordering::Less);
    }

    #[test]
    fn depth_one_order_follows_octant() {
        // Hand-expanded keys: x contributes bit 0, y bit 1, z bit 2.
        let expected = [
            (Coord::new(0, 0, 0), 0),
            (Coord::new(1, 0, 0), 1),
            (Coord::new(0, 1, 0), 2),
            (Coord::new(1, 1, 0), 3),
            (Coord::new(0, 0, 1), 4),
            (Coord::new(1, 0, 1), 5),
            (Coord::new(0, 1, 1), 6),
            (Coord::new(1, 1, 1), 7),
        ];
        for (c, key) in expected {
            assert_eq!(c.morton_key(), key);
        }
        let g = SparseGeometry::from_unsorted(
            1,
            vec![
                Coord::new(1, 0, 0),
                Coord::new(0, 1, 0),
                Coord::new(0, 0, 1),
            ],
        )
        .unwrap();
        assert_eq!(
            g.coords(),
            &[
                Coord::new(1, 0, 0),
                Coord::new(0, 1, 0),
                Coord::new(0, 0, 1)
            ]
        );
    }

    #[test]
    fn order_is_strict_total_at_depth_two() {
        let all: Vec<Coord> = (0..4)
            .flat_map(|x| (0..4).flat_map(move |y| (0..4).map(move |z| Coord::new(x, y, z))))
            .collect();
        for &a in &all {
            for &b in &all {
                let ab = canonical_order(a, b);
                assert_eq!(ab, canonical_order(b, a).reverse());
                assert_eq!(ab == Ordering::Equal, a == b);
                for &c in &all {
                    if ab == Ordering::Less && canonical_order(b, c) == Ordering::Less {
                        assert_eq!(canonical_order(a, c), Ordering::Less);
                    }
                }
            }
        }
    }

    #[test]
    fn morton_round_trip_extremes() {
        let m = (1 << 21) - 1;
        for c in [
            Coord::new(m, 0, 0),
            Coord::new(0, m, 5),
            Coord::new(m, m, m),
        ] {
            assert_eq!(Coord::from_morton_key(c.morton_key()), c);
        }
    }

    #[test]
    fn geometry_rejects_bad_input() {
        assert!(SparseGeometry::new(1, vec![Coord::new(2, 0, 0)]).is_err());
        assert!(SparseGeometry::new(1, vec![Coord::new(1, 0, 0), Coord::new(0, 0, 0)]).is_err());
        assert!(SparseGeometry::new(1, vec![Coord::new(0, 0, 0), Coord::new(0, 0, 0)]).is_err());
        assert!(SparseGeometry::new(22, vec![]).is_err());
        assert!(SparseGeometry::new(0, vec![Coord::new(0, 0, 0)]).is_ok());
        assert!(SparseGeometry::new(0, vec![Coord::new(1, 0, 0)]).is_err());
    }

    #[test]
    fn quantize_lattice_points() {
        let pc = PointCloud::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let (g, t) = quantize(&pc, 1).unwrap();
        assert_eq!(g.coords(), &[Coord::new(0, 0, 0), Coord::new(1, 0, 0)]);
        assert_eq!(t.step, 1.0);
        assert_eq!(dequantize(&g, &t).unwrap(), pc);
    }

    #[test]
    fn quantize_floor_rule() {
        // origin 0.4, extent 0.2, step 0.2: u = 0 + 0.5 and ~1 + 0.5.
        let pc = PointCloud::new(vec![[0.4, 0.0, 0.0], [0.6, 0.0, 0.0]]);
        let (g, t) = quantize(&pc, 1).unwrap();
        assert_eq!(g.coords(), &[Coord::new(0, 0, 0), Coord::new(1, 0, 0)]);
        assert!((t.step - 0.2).abs() < 1e-15);
        assert_eq!(t.origin, [0.4, 0.0, 0.0]);
    }

    #[test]
    fn quantize_degenerate_cloud() {
        let pc = PointCloud::new(vec![[3.5, -2.0, 7.0]; 5]);
        for depth in [1, 7, 21] {
            let (g, t) = quantize(&pc, depth).unwrap();
            assert_eq!(g.coords(), &[Coord::new(0, 0, 0)]);
            assert_eq!(t.step, 1.0);
        }
    }

    #[test]
    fn quantize_errors() {
        assert!(matches!(
            quantize(&PointCloud::default(), 4),
            Err(Error::EmptyInput)
        ));
        let bad = PointCloud::new(vec![[f64::NAN, 0.0, 0.0]]);
        assert!(matches!(quantize(&bad, 4), Err(Error::InvalidInput(_))));
        let ok = PointCloud::new(vec![[0.0; 3]]);
        assert!(quantize(&ok, 0).is_err());
        assert!(quantize(&ok, 22).is_err());
    }

    #[test]
    fn dequantize_checks_depth() {
        let g = SparseGeometry::empty(3);
        let t = QuantizationTransform {
            origin: [0.0; 3],
            step: 1.0,
            depth: 4,
        };
        assert!(matches!(
            dequantize(&g, &t),
            Err(Error::DepthMismatch { .. })
        ));
        let t = QuantizationTransform { depth: 3, ..t };
        assert!(dequantize(&g, &t).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn quantize_is_sorted_unique_and_bounded(
            pts in prop::collection::vec(prop::array::uniform3(-50.0f64..50.0), 1..200),
            depth in 1u8..=16,
        ) {
            let pc = PointCloud::new(pts);
            let (g, t) = quantize(&pc, depth).unwrap();
            prop_assert!(g.coords().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(SparseGeometry::new(depth, g.coords().to_vec()).is_ok());
            // Every input point has a voxel within half a step per axis.
            let slack = t.step * 0.5 + 1e-9 * (1.0 + t.step);
            for p in &pc.points {
                let idx: [u32; 3] = std::array::from_fn(|i| {
                    (((p[i] - t.origin[i]) / t.step + 0.5).floor()).clamp(0.0, ((1u64 << depth) - 1) as f64) as u32
                });
                let c = Coord::new(idx[0], idx[1], idx[2]);
                prop_assert!(g.position(c).is_some());
                let q = t.voxel_to_point(c);
                for i in 0..3 {
                    prop_assert!((q[i] - p[i]).abs() <= slack);
                }
            }
        }

        #[test]
        fn morton_key_round_trip(x in 0u32..1 << 21, y in 0u32..1 << 21, z in 0u32..1 << 21) {
            let c = Coord::new(x, y, z);
            prop_assert_eq!(Coord::from_morton_key(c.morton_key()), c);
        }
    }
}
