//! Sparse occupancy codes: downscaling a geometry into (parents, codes) pairs
//! and expanding them back, plus the full multiscale pyramid.

use crate::error::{Error, Result};
use crate::voxel::{Coord, SparseGeometry};

/// 8-bit child-occupancy mask of a parent voxel; bit `δ` marks octant `δ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct OccupancyCode(u8);

impl OccupancyCode {
    pub const FULL: Self = Self(255);

    pub fn new(value: u8) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidCode);
        }
        Ok(Self(value))
    }

    /// Builds a code from its two 4-bit halves (`high` holds bits 7..4).
    pub fn from_nibbles(high: u8, low: u8) -> Result<Self> {
        debug_assert!(high < 16 && low < 16);
        Self::new(high << 4 | low)
    }

    #[inline]
    pub fn value(self) -> u8 {
        self.0
    }

    /// First sub-symbol in two-stage coding: bits 7..4.
    #[inline]
    pub fn high_nibble(self) -> u8 {
        self.0 >> 4
    }

    /// Second sub-symbol in two-stage coding: bits 3..0.
    #[inline]
    pub fn low_nibble(self) -> u8 {
        self.0 & 0x0f
    }

    #[inline]
    pub fn popcount(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub fn has_octant(self, octant: u8) -> bool {
        self.0 >> octant & 1 == 1
    }
}

/// Parent voxels at depth `d - 1` with the occupancy code of each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaleLayer {
    pub parents: SparseGeometry,
    pub codes: Vec<OccupancyCode>,
}

impl ScaleLayer {
    pub fn new(parents: SparseGeometry, codes: Vec<OccupancyCode>) -> Result<Self> {
        if parents.len() != codes.len() {
            return Err(Error::Shape(format!(
                "{} parents but {} codes",
                parents.len(),
                codes.len()
            )));
        }
        Ok(Self { parents, codes })
    }

    /// Number of children the layer expands to.
    pub fn child_count(&self) -> usize {
        self.codes.iter().map(|c| c.popcount() as usize).sum()
    }
}

/// Offset of `child` inside `parent`'s 2×2×2 block: `dx + 2·dy + 4·dz`.
pub fn octant_of(child: Coord, parent: Coord) -> Result<u8> {
    if child.parent() != parent {
        return Err(Error::NotAChild {
            child: child.as_array(),
            parent: parent.as_array(),
        });
    }
    Ok(
        (child.x - 2 * parent.x + 2 * (child.y - 2 * parent.y) + 4 * (child.z - 2 * parent.z))
            as u8,
    )
}

/// Fast occupancy generator.
///
/// Equivalent to a stride-2, kernel-2 convolution with weights `2^δ` over an
/// all-ones feature map. Under Morton order siblings are contiguous and the
/// key's low three bits are the octant, so this is one grouping pass.
pub fn fog(g: &SparseGeometry) -> Result<ScaleLayer> {
    if g.depth() == 0 {
        return Err(Error::DepthUnderflow);
    }
    let mut parents: Vec<Coord> = Vec::with_capacity(g.len() / 2 + 1);
    let mut codes: Vec<OccupancyCode> = Vec::with_capacity(g.len() / 2 + 1);
    let mut current: Option<(u64, u8)> = None;
    for c in g.coords() {
        let key = c.morton_key();
        let parent_key = key >> 3;
        let bit = 1u8 << (key & 7);
        match &mut current {
            Some((k, code)) if *k == parent_key => *code |= bit,
            _ => {
                if let Some((k, code)) = current {
                    parents.push(Coord::from_morton_key(k));
                    codes.push(OccupancyCode(code));
                }
                current = Some((parent_key, bit));
            }
        }
    }
    if let Some((k, code)) = current {
        parents.push(Coord::from_morton_key(k));
        codes.push(OccupancyCode(code));
    }
    Ok(ScaleLayer {
        parents: SparseGeometry::from_canonical_unchecked(g.depth() - 1, parents),
        codes,
    })
}

/// Fast coordinate generator: expands every code into its 8 sub-voxels and
/// keeps the ones whose bit is set.
///
/// Children of a Morton-ordered parent list emitted in ascending octant are
/// already in canonical order, so no re-sort is needed.
pub fn fcg(layer: &ScaleLayer) -> Result<SparseGeometry> {
    if layer.parents.len() != layer.codes.len() {
        return Err(Error::Shape("parents and codes differ in length".into()));
    }
    let depth = layer.parents.depth() + 1;
    if depth > crate::voxel::MAX_DEPTH {
        return Err(Error::UnsupportedDepth(u32::from(depth)));
    }
    let mut children = Vec::with_capacity(layer.child_count());
    for (&p, &code) in layer.parents.coords().iter().zip(&layer.codes) {
        if code.0 == 0 {
            return Err(Error::InvalidCode);
        }
        let base = p.morton_key() << 3;
        let mut bits = code.0;
        while bits != 0 {
            let octant = bits.trailing_zeros() as u64;
            children.push(Coord::from_morton_key(base | octant));
            bits &= bits - 1;
        }
    }
    Ok(SparseGeometry::from_canonical_unchecked(depth, children))
}

/// All scale layers from depth 0 up to depth `D - 1`, shallowest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pyramid {
    pub depth: u8,
    pub layers: Vec<ScaleLayer>,
}

impl Pyramid {
    /// Occupancy code of the root voxel.
    pub fn base_code(&self) -> OccupancyCode {
        self.layers[0].codes[0]
    }

    /// Children geometry at depth `d`: the parents stored in layer `d`, or the
    /// reconstruction for `d == D`.
    pub fn children_at(&self, d: usize) -> &SparseGeometry {
        &self.layers[d].parents
    }
}

pub fn build_pyramid(g: &SparseGeometry) -> Result<Pyramid> {
    if g.is_empty() {
        return Err(Error::EmptyInput);
    }
    if g.depth() == 0 {
        return Err(Error::DepthUnderflow);
    }
    let mut layers = Vec::with_capacity(g.depth() as usize);
    let mut layer = fog(g)?;
    loop {
        let next = if layer.parents.depth() > 0 {
            Some(fog(&layer.parents)?)
        } else {
            None
        };
        layers.push(layer);
        match next {
            Some(n) => layer = n,
            None => break,
        }
    }
    layers.reverse();
    Ok(Pyramid {
        depth: g.depth(),
        layers,
    })
}

pub fn reconstruct_pyramid(p: &Pyramid) -> Result<SparseGeometry> {
    let first = p.layers.first().ok_or(Error::EmptyInput)?;
    if first.parents.depth() != 0 || p.layers.len() != p.depth as usize {
        return Err(Error::CorruptPyramid(0));
    }
    let mut current = fcg(first)?;
    for (i, layer) in p.layers.iter().enumerate().skip(1) {
        if current != layer.parents {
            return Err(Error::CorruptPyramid(i));
        }
        current = fcg(layer)?;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(depth: u8, pts: &[(u32, u32, u32)]) -> SparseGeometry {
        SparseGeometry::from_unsorted(
            depth,
            pts.iter().map(|&(x, y, z)| Coord::new(x, y, z)).collect(),
        )
        .unwrap()
    }

    fn origin() -> Coord {
        Coord::new(0, 0, 0)
    }

    #[test]
    fn octant_examples() {
        assert_eq!(octant_of(origin(), origin()).unwrap(), 0);
        assert_eq!(octant_of(Coord::new(1, 1, 1), origin()).unwrap(), 7);
        assert_eq!(octant_of(Coord::new(1, 0, 1), origin()).unwrap(), 5);
        assert_eq!(
            octant_of(Coord::new(5, 2, 7), Coord::new(2, 1, 3)).unwrap(),
            1 + 4
        );
        assert!(matches!(
            octant_of(Coord::new(2, 0, 0), origin()),
            Err(Error::NotAChild { .. })
        ));
    }

    #[test]
    fn octant_agrees_with_child() {
        let p = Coord::new(9, 4, 13);
        for o in 0..8 {
            assert_eq!(octant_of(p.child(o), p).unwrap(), o);
        }
    }

    #[test]
    fn fog_examples() {
        let l = fog(&geom(1, &[(0, 0, 0)])).unwrap();
        assert_eq!(l.parents.coords(), &[origin()]);
        assert_eq!(l.codes, vec![OccupancyCode(1)]);

        let all: Vec<_> = (0..8)
            .map(|o| origin().child(o))
            .map(|c| (c.x, c.y, c.z))
            .collect();
        assert_eq!(
            fog(&geom(1, &all)).unwrap().codes,
            vec![OccupancyCode::FULL]
        );

        let l = fog(&geom(1, &[(1, 0, 1)])).unwrap();
        assert_eq!(l.parents.coords(), &[origin()]);
        assert_eq!(l.codes, vec![OccupancyCode(32)]);

        assert!(matches!(
            fog(&SparseGeometry::empty(0)),
            Err(Error::DepthUnderflow)
        ));
    }

    #[test]
    fn fcg_examples() {
        let parents = geom(0, &[(0, 0, 0)]);
        let l = ScaleLayer::new(parents.clone(), vec![OccupancyCode(1)]).unwrap();
        assert_eq!(fcg(&l).unwrap(), geom(1, &[(0, 0, 0)]));
        let l = ScaleLayer::new(parents.clone(), vec![OccupancyCode::FULL]).unwrap();
        assert_eq!(fcg(&l).unwrap().len(), 8);
        let l = ScaleLayer {
            parents,
            codes: vec![OccupancyCode(0)],
        };
        assert!(matches!(fcg(&l), Err(Error::InvalidCode)));
    }

    #[test]
    fn code_rejects_zero() {
        assert!(OccupancyCode::new(0).is_err());
        let c = OccupancyCode::from_nibbles(0xa, 0x5).unwrap();
        assert_eq!(c.value(), 0xa5);
        assert_eq!((c.high_nibble(), c.low_nibble()), (0xa, 0x5));
    }

    #[test]
    fn pyramid_lone_voxel() {
        let p = build_pyramid(&geom(3, &[(0, 0, 0)])).unwrap();
        assert_eq!(p.layers.len(), 3);
        for (i, l) in p.layers.iter().enumerate() {
            assert_eq!(l.parents.depth() as usize, i);
            assert_eq!(l.codes, vec![OccupancyCode(1)]);
        }
    }

    #[test]
    fn pyramid_full_grid_depth_two() {
        let pts: Vec<_> = (0..4)
            .flat_map(|x| (0..4).flat_map(move |y| (0..4).map(move |z| (x, y, z))))
            .collect();
        let p = build_pyramid(&geom(2, &pts)).unwrap();
        let sizes: Vec<_> = p.layers.iter().map(|l| l.codes.len()).collect();
        assert_eq!(sizes, vec![1, 8]);
        assert!(p
            .layers
            .iter()
            .flat_map(|l| &l.codes)
            .all(|&c| c == OccupancyCode::FULL));
    }

    #[test]
    fn pyramid_rejects_empty() {
        assert!(matches!(
            build_pyramid(&SparseGeometry::empty(4)),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn single_layer_pyramid() {
        let g = geom(1, &[(0, 1, 1), (1, 1, 0)]);
        let p = build_pyramid(&g).unwrap();
        assert_eq!(p.layers.len(), 1);
        assert_eq!(reconstruct_pyramid(&p).unwrap(), fcg(&p.layers[0]).unwrap());
    }

    fn arb_geometry() -> impl Strategy<Value = SparseGeometry> {
        (2u8..=8).prop_flat_map(|depth| {
            let m = 1u32 << depth;
            prop::collection::vec((0..m, 0..m, 0..m), 1..300).prop_map(move |pts| geom(depth, &pts))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn fcg_inverts_fog(g in arb_geometry()) {
            let layer = fog(&g).unwrap();
            prop_assert_eq!(layer.child_count(), g.len());
            prop_assert_eq!(fcg(&layer).unwrap(), g);
        }
    }

    proptest! {
        #[test]
        fn fog_inverts_fcg(g in arb_geometry()) {
            let layer = fog(&g).unwrap();
            prop_assert_eq!(fog(&fcg(&layer).unwrap()).unwrap(), layer);
        }

        #[test]
        fn pyramid_round_trip(g in arb_geometry()) {
            let p = build_pyramid(&g).unwrap();
            prop_assert_eq!(p.layers.len(), g.depth() as usize);
            prop_assert_eq!(p.layers[0].parents.coords(), &[Coord::new(0, 0, 0)]);
            prop_assert!(p.layers.iter().map(|l| 8 * l.codes.len()).sum::<usize>() >= g.len());
            prop_assert_eq!(reconstruct_pyramid(&p).unwrap(), g);
        }

        #[test]
        fn tampered_pyramid_is_detected(g in arb_geometry(), pick in any::<prop::sample::Index>(), bit in 0u8..8) {
            let mut p = build_pyramid(&g).unwrap();
            let total: usize = p.layers.iter().map(|l| l.codes.len()).sum();
            let mut k = pick.index(total);
            let mut li = 0;
            while k >= p.layers[li].codes.len() {
                k -= p.layers[li].codes.len();
                li += 1;
            }
            let old = p.layers[li].codes[k].0;
            p.layers[li].codes[k].0 = old ^ (1 << bit);
            match reconstruct_pyramid(&p) {
                Err(Error::CorruptPyramid(_)) | Err(Error::InvalidCode) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
                Ok(r) => prop_assert_ne!(r, g),
            }
        }
    }
}
