//! Voxel grid primitives: coordinates, shapes, label volumes, mask windows,
//! scales and sparse affinity neighborhoods.
//!
//! All dense arrays are row-major with x fastest, so the flat index of
//! `(x, y, z)` is `x + X * (y + Y * z)`. Every iteration order in the crate is
//! derived from this layout.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed voxel coordinate. `z` is the anisotropic axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord3 {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl Coord3 {
    pub const ZERO: Coord3 = Coord3 { x: 0, y: 0, z: 0 };

    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Coord3 { x, y, z }
    }

    /// Componentwise product with a scale.
    pub fn scaled(self, scale: Scale) -> Coord3 {
        Coord3::new(
            self.x * i64::from(scale.x),
            self.y * i64::from(scale.y),
            self.z * i64::from(scale.z),
        )
    }

    /// Exact componentwise division by a scale, or `None` when some
    /// component is not divisible.
    pub fn divided(self, scale: Scale) -> Option<Coord3> {
        let (sx, sy, sz) = (i64::from(scale.x), i64::from(scale.y), i64::from(scale.z));
        if self.x % sx != 0 || self.y % sy != 0 || self.z % sz != 0 {
            return None;
        }
        Some(Coord3::new(self.x / sx, self.y / sy, self.z / sz))
    }

    pub fn is_zero(self) -> bool {
        self == Coord3::ZERO
    }

    /// Ordering key used for lexicographic (z, y, x) traversal.
    pub fn zyx(self) -> (i64, i64, i64) {
        (self.z, self.y, self.x)
    }
}

impl Add for Coord3 {
    type Output = Coord3;
    fn add(self, rhs: Coord3) -> Coord3 {
        Coord3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Coord3 {
    type Output = Coord3;
    fn sub(self, rhs: Coord3) -> Coord3 {
        Coord3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Coord3 {
    type Output = Coord3;
    fn neg(self) -> Coord3 {
        Coord3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Coord3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl From<[i64; 3]> for Coord3 {
    fn from([x, y, z]: [i64; 3]) -> Self {
        Coord3::new(x, y, z)
    }
}

/// Extents of a volume along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Shape {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        if x == 0 || y == 0 || z == 0 {
            return Err(Error::InvalidShape([x, y, z]));
        }
        Ok(Shape { x, y, z })
    }

    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: Coord3) -> bool {
        c.x >= 0
            && c.y >= 0
            && c.z >= 0
            && (c.x as usize) < self.x
            && (c.y as usize) < self.y
            && (c.z as usize) < self.z
    }

    /// Flat index of an in-bounds coordinate.
    #[inline]
    pub fn index(&self, c: Coord3) -> usize {
        debug_assert!(self.contains(c));
        c.x as usize + self.x * (c.y as usize + self.y * c.z as usize)
    }

    #[inline]
    pub fn coord(&self, index: usize) -> Coord3 {
        let x = index % self.x;
        let rest = index / self.x;
        Coord3::new(x as i64, (rest % self.y) as i64, (rest / self.y) as i64)
    }

    /// Extents in file order `[Z, Y, X]`.
    pub fn zyx(&self) -> [usize; 3] {
        [self.z, self.y, self.x]
    }

    pub fn from_zyx([z, y, x]: [usize; 3]) -> Result<Self> {
        Shape::new(x, y, z)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// Dense instance labeling. Id 0 means "unassigned".
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    shape: Shape,
    data: Vec<u64>,
    /// Physical voxel size (x, y, z); informational only.
    pub resolution: Option<[f64; 3]>,
}

/// A segmentation is a label volume whose assigned voxels carry ids >= 1.
pub type Segmentation = LabelVolume;

impl LabelVolume {
    pub fn new(shape: Shape, data: Vec<u64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DimensionMismatch {
                expected: shape.len(),
                found: data.len(),
            });
        }
        Ok(LabelVolume {
            shape,
            data,
            resolution: None,
        })
    }

    pub fn filled(shape: Shape, label: u64) -> Self {
        LabelVolume {
            shape,
            data: vec![label; shape.len()],
            resolution: None,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u64> {
        self.data
    }

    /// Label at `c`, or `None` when out of bounds.
    pub fn get(&self, c: Coord3) -> Option<u64> {
        self.shape.contains(c).then(|| self.data[self.shape.index(c)])
    }

    pub fn max_label(&self) -> u64 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct non-zero ids.
    pub fn count_labels(&self) -> usize {
        let mut ids: Vec<u64> = self.data.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Odd window extents `(K_x, K_y, K_z)` of a central instance mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MaskWindow {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Default for MaskWindow {
    fn default() -> Self {
        MaskWindow { x: 7, y: 7, z: 5 }
    }
}

impl MaskWindow {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        if [x, y, z].iter().any(|&k| k == 0 || k % 2 == 0) {
            return Err(Error::InvalidWindow([x, y, z]));
        }
        Ok(MaskWindow { x, y, z })
    }

    /// Half-widths `(K_a - 1) / 2`.
    pub fn half(&self) -> Coord3 {
        Coord3::new(
            (self.x as i64 - 1) / 2,
            (self.y as i64 - 1) / 2,
            (self.z as i64 - 1) / 2,
        )
    }

    /// Number of window entries `D = K_x K_y K_z`.
    pub fn len(&self) -> usize {
        self.x * self.y * self.z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, n: Coord3) -> bool {
        let h = self.half();
        n.x.abs() <= h.x && n.y.abs() <= h.y && n.z.abs() <= h.z
    }

    /// Flat index of window offset `n`, (z, y, x) order with x fastest.
    #[inline]
    pub fn index(&self, n: Coord3) -> usize {
        debug_assert!(self.contains(n));
        let h = self.half();
        (n.x + h.x) as usize + self.x * ((n.y + h.y) as usize + self.y * (n.z + h.z) as usize)
    }

    #[inline]
    pub fn offset(&self, index: usize) -> Coord3 {
        let h = self.half();
        let x = (index % self.x) as i64;
        let rest = index / self.x;
        let y = (rest % self.y) as i64;
        let z = (rest / self.y) as i64;
        Coord3::new(x - h.x, y - h.y, z - h.z)
    }

    pub fn center_index(&self) -> usize {
        self.index(Coord3::ZERO)
    }

    /// Window extents in file order `[K_z, K_y, K_x]`.
    pub fn zyx(&self) -> [usize; 3] {
        [self.z, self.y, self.x]
    }

    pub fn from_zyx([z, y, x]: [usize; 3]) -> Result<Self> {
        MaskWindow::new(x, y, z)
    }
}

impl fmt::Display for MaskWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.x, self.y, self.z)
    }
}

/// Per-axis sampling stride of a mask. A stride of 4 corresponds to a
/// resolution of 1/4 along that axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Scale {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl Scale {
    pub const FULL: Scale = Scale { x: 1, y: 1, z: 1 };
    pub const QUARTER: Scale = Scale { x: 4, y: 4, z: 1 };
    pub const EIGHTH: Scale = Scale { x: 8, y: 8, z: 1 };
    pub const PRESETS: [Scale; 3] = [Scale::FULL, Scale::QUARTER, Scale::EIGHTH];

    pub fn new(x: u32, y: u32, z: u32) -> Result<Self> {
        if x == 0 || y == 0 || z == 0 {
            return Err(Error::InvalidScale([x, y, z]));
        }
        Ok(Scale { x, y, z })
    }

    pub fn zyx(&self) -> [u32; 3] {
        [self.z, self.y, self.x]
    }

    pub fn from_zyx([z, y, x]: [u32; 3]) -> Result<Self> {
        Scale::new(x, y, z)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Ordered list of edge offsets. The first `direct_count` offsets are
/// short-range, all others long-range.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffinityNeighborhood {
    offsets: Vec<Coord3>,
    direct_count: usize,
}

const LONG_RANGE_OFFSETS: [[i64; 3]; 16] = [
    [0, 0, -1],
    [-1, 0, 0],
    [0, -1, 0],
    [-4, 0, 0],
    [0, -4, 0],
    [-4, -4, 0],
    [4, -4, 0],
    [-4, 0, -1],
    [0, -4, -1],
    [-4, -4, -1],
    [4, -4, -1],
    [0, 0, -2],
    [-8, -8, 0],
    [8, -8, 0],
    [-12, 0, 0],
    [0, -12, 0],
];

const COMPACT: [[i64; 3]; 8] = [
    [0, 0, -1],
    [-1, 0, 0],
    [0, -1, 0],
    [-3, 0, 0],
    [0, -3, 0],
    [-3, -3, 0],
    [3, -3, 0],
    [0, 0, -2],
];

impl AffinityNeighborhood {
    pub fn new(offsets: Vec<Coord3>, direct_count: usize) -> Result<Self> {
        if direct_count > offsets.len() {
            return Err(Error::InvalidNeighborhood(format!(
                "direct_count {direct_count} exceeds {} offsets",
                offsets.len()
            )));
        }
        let mut seen = HashSet::with_capacity(offsets.len());
        for &o in &offsets {
            if o.is_zero() {
                return Err(Error::InvalidNeighborhood("zero offset".into()));
            }
            if !seen.insert(o) {
                return Err(Error::InvalidNeighborhood(format!("duplicate offset {o}")));
            }
        }
        Ok(AffinityNeighborhood {
            offsets,
            direct_count,
        })
    }

    /// The 16-offset grid-graph neighborhood used for partitioning, with the
    /// three direct neighbors as short-range edges.
    pub fn long_range() -> Self {
        AffinityNeighborhood {
            offsets: LONG_RANGE_OFFSETS.iter().map(|&o| o.into()).collect(),
            direct_count: 3,
        }
    }

    /// An 8-offset neighborhood whose offsets all fit inside the default
    /// 7x7x5 window at full resolution, so it can also be read directly off
    /// single masks.
    pub fn compact() -> Self {
        AffinityNeighborhood {
            offsets: COMPACT.iter().map(|&o| o.into()).collect(),
            direct_count: 3,
        }
    }

    pub fn offsets(&self) -> &[Coord3] {
        &self.offsets
    }

    pub fn direct_count(&self) -> usize {
        self.direct_count
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn is_long_range(&self, k: usize) -> bool {
        k >= self.direct_count
    }
}

/// Edge `{u, u + offsets[k]}` identified by its source voxel index and
/// offset index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeRef {
    pub source: usize,
    pub offset: usize,
}

/// All in-bounds edges in lexicographic (z, y, x, k) order.
pub fn enumerate_edges(shape: Shape, neighborhood: &AffinityNeighborhood) -> Vec<EdgeRef> {
    let mut edges = Vec::new();
    for source in 0..shape.len() {
        let u = shape.coord(source);
        for (offset, &o) in neighborhood.offsets().iter().enumerate() {
            if shape.contains(u + o) {
                edges.push(EdgeRef { source, offset });
            }
        }
    }
    edges
}

/// Closed-form number of in-bounds edges for a single offset.
pub fn edge_count_for_offset(shape: Shape, o: Coord3) -> usize {
    let span = |extent: usize, d: i64| extent.saturating_sub(d.unsigned_abs() as usize);
    span(shape.x, o.x) * span(shape.y, o.y) * span(shape.z, o.z)
}
