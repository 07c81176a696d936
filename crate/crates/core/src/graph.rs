//! Signed pixel grid graph carrying aggregated affinity statistics per edge.

use crate::error::{Error, Result};
use crate::volume::{enumerate_edges, AffinityNeighborhood, EdgeRef, Shape};

/// Affinity mean, variance and evidence for one edge.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EdgeStats {
    pub mean: f32,
    pub variance: f32,
    pub evidence: f32,
}

impl EdgeStats {
    pub const INVALID: EdgeStats = EdgeStats {
        mean: 0.0,
        variance: 0.0,
        evidence: 0.0,
    };

    pub fn is_valid(&self) -> bool {
        self.evidence > 0.0
    }
}

/// Grid graph over a volume with one [`EdgeStats`] per in-bounds edge.
///
/// Edges are stored in [`enumerate_edges`] order. An edge is valid iff its
/// evidence is positive; invalid edges carry zero mean and variance.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedGridGraph {
    shape: Shape,
    neighborhood: AffinityNeighborhood,
    edges: Vec<EdgeRef>,
    stats: Vec<EdgeStats>,
}

impl SignedGridGraph {
    /// Builds a graph, checking the per-edge bounds
    /// `mean in [0, 1]`, `variance in [0, 0.25]`, `evidence >= 0`.
    pub fn new(shape: Shape, neighborhood: AffinityNeighborhood, stats: Vec<EdgeStats>) -> Result<Self> {
        let edges = enumerate_edges(shape, &neighborhood);
        if edges.len() != stats.len() {
            return Err(Error::DimensionMismatch {
                expected: edges.len(),
                found: stats.len(),
            });
        }
        for (i, s) in stats.iter().enumerate() {
            let ok = s.evidence >= 0.0
                && s.evidence.is_finite()
                && (0.0..=1.0).contains(&s.mean)
                && (0.0..=0.25).contains(&s.variance)
                && (s.is_valid() || (s.mean == 0.0 && s.variance == 0.0));
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "edge {i} has out-of-range statistics {s:?}"
                )));
            }
        }
        Ok(SignedGridGraph {
            shape,
            neighborhood,
            edges,
            stats,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn neighborhood(&self) -> &AffinityNeighborhood {
        &self.neighborhood
    }

    pub fn edges(&self) -> &[EdgeRef] {
        &self.edges
    }

    pub fn stats(&self) -> &[EdgeStats] {
        &self.stats
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.stats.iter().filter(|s| s.is_valid()).count()
    }

    /// Flat voxel indices of both endpoints of edge `i`.
    pub fn endpoints(&self, i: usize) -> (usize, usize) {
        let e = self.edges[i];
        let u = self.shape.coord(e.source);
        let v = u + self.neighborhood.offsets()[e.offset];
        (e.source, self.shape.index(v))
    }

    /// Dense `voxel * K + k -> edge index` table; `u32::MAX` for
    /// out-of-bounds pairs.
    pub fn edge_index_table(&self) -> Vec<u32> {
        let k = self.neighborhood.len();
        let mut table = vec![u32::MAX; self.shape.len() * k];
        for (i, e) in self.edges.iter().enumerate() {
            table[e.source * k + e.offset] = i as u32;
        }
        table
    }

    /// Mean variance over valid edges, 0 when none are valid.
    pub fn mean_variance(&self) -> f64 {
        let (sum, n) = self
            .stats
            .iter()
            .filter(|s| s.is_valid())
            .fold((0.0f64, 0usize), |(s, n), e| (s + f64::from(e.variance), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}
