//! Signed graph partitioning and segment postprocessing.

mod gasp;
mod mws;
mod postprocess;
mod union_find;

use serde::{Deserialize, Serialize};

pub use gasp::{gasp_average, gasp_average_labels, gasp_interactions};
pub use mws::{mutex_watershed, mutex_watershed_labels, mutex_watershed_traced, MwsEvent};
pub use postprocess::remove_small_segments;
pub use union_find::UnionFind;

use crate::error::{Error, Result};
use crate::graph::SignedGridGraph;
use crate::hash::{hash_words, unit_interval};

/// How inter-cluster edges are weighted when averaging in GASP.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaspWeighting {
    /// Each edge counts with its aggregated evidence.
    #[default]
    Evidence,
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionConfig {
    /// Fraction of valid long-range edges kept in the graph.
    pub long_range_fraction: f64,
    pub subsample_seed: u64,
    /// Segments with fewer voxels are removed in postprocessing.
    pub min_segment_size: usize,
    pub gasp_weighting: GaspWeighting,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            long_range_fraction: 0.10,
            subsample_seed: 0,
            min_segment_size: 200,
            gasp_weighting: GaspWeighting::Evidence,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.long_range_fraction) {
            return Err(Error::InvalidArgument(format!(
                "long_range_fraction {} outside [0, 1]",
                self.long_range_fraction
            )));
        }
        Ok(())
    }
}

/// Additive transform from affinity to signed weight.
#[inline]
pub fn signed_weight(affinity: f32) -> f64 {
    f64::from(affinity) - 0.5
}

/// Whether long-range edge `(source, k)` survives subsampling. The choice is
/// a pure function of the seed and the edge identity.
pub fn keep_long_range(seed: u64, source: usize, k: usize, fraction: f64) -> bool {
    unit_interval(hash_words(seed, &[source as u64, k as u64])) < fraction
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignedEdge {
    pub u: usize,
    pub v: usize,
    /// Attractive if positive, repulsive if negative.
    pub weight: f64,
    pub evidence: f64,
}

/// Generic signed graph; edge order is the canonical tie-breaking order.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedGraph {
    pub num_nodes: usize,
    pub edges: Vec<SignedEdge>,
}

impl SignedGraph {
    /// Valid grid edges after long-range subsampling, with weights `a - 0.5`.
    pub fn from_grid(graph: &SignedGridGraph, cfg: &PartitionConfig) -> Result<Self> {
        cfg.validate()?;
        if graph.valid_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        let nb = graph.neighborhood();
        let edges = graph
            .edges()
            .iter()
            .zip(graph.stats())
            .enumerate()
            .filter(|(_, (e, s))| {
                s.is_valid()
                    && (!nb.is_long_range(e.offset)
                        || keep_long_range(cfg.subsample_seed, e.source, e.offset, cfg.long_range_fraction))
            })
            .map(|(i, (_, s))| {
                let (u, v) = graph.endpoints(i);
                SignedEdge {
                    u,
                    v,
                    weight: signed_weight(s.mean),
                    evidence: f64::from(s.evidence),
                }
            })
            .collect();
        Ok(SignedGraph {
            num_nodes: graph.shape().len(),
            edges,
        })
    }
}
