//! Mutex Watershed: greedy partitioning of a graph with attractive and
//! repulsive edges, processed by decreasing weight magnitude.

use std::collections::HashSet;

use rayon::prelude::*;

use super::{PartitionConfig, SignedGraph, UnionFind};
use crate::error::Result;
use crate::graph::SignedGridGraph;
use crate::volume::{LabelVolume, Segmentation};

/// Action taken for one edge, reported by node ids of the edge endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MwsEvent {
    Merge { u: usize, v: usize },
    Mutex { u: usize, v: usize },
}

/// Edge indices with nonzero weight, sorted by decreasing `|w|`, ties by
/// canonical index.
fn processing_order(graph: &SignedGraph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.edges.len())
        .filter(|&i| graph.edges[i].weight != 0.0)
        .collect();
    order.par_sort_unstable_by(|&a, &b| {
        let (wa, wb) = (graph.edges[a].weight.abs(), graph.edges[b].weight.abs());
        wb.total_cmp(&wa).then(a.cmp(&b))
    });
    order
}

fn run(graph: &SignedGraph, mut trace: Option<&mut Vec<MwsEvent>>) -> Vec<u64> {
    let mut uf = UnionFind::new(graph.num_nodes);
    // mutex partners per cluster root; partners are always roots
    let mut mutex: Vec<HashSet<usize>> = vec![HashSet::new(); graph.num_nodes];
    for i in processing_order(graph) {
        let e = graph.edges[i];
        let (ru, rv) = (uf.find(e.u), uf.find(e.v));
        if ru == rv {
            continue;
        }
        if e.weight > 0.0 {
            if mutex[ru].contains(&rv) {
                continue;
            }
            let (root, gone) = uf.union_roots(ru, rv);
            for p in std::mem::take(&mut mutex[gone]) {
                mutex[p].remove(&gone);
                mutex[p].insert(root);
                mutex[root].insert(p);
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(MwsEvent::Merge { u: e.u, v: e.v });
            }
        } else {
            mutex[ru].insert(rv);
            mutex[rv].insert(ru);
            if let Some(t) = trace.as_deref_mut() {
                t.push(MwsEvent::Mutex { u: e.u, v: e.v });
            }
        }
    }
    uf.labels()
}

/// Cluster ids `1..=n` per node.
pub fn mutex_watershed_labels(graph: &SignedGraph) -> Vec<u64> {
    run(graph, None)
}

/// Like [`mutex_watershed_labels`], also returning every merge and mutex
/// decision in processing order.
pub fn mutex_watershed_traced(graph: &SignedGraph) -> (Vec<u64>, Vec<MwsEvent>) {
    let mut trace = Vec::new();
    let labels = run(graph, Some(&mut trace));
    (labels, trace)
}

/// Partitions a grid graph. Short-range edges are always used; long-range
/// edges are subsampled according to `cfg`.
pub fn mutex_watershed(graph: &SignedGridGraph, cfg: &PartitionConfig) -> Result<Segmentation> {
    let signed = SignedGraph::from_grid(graph, cfg)?;
    LabelVolume::new(graph.shape(), mutex_watershed_labels(&signed))
}
