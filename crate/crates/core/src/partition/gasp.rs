//! Average-linkage agglomeration on a signed graph (GASP with average
//! linkage).
//!
//! The interaction between two clusters is the weighted mean of the signed
//! weights of all edges between them. The pair with the highest interaction
//! is merged until no pair has a positive interaction left.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{GaspWeighting, PartitionConfig, SignedGraph, UnionFind};
use crate::error::Result;
use crate::graph::SignedGridGraph;
use crate::volume::{LabelVolume, Segmentation};

/// Running sums `(sum of weight * signed, sum of weight)` for a cluster pair.
type PairStats = (f64, f64);

#[derive(Clone, Copy, Debug)]
struct Candidate {
    score: f64,
    a: usize,
    b: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // highest score first; among equal scores the smallest (a, b) pair
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

fn edge_weight(evidence: f64, weighting: GaspWeighting) -> f64 {
    match weighting {
        GaspWeighting::Evidence => evidence,
        GaspWeighting::Unit => 1.0,
    }
}

fn candidate(x: usize, y: usize, (num, den): PairStats) -> Candidate {
    Candidate {
        score: num / den,
        a: x.min(y),
        b: x.max(y),
    }
}

/// Cluster ids `1..=n` per node. Clusters are identified by their smallest
/// node id, which fixes the tie-breaking order.
pub fn gasp_average_labels(graph: &SignedGraph, weighting: GaspWeighting) -> Vec<u64> {
    let n = graph.num_nodes;
    let mut adj: Vec<BTreeMap<usize, PairStats>> = vec![BTreeMap::new(); n];
    for e in &graph.edges {
        let wt = edge_weight(e.evidence, weighting);
        if e.u == e.v || wt <= 0.0 {
            continue;
        }
        for (x, y) in [(e.u, e.v), (e.v, e.u)] {
            let s = adj[x].entry(y).or_insert((0.0, 0.0));
            s.0 += wt * e.weight;
            s.1 += wt;
        }
    }
    let mut heap: BinaryHeap<Candidate> = adj
        .iter()
        .enumerate()
        .flat_map(|(x, m)| m.range(x + 1..).map(move |(&y, &s)| candidate(x, y, s)))
        .collect();
    let mut alive = vec![true; n];
    let mut uf = UnionFind::new(n);

    while let Some(top) = heap.pop() {
        if !alive[top.a] || !alive[top.b] {
            continue;
        }
        let Some(&current) = adj[top.a].get(&top.b) else {
            continue;
        };
        if candidate(top.a, top.b, current).score.to_bits() != top.score.to_bits() {
            continue;
        }
        if top.score <= 0.0 {
            break;
        }
        let (keep, drop) = (top.a, top.b);
        let dropped = std::mem::take(&mut adj[drop]);
        adj[keep].remove(&drop);
        for (c, (num, den)) in dropped {
            if c == keep {
                continue;
            }
            adj[c].remove(&drop);
            let s = adj[keep].entry(c).or_insert((0.0, 0.0));
            s.0 += num;
            s.1 += den;
            let merged = *s;
            adj[c].insert(keep, merged);
        }
        alive[drop] = false;
        uf.union(keep, drop);
        for (&c, &s) in &adj[keep] {
            heap.push(candidate(keep, c, s));
        }
    }
    uf.labels()
}

/// Weighted mean interaction between every adjacent pair of clusters of
/// `labels`, keyed by `(smaller id, larger id)`.
pub fn gasp_interactions(graph: &SignedGraph, labels: &[u64], weighting: GaspWeighting) -> BTreeMap<(u64, u64), f64> {
    let mut sums: BTreeMap<(u64, u64), PairStats> = BTreeMap::new();
    for e in &graph.edges {
        let (a, b) = (labels[e.u], labels[e.v]);
        let wt = edge_weight(e.evidence, weighting);
        if a == b || wt <= 0.0 {
            continue;
        }
        let s = sums.entry((a.min(b), a.max(b))).or_insert((0.0, 0.0));
        s.0 += wt * e.weight;
        s.1 += wt;
    }
    sums.into_iter().map(|(k, (num, den))| (k, num / den)).collect()
}

/// Agglomerates a grid graph with the same edge selection and weight
/// transform as [`super::mutex_watershed`].
pub fn gasp_average(graph: &SignedGridGraph, cfg: &PartitionConfig) -> Result<Segmentation> {
    let signed = SignedGraph::from_grid(graph, cfg)?;
    LabelVolume::new(graph.shape(), gasp_average_labels(&signed, cfg.gasp_weighting))
}
