use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::graph::SignedGridGraph;
use crate::volume::Segmentation;

#[derive(Clone, Copy, Debug)]
struct Front {
    affinity: f32,
    seq: Reverse<u64>,
    target: usize,
    label: u64,
}

impl PartialEq for Front {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Front {}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Front {
    fn cmp(&self, other: &Self) -> Ordering {
        self.affinity
            .total_cmp(&other.affinity)
            .then(self.seq.cmp(&other.seq))
    }
}

/// Removes segments with fewer than `min_size` voxels and regrows the
/// surviving segments into the freed voxels.
///
/// Growth is a seeded watershed over the short-range edges of `graph`: the
/// unassigned voxel reachable across the strongest affinity is claimed
/// first. Invalid edges count as affinity 0. Voxels labeled 0 in `seg` are
/// treated as unassigned as well.
pub fn remove_small_segments(seg: &Segmentation, graph: &SignedGridGraph, min_size: usize) -> Result<Segmentation> {
    let shape = seg.shape();
    if graph.shape() != shape {
        return Err(Error::ShapeMismatch {
            expected: shape,
            found: graph.shape(),
        });
    }
    let mut sizes: HashMap<u64, usize> = HashMap::new();
    for &l in seg.data() {
        *sizes.entry(l).or_default() += 1;
    }
    let mut out = seg.clone();
    let mut unassigned = 0usize;
    for l in out.data_mut() {
        if *l == 0 || sizes[l] < min_size {
            *l = 0;
            unassigned += 1;
        }
    }
    if unassigned == 0 {
        return Ok(out);
    }
    if unassigned == shape.len() {
        return Err(Error::NoSeeds { min_size });
    }

    let nb = graph.neighborhood();
    let k_total = nb.len();
    let table = graph.edge_index_table();
    let stats = graph.stats();
    let affinity = |edge: u32| {
        let s = stats[edge as usize];
        if s.is_valid() {
            s.mean
        } else {
            0.0
        }
    };

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push_neighbors = |heap: &mut BinaryHeap<Front>, labels: &[u64], p: usize| {
        let c = shape.coord(p);
        let label = labels[p];
        for k in 0..nb.direct_count() {
            let o = nb.offsets()[k];
            // edge (p, k) reaches p + o; edge (p - o, k) reaches p - o
            for (q, edge) in [(c + o, p * k_total + k), (c - o, usize::MAX)] {
                if !shape.contains(q) {
                    continue;
                }
                let qi = shape.index(q);
                if labels[qi] != 0 {
                    continue;
                }
                let slot = if edge == usize::MAX { qi * k_total + k } else { edge };
                let e = table[slot];
                debug_assert_ne!(e, u32::MAX);
                heap.push(Front {
                    affinity: affinity(e),
                    seq: Reverse(seq),
                    target: qi,
                    label,
                });
                seq += 1;
            }
        }
    };

    for p in 0..shape.len() {
        if out.data()[p] != 0 {
            push_neighbors(&mut heap, out.data(), p);
        }
    }
    while let Some(f) = heap.pop() {
        if out.data()[f.target] != 0 {
            continue;
        }
        out.data_mut()[f.target] = f.label;
        unassigned -= 1;
        push_neighbors(&mut heap, out.data(), f.target);
    }
    if unassigned > 0 {
        return Err(Error::Unreachable { count: unassigned });
    }
    Ok(out)
}
