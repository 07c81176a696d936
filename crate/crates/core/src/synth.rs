//! Seeded synthetic ground truth: anisotropic Voronoi label volumes.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Coord3, LabelVolume, Shape};

/// Per-axis weights of the distance metric. Large `z` makes instances thin
/// across sections, like neurites in anisotropic EM stacks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anisotropy {
    pub z: f64,
    pub y: f64,
    pub x: f64,
}

impl Default for Anisotropy {
    fn default() -> Self {
        Anisotropy { z: 10.0, y: 1.0, x: 1.0 }
    }
}

const NEIGHBORS_6: [Coord3; 6] = [
    Coord3::new(-1, 0, 0),
    Coord3::new(1, 0, 0),
    Coord3::new(0, -1, 0),
    Coord3::new(0, 1, 0),
    Coord3::new(0, 0, -1),
    Coord3::new(0, 0, 1),
];

/// Labels `1..=num_instances`, each voxel taking the label of its nearest
/// seed under `sqrt((ax dx)^2 + (ay dy)^2 + (az dz)^2)`, distance ties going
/// to the lower seed index.
///
/// Digital Voronoi cells can in rare cases split into several 6-connected
/// pieces; pieces not containing their seed are handed to the adjacent cell
/// they touch first in breadth-first order, so every label is connected.
pub fn generate_labels(shape: Shape, num_instances: usize, anisotropy: Anisotropy, seed: u64) -> Result<LabelVolume> {
    if num_instances == 0 {
        return Err(Error::InvalidArgument("num_instances must be at least 1".into()));
    }
    if num_instances > shape.len() {
        return Err(Error::InvalidArgument(format!(
            "{num_instances} instances do not fit into {} voxels",
            shape.len()
        )));
    }
    let weights = [anisotropy.x, anisotropy.y, anisotropy.z];
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument(format!("anisotropy weights must be positive, got {anisotropy:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<usize> = rand::seq::index::sample(&mut rng, shape.len(), num_instances).into_vec();
    let seed_coords: Vec<Coord3> = seeds.iter().map(|&i| shape.coord(i)).collect();

    let mut labels: Vec<u64> = (0..shape.len())
        .into_par_iter()
        .map(|i| {
            let p = shape.coord(i);
            let mut best = (f64::INFINITY, 0usize);
            for (k, s) in seed_coords.iter().enumerate() {
                let d = p - *s;
                let dist = (weights[0] * d.x as f64).powi(2)
                    + (weights[1] * d.y as f64).powi(2)
                    + (weights[2] * d.z as f64).powi(2);
                if dist < best.0 {
                    best = (dist, k);
                }
            }
            best.1 as u64 + 1
        })
        .collect();

    make_connected(shape, &mut labels, &seeds);
    LabelVolume::new(shape, labels)
}

fn make_connected(shape: Shape, labels: &mut [u64], seeds: &[usize]) {
    let mut reached = vec![false; labels.len()];
    let mut queue = VecDeque::new();
    for &s in seeds {
        reached[s] = true;
        queue.push_back(s);
    }
    while let Some(p) = queue.pop_front() {
        let c = shape.coord(p);
        for d in NEIGHBORS_6 {
            let q = c + d;
            if shape.contains(q) {
                let qi = shape.index(q);
                if !reached[qi] && labels[qi] == labels[p] {
                    reached[qi] = true;
                    queue.push_back(qi);
                }
            }
        }
    }
    if reached.iter().all(|&r| r) {
        return;
    }
    queue.extend((0..labels.len()).filter(|&i| reached[i]));
    while let Some(p) = queue.pop_front() {
        let c = shape.coord(p);
        for d in NEIGHBORS_6 {
            let q = c + d;
            if shape.contains(q) {
                let qi = shape.index(q);
                if !reached[qi] {
                    reached[qi] = true;
                    labels[qi] = labels[p];
                    queue.push_back(qi);
                }
            }
        }
    }
}

/// Number of 6-connected components of each label, indexed by label id.
pub fn component_counts(volume: &LabelVolume) -> std::collections::BTreeMap<u64, usize> {
    let shape = volume.shape();
    let data = volume.data();
    let mut seen = vec![false; data.len()];
    let mut counts = std::collections::BTreeMap::new();
    let mut queue = VecDeque::new();
    for start in 0..data.len() {
        if seen[start] {
            continue;
        }
        *counts.entry(data[start]).or_insert(0) += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let c = shape.coord(p);
            for d in NEIGHBORS_6 {
                let q = c + d;
                if shape.contains(q) {
                    let qi = shape.index(q);
                    if !seen[qi] && data[qi] == data[p] {
                        seen[qi] = true;
                        queue.push_back(qi);
                    }
                }
            }
        }
    }
    counts
}
