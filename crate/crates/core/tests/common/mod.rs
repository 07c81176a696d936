//! Independent brute-force reference implementations.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use maskaggr::masks::MaskProvider;
use maskaggr::partition::{GaspWeighting, SignedEdge, SignedGraph};
use maskaggr::volume::{enumerate_edges, AffinityNeighborhood, Coord3, MaskWindow, Scale, Shape};
use maskaggr::testing::RandomMaskProvider;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-pass weighted mean and population variance; `None` for zero weight.
pub fn two_pass(samples: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let w: f64 = samples.iter().map(|s| s.1).sum();
    if w <= 0.0 {
        return None;
    }
    let mean = samples.iter().map(|(a, wi)| a * wi).sum::<f64>() / w;
    let var = samples.iter().map(|(a, wi)| wi * (a - mean).powi(2)).sum::<f64>() / w;
    Some((mean, var, w))
}

/// Per-edge `(mean, variance, evidence)` by looping over every center and
/// scale and asking the provider directly.
pub fn brute_aggregate<P: MaskProvider>(
    provider: &P,
    shape: Shape,
    nb: &AffinityNeighborhood,
    window: MaskWindow,
    scales: &[Scale],
) -> Vec<Option<(f64, f64, f64)>> {
    let half = window.half();
    let local = |p: Coord3, c: Coord3, s: Scale| -> Option<usize> {
        let d = p - c;
        let (sx, sy, sz) = (i64::from(s.x), i64::from(s.y), i64::from(s.z));
        if d.x % sx != 0 || d.y % sy != 0 || d.z % sz != 0 {
            return None;
        }
        let n = Coord3::new(d.x / sx, d.y / sy, d.z / sz);
        if n.x.abs() > half.x || n.y.abs() > half.y || n.z.abs() > half.z {
            return None;
        }
        // x fastest, then y, then z
        let (kx, ky) = (2 * half.x + 1, 2 * half.y + 1);
        Some(((n.z + half.z) * ky * kx + (n.y + half.y) * kx + (n.x + half.x)) as usize)
    };
    let mut masks: HashMap<(usize, usize), Vec<f32>> = HashMap::new();
    for (si, &s) in scales.iter().enumerate() {
        for ci in 0..shape.len() {
            let m = provider.mask(shape.coord(ci), s).unwrap();
            masks.insert((si, ci), m.values().to_vec());
        }
    }
    enumerate_edges(shape, nb)
        .iter()
        .map(|e| {
            let u = shape.coord(e.source);
            let v = u + nb.offsets()[e.offset];
            let mut samples = Vec::new();
            for (si, &s) in scales.iter().enumerate() {
                for ci in 0..shape.len() {
                    let c = shape.coord(ci);
                    if let (Some(iu), Some(iv)) = (local(u, c, s), local(v, c, s)) {
                        let m = &masks[&(si, ci)];
                        let (mu, mv) = (f64::from(m[iu]), f64::from(m[iv]));
                        samples.push((mu.min(mv), mu.max(mv)));
                    }
                }
            }
            two_pass(&samples)
        })
        .collect()
}

/// Random fuzzy provider: volume up to 10x10x3, window up to (5,5,3), 1-3
/// scales, four random offsets.
pub fn random_instance(seed: u64) -> (RandomMaskProvider, AffinityNeighborhood, Vec<Scale>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = Shape::new(rng.random_range(1..=10), rng.random_range(1..=10), rng.random_range(1..=3)).unwrap();
    let odd = |rng: &mut ChaCha8Rng, max: usize| 2 * rng.random_range(0..=max / 2) + 1;
    let window = MaskWindow::new(odd(&mut rng, 5), odd(&mut rng, 5), odd(&mut rng, 3)).unwrap();
    let pool = [
        Scale::FULL,
        Scale::new(2, 2, 1).unwrap(),
        Scale::QUARTER,
        Scale::new(2, 1, 1).unwrap(),
        Scale::new(1, 1, 2).unwrap(),
    ];
    let mut scales = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let s = pool[rng.random_range(0..pool.len())];
        if !scales.contains(&s) {
            scales.push(s);
        }
    }
    let mut offsets = Vec::new();
    while offsets.len() < 4 {
        let o = Coord3::new(rng.random_range(-4..=4), rng.random_range(-4..=4), rng.random_range(-2..=2));
        if !o.is_zero() && !offsets.contains(&o) {
            offsets.push(o);
        }
    }
    let provider = RandomMaskProvider {
        shape,
        window,
        scales: scales.clone(),
        seed,
        zero_fraction: rng.random_range(0.0..0.5),
    };
    (provider, AffinityNeighborhood::new(offsets, 2).unwrap(), scales)
}

/// Relabels by first appearance so partitions compare with `==`.
pub fn canonical(labels: &[u64]) -> Vec<u64> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len() as u64 + 1;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

pub fn random_signed_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> SignedGraph {
    let n = rng.random_range(2..=max_nodes);
    let m = rng.random_range(1..=3 * n);
    let edges = (0..m)
        .filter_map(|_| {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            (u != v).then(|| SignedEdge {
                u,
                v,
                weight: rng.random_range(-1.0..1.0),
                evidence: rng.random_range(0.1..3.0),
            })
        })
        .collect();
    SignedGraph { num_nodes: n, edges }
}

/// Mutex Watershed with explicit cluster relabeling and mutex pairs stored
/// between cluster ids.
pub fn brute_mws(g: &SignedGraph) -> Vec<u64> {
    let mut cluster: Vec<usize> = (0..g.num_nodes).collect();
    let mut mutex: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut order: Vec<usize> = (0..g.edges.len()).filter(|&i| g.edges[i].weight != 0.0).collect();
    order.sort_by(|&a, &b| {
        g.edges[b]
            .weight
            .abs()
            .partial_cmp(&g.edges[a].weight.abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    for i in order {
        let e = g.edges[i];
        let (a, b) = (cluster[e.u], cluster[e.v]);
        if a == b {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if e.weight > 0.0 {
            if mutex.contains(&key) {
                continue;
            }
            for c in cluster.iter_mut() {
                if *c == b {
                    *c = a;
                }
            }
            mutex = mutex
                .into_iter()
                .map(|(x, y)| {
                    let (x, y) = (if x == b { a } else { x }, if y == b { a } else { y });
                    (x.min(y), x.max(y))
                })
                .collect();
        } else {
            mutex.insert(key);
        }
    }
    canonical(&cluster.iter().map(|&c| c as u64).collect::<Vec<_>>())
}

/// Average-linkage agglomeration recomputing every interaction from the
/// original edges at each step.
pub fn brute_gasp(g: &SignedGraph, weighting: GaspWeighting) -> Vec<u64> {
    let mut cluster: Vec<usize> = (0..g.num_nodes).collect();
    loop {
        let mut sums: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
        for e in &g.edges {
            let w = match weighting {
                GaspWeighting::Evidence => e.evidence,
                GaspWeighting::Unit => 1.0,
            };
            let (a, b) = (cluster[e.u], cluster[e.v]);
            if a != b && w > 0.0 {
                let s = sums.entry((a.min(b), a.max(b))).or_default();
                s.0 += w * e.weight;
                s.1 += w;
            }
        }
        let best = sums
            .iter()
            .map(|(&k, &(num, den))| (num / den, k))
            .fold(None, |best: Option<(f64, (usize, usize))>, cur| match best {
                Some(b) if b.0 >= cur.0 => Some(b),
                _ => Some(cur),
            });
        match best {
            Some((score, (a, b))) if score > 0.0 => cluster.iter_mut().filter(|c| **c == b).for_each(|c| *c = a),
            _ => break,
        }
    }
    canonical(&cluster.iter().map(|&c| c as u64).collect::<Vec<_>>())
}

/// `(voi_split, voi_merge, adapted_rand_error)` from a dense contingency
/// matrix and explicit pair counting.
pub fn dense_metrics(seg: &[u64], gt: &[u64]) -> (f64, f64, f64) {
    let n = seg.len();
    let index = |v: &[u64]| {
        let ids: Vec<u64> = v.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        v.iter().map(|l| ids.binary_search(l).unwrap()).collect::<Vec<_>>()
    };
    let (si, gi) = (index(seg), index(gt));
    let (ns, ng) = (si.iter().max().unwrap() + 1, gi.iter().max().unwrap() + 1);
    let mut p = vec![vec![0.0f64; ng]; ns];
    for (&a, &b) in si.iter().zip(&gi) {
        p[a][b] += 1.0 / n as f64;
    }
    let ps: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let pg: Vec<f64> = (0..ng).map(|j| p.iter().map(|r| r[j]).sum()).collect();
    let h = |v: &mut dyn Iterator<Item = f64>| -v.filter(|&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>();
    let h_joint = h(&mut p.iter().flatten().copied());
    let (h_s, h_g) = (h(&mut ps.iter().copied()), h(&mut pg.iter().copied()));

    let (mut both, mut same_s, mut same_g) = (0u64, 0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            let s = seg[i] == seg[j];
            let g = gt[i] == gt[j];
            both += u64::from(s && g);
            same_s += u64::from(s);
            same_g += u64::from(g);
        }
    }
    let precision = both as f64 / same_s as f64;
    let recall = both as f64 / same_g as f64;
    let f = 2.0 * precision * recall / (precision + recall);
    (h_joint - h_g, h_joint - h_s, 1.0 - f)
}
