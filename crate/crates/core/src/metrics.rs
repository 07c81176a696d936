//! Segmentation quality metrics: variation of information, adapted Rand
//! error, their geometric mean (CREMI score), and the fuzzy Dice
//! coefficient for masks.
//!
//! Entropies are in nats. All metrics depend only on the contingency table
//! and are therefore invariant to relabeling either input.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::CentralInstanceMask;
use crate::volume::LabelVolume;

/// Sparse joint counts of (segmentation id, ground-truth id).
#[derive(Clone, Debug)]
pub struct Contingency {
    pub total: u64,
    pub joint: HashMap<(u64, u64), u64>,
    pub seg_sizes: HashMap<u64, u64>,
    pub gt_sizes: HashMap<u64, u64>,
}

impl Contingency {
    pub fn new(seg: &LabelVolume, gt: &LabelVolume) -> Result<Self> {
        if seg.shape() != gt.shape() {
            return Err(Error::ShapeMismatch {
                expected: gt.shape(),
                found: seg.shape(),
            });
        }
        Ok(Self::from_labels(seg.data(), gt.data()))
    }

    pub fn from_labels(seg: &[u64], gt: &[u64]) -> Self {
        debug_assert_eq!(seg.len(), gt.len());
        let mut joint = HashMap::new();
        let mut seg_sizes = HashMap::new();
        let mut gt_sizes = HashMap::new();
        for (&s, &g) in seg.iter().zip(gt) {
            *joint.entry((s, g)).or_insert(0) += 1;
            *seg_sizes.entry(s).or_insert(0) += 1;
            *gt_sizes.entry(g).or_insert(0) += 1;
        }
        Contingency {
            total: seg.len() as u64,
            joint,
            seg_sizes,
            gt_sizes,
        }
    }

    /// `(H(seg | gt), H(gt | seg))`.
    pub fn voi(&self) -> (f64, f64) {
        let n = self.total as f64;
        let mut split = 0.0;
        let mut merge = 0.0;
        // sort for a reproducible summation order
        let mut cells: Vec<_> = self.joint.iter().collect();
        cells.sort_unstable_by_key(|(k, _)| **k);
        for (&(s, g), &c) in cells {
            let p = c as f64 / n;
            split -= p * (c as f64 / self.gt_sizes[&g] as f64).ln();
            merge -= p * (c as f64 / self.seg_sizes[&s] as f64).ln();
        }
        (split.max(0.0), merge.max(0.0))
    }

    pub fn adapted_rand_error(&self) -> f64 {
        fn sq<'a>(counts: impl Iterator<Item = &'a u64>) -> f64 {
            counts.map(|&c| (c as f64) * (c as f64)).sum()
        }
        let sum_joint = sq(self.joint.values());
        let precision = sum_joint / sq(self.seg_sizes.values());
        let recall = sum_joint / sq(self.gt_sizes.values());
        (1.0 - 2.0 * precision * recall / (precision + recall)).max(0.0)
    }
}

/// `(voi_split, voi_merge)`.
pub fn voi(seg: &LabelVolume, gt: &LabelVolume) -> Result<(f64, f64)> {
    Ok(Contingency::new(seg, gt)?.voi())
}

pub fn adapted_rand_error(seg: &LabelVolume, gt: &LabelVolume) -> Result<f64> {
    Ok(Contingency::new(seg, gt)?.adapted_rand_error())
}

/// `sqrt((voi_split + voi_merge) * adapted_rand_error)`.
pub fn cremi_score(seg: &LabelVolume, gt: &LabelVolume) -> Result<f64> {
    Ok(Evaluation::new(seg, gt)?.cremi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub voi_split: f64,
    pub voi_merge: f64,
    pub arand: f64,
    pub cremi: f64,
}

impl Evaluation {
    pub fn new(seg: &LabelVolume, gt: &LabelVolume) -> Result<Self> {
        let table = Contingency::new(seg, gt)?;
        let (voi_split, voi_merge) = table.voi();
        let arand = table.adapted_rand_error();
        Ok(Evaluation {
            voi_split,
            voi_merge,
            arand,
            cremi: ((voi_split + voi_merge) * arand).sqrt(),
        })
    }

    pub fn voi_sum(&self) -> f64 {
        self.voi_split + self.voi_merge
    }
}

/// `2 sum(p t) / (sum p^2 + sum t^2)`, defined as 1 for two empty masks.
pub fn fuzzy_dice(p: &CentralInstanceMask, t: &CentralInstanceMask) -> Result<f64> {
    if p.window() != t.window() {
        return Err(Error::WindowMismatch {
            expected: t.window(),
            found: p.window(),
        });
    }
    Ok(fuzzy_dice_values(p.values(), t.values()))
}

pub fn fuzzy_dice_values(p: &[f32], t: &[f32]) -> f64 {
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (&a, &b) in p.iter().zip(t) {
        let (a, b) = (f64::from(a), f64::from(b));
        num += a * b;
        den += a * a + b * b;
    }
    if den == 0.0 {
        1.0
    } else {
        2.0 * num / den
    }
}
