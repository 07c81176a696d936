//! Synthetic providers for tests and benchmarks.

use crate::error::Result;
use crate::hash::{hash_words, unit_interval};
use crate::masks::{CentralInstanceMask, MaskProvider};
use crate::volume::{Coord3, MaskWindow, Scale, Shape};

/// Fuzzy masks with independent uniform values, hashed from
/// `(seed, center, scale, entry)`. The center entry is not forced to 1.
#[derive(Clone, Debug)]
pub struct RandomMaskProvider {
    pub shape: Shape,
    pub window: MaskWindow,
    pub scales: Vec<Scale>,
    pub seed: u64,
    /// Probability that an entry is exactly 0, to exercise zero-evidence
    /// contributions.
    pub zero_fraction: f64,
}

impl MaskProvider for RandomMaskProvider {
    fn shape(&self) -> Shape {
        self.shape
    }
    fn window(&self) -> MaskWindow {
        self.window
    }
    fn supported_scales(&self) -> Vec<Scale> {
        self.scales.clone()
    }
    fn mask(&self, center: Coord3, scale: Scale) -> Result<CentralInstanceMask> {
        self.check_scale(scale)?;
        let values = (0..self.window.len() as u64)
            .map(|i| {
                let h = hash_words(
                    self.seed,
                    &[
                        center.x as u64,
                        center.y as u64,
                        center.z as u64,
                        u64::from(scale.x),
                        u64::from(scale.y),
                        u64::from(scale.z),
                        i,
                    ],
                );
                if unit_interval(h) < self.zero_fraction {
                    0.0
                } else {
                    unit_interval(crate::hash::splitmix64(h)) as f32
                }
            })
            .collect();
        CentralInstanceMask::new(self.window, scale, values)
    }
}
