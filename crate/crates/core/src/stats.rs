/// Weighted online mean and population variance (West's incremental form of
/// Welford's update).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightedWelford {
    weight_sum: f64,
    mean: f64,
    m2: f64,
}

impl WeightedWelford {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` with non-negative `weight`. Zero weights are ignored.
    #[inline]
    pub fn push(&mut self, value: f64, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        self.weight_sum += weight;
        let delta = value - self.mean;
        self.mean += (weight / self.weight_sum) * delta;
        self.m2 += weight * delta * (value - self.mean);
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// Weighted mean; 0 when no weight has been seen.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `sum w (x - mean)^2 / sum w`, without Bessel correction.
    pub fn variance(&self) -> f64 {
        if self.weight_sum > 0.0 {
            (self.m2 / self.weight_sum).max(0.0)
        } else {
            0.0
        }
    }
}
