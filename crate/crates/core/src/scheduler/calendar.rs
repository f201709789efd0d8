use std::ops::Range;

use crate::dispatch::HorizonConfig;

/// Step-index sets of one decision instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizonIndices {
    /// Committed delay horizon `k .. k + n_D`.
    pub delay: Range<usize>,
    /// Optimization horizon `k + n_D .. k + n_P`.
    pub optimization: Range<usize>,
    /// Whole prediction horizon `k .. k + n_P`.
    pub prediction: Range<usize>,
}

pub fn horizon_indices(k: usize, horizon: &HorizonConfig) -> HorizonIndices {
    let d = k + horizon.n_d();
    let p = k + horizon.n_p();
    HorizonIndices {
        delay: k..d,
        optimization: d..p,
        prediction: k..p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_calendar() {
        let h = HorizonConfig::default();
        let idx = horizon_indices(0, &h);
        assert_eq!(idx.delay, 0..8);
        assert_eq!(idx.optimization, 8..56);
        assert_eq!(idx.prediction.len(), 56);
        assert_eq!(horizon_indices(300, &h).prediction.len(), 56);
    }

    #[test]
    fn zero_delay() {
        let h = HorizonConfig {
            delay: 0.0,
            ..Default::default()
        };
        let idx = horizon_indices(5, &h);
        assert!(idx.delay.is_empty());
        assert_eq!(idx.optimization.start, 5);
    }
}
