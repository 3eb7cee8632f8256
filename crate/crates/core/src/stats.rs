use serde::{Deserialize, Serialize};

/// Welford running mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    /// Sample variance; needs at least two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.count > 1).then(|| self.m2 / (self.count - 1) as f64)
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        iter.into_iter().for_each(|x| s.push(x));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn undefined_below_two() {
        let mut s = RunningStats::new();
        assert_eq!(s.mean(), None);
        s.push(3.0);
        assert_eq!(s.mean(), Some(3.0));
        assert_eq!(s.variance(), None);
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in proptest::collection::vec(-1e6..1e6f64, 2..200)) {
            let s: RunningStats = xs.iter().copied().collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
            prop_assert!(rel(s.mean().unwrap(), mean) < 1e-9 || (s.mean().unwrap() - mean).abs() < 1e-6);
            prop_assert!(rel(s.variance().unwrap(), var) < 1e-9 || var == 0.0);
        }
    }
}
