//! Bagged regression trees used as the BO surrogate. The spread of per-tree
//! predictions stands in for predictive uncertainty.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    pub min_samples_leaf: usize,
    /// Fraction of features considered at each split.
    pub max_features: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { trees: 50, min_samples_leaf: 3, max_features: 1.0 / 3.0 }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

struct Builder<'a, R: Rng + ?Sized> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: &'a ForestConfig,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize]) -> usize {
        let id = self.nodes.len();
        let n = idx.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        self.nodes.push(Node::Leaf(mean));

        let min_leaf = self.cfg.min_samples_leaf.max(1);
        if n < 2 * min_leaf || idx.iter().all(|&i| self.y[i] == self.y[idx[0]]) {
            return id;
        }
        let d = self.x[0].len();
        let k = ((self.cfg.max_features * d as f64).round() as usize).clamp(1, d);
        let features = index::sample(self.rng, d, k);

        // (gain-equivalent score, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        for f in features.iter() {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for split in 1..n {
                left_sum += self.y[idx[split - 1]];
                if split < min_leaf || n - split < min_leaf {
                    continue;
                }
                let (lo, hi) = (self.x[idx[split - 1]][f], self.x[idx[split]][f]);
                if lo == hi {
                    continue;
                }
                // Maximising sum^2/n on both sides minimises squared error.
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / split as f64 + right_sum * right_sum / (n - split) as f64;
                if best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, f, (lo + hi) / 2.0));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        idx.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
        let cut = idx.partition_point(|&i| self.x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(cut);
        let left = self.build(l);
        let right = self.build(r);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    /// Fits on rows `x` (all the same width) and targets `y`.
    pub fn fit<R: Rng + ?Sized>(x: &[Vec<f64>], y: &[f64], cfg: &ForestConfig, rng: &mut R) -> Forest {
        assert_eq!(x.len(), y.len());
        assert!(!x.is_empty(), "cannot fit on no data");
        let n = x.len();
        let trees = (0..cfg.trees.max(1))
            .map(|_| {
                let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let mut b = Builder { x, y, cfg, rng: &mut *rng, nodes: Vec::new() };
                b.build(&mut idx);
                Tree { nodes: b.nodes }
            })
            .collect();
        Forest { trees }
    }

    /// Mean and standard deviation of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        let m = preds.len() as f64;
        let mean = preds.iter().sum::<f64>() / m;
        let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / m;
        (mean, var.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn learns_a_step() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let cfg = ForestConfig { trees: 20, min_samples_leaf: 1, max_features: 1.0 };
        let f = Forest::fit(&x, &y, &cfg, &mut seeded(4));
        assert!(f.predict(&[2.0, 0.0]).0 < 0.2);
        assert!(f.predict(&[37.0, 1.0]).0 > 0.8);
    }

    #[test]
    fn constant_target_has_no_spread() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![3.0; 10];
        let f = Forest::fit(&x, &y, &ForestConfig::default(), &mut seeded(0));
        assert_eq!(f.predict(&[4.5]), (3.0, 0.0));
    }
}
