//! CART classification trees with weighted Gini impurity.

use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};

use crate::data::{Sample, CHANNELS, FALL};
use crate::seed::Rng;

/// Features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    pub const ALL: [MaxFeatures; 3] = [MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::All];

    /// Number of features drawn per split out of `n`, at least one.
    pub fn count(self, n: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (n as f64).log2().floor() as usize,
            MaxFeatures::All => n,
        };
        k.clamp(1, n)
    }

    pub fn code(self) -> u8 {
        match self {
            MaxFeatures::Sqrt => 0,
            MaxFeatures::Log2 => 1,
            MaxFeatures::All => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// `score` is the weighted fraction of fall samples that reached the leaf.
    Leaf { score: f64 },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u8,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

/// A fitted tree stored as a flat node list; node 0 is the root and every
/// child index is larger than its parent's.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn score(&self, x: &Sample) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { score } => return score,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature as usize] <= threshold { left } else { right } as usize,
            }
        }
    }

    /// Hard class: fall iff the leaf's fall fraction exceeds one half.
    pub fn predict(&self, x: &Sample) -> u8 {
        u8::from(self.score(x) > 0.5)
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left as usize).max(walk(nodes, right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Checks the structural invariants a loaded tree must satisfy.
    pub fn check(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { score } if !(0.0..=1.0).contains(&score) => {
                    return Err(format!("leaf {i} score {score} outside [0, 1]"))
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature as usize >= CHANNELS || !threshold.is_finite() {
                        return Err(format!("node {i} has an invalid split"));
                    }
                    for c in [left, right] {
                        if c as usize <= i || c as usize >= self.nodes.len() {
                            return Err(format!("node {i} points to child {c}"));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub max_features: MaxFeatures,
}

struct Builder<'a> {
    x: &'a [Sample],
    y: &'a [u8],
    w: &'a [f64],
    config: TreeConfig,
    nodes: Vec<Node>,
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn weights(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(pos, tot), &r| {
            let w = self.w[r];
            (pos + if self.y[r] == FALL { w } else { 0.0 }, tot + w)
        })
    }

    /// Best (feature, threshold, impurity decrease) over the sampled features.
    fn best_split(&self, rows: &mut [usize], pos: f64, total: f64, rng: &mut Rng) -> Option<(usize, f64)> {
        let k = self.config.max_features.count(CHANNELS);
        let mut features: Vec<usize> = sample_indices(rng, CHANNELS, k).into_vec();
        features.sort_unstable();
        let parent = gini(pos, total) * total;
        let mut best: Option<(usize, f64, f64)> = None;
        for &f in &features {
            rows.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut lpos, mut ltot) = (0.0, 0.0);
            for i in 0..rows.len() - 1 {
                let r = rows[i];
                ltot += self.w[r];
                if self.y[r] == FALL {
                    lpos += self.w[r];
                }
                let (a, b) = (self.x[r][f], self.x[rows[i + 1]][f]);
                if a == b {
                    continue;
                }
                let child = gini(lpos, ltot) * ltot + gini(pos - lpos, total - ltot) * (total - ltot);
                let gain = parent - child;
                if gain > 1e-12 * total.max(1e-300) && best.is_none_or(|(_, _, g)| gain > g) {
                    let mid = a + (b - a) / 2.0;
                    // Guard against the midpoint rounding up to `b`.
                    let threshold = if mid < b { mid } else { a };
                    best = Some((f, threshold, gain));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> u32 {
        let id = self.nodes.len();
        let (pos, total) = self.weights(rows);
        let score = if total > 0.0 {
            (pos / total).clamp(0.0, 1.0)
        } else {
            0.0
        };
        self.nodes.push(Node::Leaf { score });
        let pure = pos <= 0.0 || pos >= total;
        if depth >= self.config.max_depth || rows.len() < 2 || pure {
            return id as u32;
        }
        let Some((feature, threshold)) = self.best_split(rows, pos, total, rng) else {
            return id as u32;
        };
        let split_at = partition(rows, |r| self.x[r][feature] <= threshold);
        let (left_rows, right_rows) = rows.split_at_mut(split_at);
        left_rows.sort_unstable();
        right_rows.sort_unstable();
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: feature as u8,
            threshold,
            left,
            right,
        };
        id as u32
    }
}

/// Moves rows satisfying `pred` to the front, returning how many there are.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(i, k);
            k += 1;
        }
    }
    k
}

/// Fits a tree on the rows listed in `rows`, weighting row `r` by `w[r]`.
pub fn fit_tree(x: &[Sample], y: &[u8], w: &[f64], rows: &[usize], config: TreeConfig, rng: &mut Rng) -> Tree {
    let mut builder = Builder {
        x,
        y,
        w,
        config,
        nodes: Vec::new(),
    };
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    builder.grow(&mut rows, 0, rng);
    Tree { nodes: builder.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn toy() -> (Vec<Sample>, Vec<u8>) {
        let x: Vec<Sample> = (0..20).map(|i| [i as f64, 0.0, 1.0, -(i as f64), 5.0, 2.0]).collect();
        let y = (0..20).map(|i| u8::from(i >= 13)).collect();
        (x, y)
    }

    #[test]
    fn stump_separates_axis_aligned_classes() {
        let (x, y) = toy();
        let w = vec![1.0; 20];
        let rows: Vec<usize> = (0..20).collect();
        let cfg = TreeConfig {
            max_depth: 1,
            max_features: MaxFeatures::All,
        };
        let tree = fit_tree(&x, &y, &w, &rows, cfg, &mut seed::rng(0));
        assert_eq!(tree.depth(), 1);
        assert!(x.iter().zip(&y).all(|(s, &l)| tree.predict(s) == l));
        match tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 12.5);
            }
            _ => panic!("root should split"),
        }
        tree.check().unwrap();
    }

    #[test]
    fn depth_limit_respected() {
        let x: Vec<Sample> = (0..64)
            .map(|i| [(i * 7 % 64) as f64, (i % 5) as f64, 0.0, 0.0, 0.0, 0.0])
            .collect();
        let y: Vec<u8> = (0..64).map(|i| (i % 2) as u8).collect();
        let rows: Vec<usize> = (0..64).collect();
        for depth in 1..6 {
            let cfg = TreeConfig {
                max_depth: depth,
                max_features: MaxFeatures::All,
            };
            let t = fit_tree(&x, &y, &vec![1.0; 64], &rows, cfg, &mut seed::rng(1));
            assert!(t.depth() <= depth);
        }
    }

    #[test]
    fn feature_counts() {
        assert_eq!(MaxFeatures::Sqrt.count(6), 2);
        assert_eq!(MaxFeatures::Log2.count(6), 2);
        assert_eq!(MaxFeatures::All.count(6), 6);
        assert_eq!(MaxFeatures::Log2.count(1), 1);
    }
}
