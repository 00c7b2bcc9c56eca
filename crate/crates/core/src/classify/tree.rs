//! CART decision trees with Gini impurity over `f32` features.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::featurize::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: u32,
        threshold: f32,
        left: u32,
        right: u32,
    },
    /// Fraction of class-1 training samples that reached the leaf.
    Leaf { p1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: usize,
}

/// Nodes are stored flat; the root is node 0 and children always follow
/// their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Checks the structural invariants a loaded tree must satisfy.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let ok = (feature as usize) < n_features
                        && !threshold.is_nan()
                        && left as usize > i
                        && right as usize > i
                        && (left as usize) < nodes.len()
                        && (right as usize) < nodes.len();
                    if !ok {
                        return None;
                    }
                }
                Node::Leaf { p1 } => {
                    if !(0.0..=1.0).contains(&p1) {
                        return None;
                    }
                }
            }
        }
        Some(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + go(nodes, left as usize).max(go(nodes, right as usize))
                }
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict_row(&self, x: &[f32]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { p1 } => return p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f32,
    impurity: f64,
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    y: &'a [u8],
    params: TreeParams,
    nodes: Vec<Node>,
    features: Vec<usize>,
    sorted: Vec<(f32, u8)>,
}

/// Fits one tree on the rows listed in `sample` (repeats allowed).
pub fn fit_tree<R: Rng>(
    x: &FeatureMatrix,
    y: &[u8],
    sample: Vec<u32>,
    params: TreeParams,
    rng: &mut R,
) -> DecisionTree {
    assert!(!sample.is_empty(), "cannot fit a tree on zero samples");
    let mut b = Builder {
        x,
        y,
        params,
        nodes: Vec::new(),
        features: (0..x.cols()).collect(),
        sorted: Vec::with_capacity(sample.len()),
    };
    b.grow(sample, rng);
    DecisionTree { nodes: b.nodes }
}

fn gini_weighted(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (n0 as f64 / n, n1 as f64 / n);
    n * (1.0 - p0 * p0 - p1 * p1)
}

impl Builder<'_> {
    fn grow<R: Rng>(&mut self, root: Vec<u32>, rng: &mut R) {
        // (node slot, sample indices, depth)
        self.nodes.push(Node::Leaf { p1: 0.0 });
        let mut stack = vec![(0usize, root, 0usize)];
        while let Some((slot, idx, depth)) = stack.pop() {
            let n1 = idx.iter().filter(|i| self.y[**i as usize] == 1).count();
            let n0 = idx.len() - n1;
            let leaf = Node::Leaf {
                p1: n1 as f64 / idx.len() as f64,
            };
            let can_split = n0 > 0
                && n1 > 0
                && self.params.max_depth.is_none_or(|m| depth < m)
                && idx.len() >= 2 * self.params.min_samples_leaf;
            let best = if can_split {
                self.best_split(&idx, n0, n1, rng)
            } else {
                None
            };
            let Some(best) = best else {
                self.nodes[slot] = leaf;
                continue;
            };
            let (left, right): (Vec<u32>, Vec<u32>) = idx
                .iter()
                .partition(|i| self.x.row(**i as usize)[best.feature] <= best.threshold);
            debug_assert!(!left.is_empty() && !right.is_empty());
            let l = self.nodes.len();
            self.nodes.push(Node::Leaf { p1: 0.0 });
            self.nodes.push(Node::Leaf { p1: 0.0 });
            self.nodes[slot] = Node::Split {
                feature: best.feature as u32,
                threshold: best.threshold,
                left: l as u32,
                right: l as u32 + 1,
            };
            stack.push((l + 1, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
    }

    /// Tries features in random order until `max_features` non-constant ones
    /// have been evaluated; if none of those admits a valid split, keeps going
    /// through the remaining features.
    fn best_split<R: Rng>(
        &mut self,
        idx: &[u32],
        n0: usize,
        n1: usize,
        rng: &mut R,
    ) -> Option<BestSplit> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        self.features.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        let mut evaluated = 0;
        for fi in 0..self.features.len() {
            if evaluated >= self.params.max_features && best.is_some() {
                break;
            }
            let f = self.features[fi];
            self.sorted.clear();
            self.sorted.extend(
                idx.iter()
                    .map(|i| (self.x.row(*i as usize)[f], self.y[*i as usize])),
            );
            self.sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let (lo, hi) = (self.sorted[0].0, self.sorted[self.sorted.len() - 1].0);
            if lo == hi {
                continue;
            }
            evaluated += 1;
            let n = self.sorted.len();
            let (mut l0, mut l1) = (0usize, 0usize);
            for k in 1..n {
                if self.sorted[k - 1].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (a, b) = (self.sorted[k - 1].0, self.sorted[k].0);
                if a == b {
                    continue;
                }
                let imp = gini_weighted(l0, l1) + gini_weighted(n0 - l0, n1 - l1);
                if best.as_ref().is_none_or(|bs| imp < bs.impurity) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: midpoint(a, b),
                        impurity: imp,
                    });
                }
            }
        }
        best
    }
}

/// A threshold `t` with `a <= t < b`.
fn midpoint(a: f32, b: f32) -> f32 {
    let m = ((f64::from(a) + f64::from(b)) / 2.0) as f32;
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}
