use serde::{Deserialize, Serialize};

use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Least-squares regression tree stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
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

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Gradient boosting with squared loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub dim: usize,
}

impl GbmModel {
    pub fn fit(
        x: &[&[f64]],
        y: &[f64],
        n_trees: usize,
        learning_rate: f64,
        params: TreeParams,
        exec: Execution,
    ) -> Self {
        let n = y.len();
        let d = x[0].len();
        let base = y.iter().sum::<f64>() / n as f64;
        // row indices sorted by each feature, computed once per fit
        let sorted: Vec<Vec<usize>> = par::map_range(exec, d, |j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]).then(a.cmp(&b)));
            idx
        });
        let mut pred = vec![base; n];
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let residual: Vec<f64> = y.iter().zip(&pred).map(|(t, p)| t - p).collect();
            let tree = TreeBuilder { x, residual: &residual, sorted: &sorted, params, exec }.build();
            for (p, row) in pred.iter_mut().zip(x) {
                *p += learning_rate * tree.predict(row);
            }
            trees.push(tree);
        }
        GbmModel { base, learning_rate, trees, dim: d }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| self.learning_rate * t.predict(x)).sum::<f64>()
    }
}

struct TreeBuilder<'a> {
    x: &'a [&'a [f64]],
    residual: &'a [f64],
    sorted: &'a [Vec<usize>],
    params: TreeParams,
    exec: Execution,
}

impl TreeBuilder<'_> {
    fn build(&self) -> Tree {
        let mut nodes = Vec::new();
        let mut member = vec![false; self.residual.len()];
        let all: Vec<usize> = (0..self.residual.len()).collect();
        self.grow(&mut nodes, &all, &mut member, 0);
        Tree { nodes }
    }

    fn grow(&self, nodes: &mut Vec<Node>, rows: &[usize], member: &mut [bool], depth: usize) -> usize {
        let id = nodes.len();
        let mean = rows.iter().map(|&i| self.residual[i]).sum::<f64>() / rows.len() as f64;
        nodes.push(Node::Leaf(mean));
        if depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf {
            return id;
        }
        for &i in rows {
            member[i] = true;
        }
        let best = self.best_split(rows, member);
        for &i in rows {
            member[i] = false;
        }
        let Some(best) = best else { return id };

        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let left = self.grow(nodes, &l, member, depth + 1);
        let right = self.grow(nodes, &r, member, depth + 1);
        nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left, right };
        id
    }

    /// Best SSE-reducing split. Ties go to the lowest feature index, then
    /// the lowest threshold.
    fn best_split(&self, rows: &[usize], member: &[bool]) -> Option<BestSplit> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let parent = total * total / n as f64;
        let min_leaf = self.params.min_leaf.max(1);
        let per_feature = par::map_range(self.exec, self.sorted.len(), |feature| {
            let mut best: Option<(f64, f64)> = None;
            let mut left_sum = 0.0;
            let mut left_n = 0usize;
            let mut prev: Option<f64> = None;
            for &i in self.sorted[feature].iter().filter(|&&i| member[i]) {
                let b = self.x[i][feature];
                if let Some(a) = prev {
                    if a < b && left_n >= min_leaf && n - left_n >= min_leaf {
                        let right_sum = total - left_sum;
                        let gain = left_sum * left_sum / left_n as f64
                            + right_sum * right_sum / (n - left_n) as f64
                            - parent;
                        if best.is_none_or(|(g, _)| gain > g) {
                            let mut threshold = 0.5 * (a + b);
                            if threshold >= b {
                                threshold = a;
                            }
                            best = Some((gain, threshold));
                        }
                    }
                }
                left_sum += self.residual[i];
                left_n += 1;
                prev = Some(b);
            }
            best
        });
        let mut best: Option<BestSplit> = None;
        for (feature, cand) in per_feature.into_iter().enumerate() {
            if let Some((gain, threshold)) = cand {
                if gain > 1e-12 * (1.0 + parent.abs()) && best.is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit { feature, threshold, gain });
                }
            }
        }
        best
    }
}
