use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// A 2-D binary classifier. `decision(x) > 0` means the favourable class.
#[derive(Clone, Debug)]
pub enum Model {
    /// Favourable iff `w · x < c`.
    Linear { w: [f64; 2], c: f64 },
    /// Favourable iff `Σ coef · x₁^i x₂^j > 0` over monomials up to `degree`.
    Polynomial { degree: u32, coef: Vec<f64> },
    Knn(Arc<Knn>),
    Tree(Arc<TreeNode>),
    /// Favourable wherever any part is: the pointwise maximum of decisions.
    Join(Vec<Model>),
}

impl Model {
    pub fn linear(w: [f64; 2], c: f64) -> Self {
        Model::Linear { w, c }
    }

    /// Depth-1 tree: favourable iff `x[feature] <= threshold`.
    pub fn stump(feature: usize, threshold: f64) -> Self {
        Model::Tree(Arc::new(TreeNode::Split {
            feature,
            threshold,
            left: Box::new(TreeNode::Leaf(true)),
            right: Box::new(TreeNode::Leaf(false)),
        }))
    }

    pub fn decision(&self, x: [f64; 2]) -> f64 {
        match self {
            Model::Linear { w, c } => c - (w[0] * x[0] + w[1] * x[1]),
            Model::Polynomial { degree, coef } => monomials(x, *degree)
                .iter()
                .zip(coef)
                .map(|(f, b)| f * b)
                .sum(),
            Model::Knn(knn) => knn.decision(x),
            Model::Tree(node) => {
                if node.predict(x) {
                    1.0
                } else {
                    -1.0
                }
            }
            Model::Join(parts) => parts
                .iter()
                .map(|m| m.decision(x))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn predict(&self, x: [f64; 2]) -> bool {
        self.decision(x) > 0.0
    }

    /// Flexibility proxy: non-zero parameters for linear models, degree for
    /// polynomials, training size over k for neighbours, depth for trees.
    pub fn complexity(&self) -> f64 {
        match self {
            Model::Linear { w, c } => [w[0], w[1], *c].iter().filter(|v| v.abs() > 1e-12).count() as f64,
            Model::Polynomial { degree, .. } => *degree as f64,
            Model::Knn(knn) => knn.points.len() as f64 / knn.k as f64,
            Model::Tree(node) => node.depth() as f64,
            Model::Join(parts) => parts.iter().map(Model::complexity).sum(),
        }
    }
}

/// Monomials `x₁^i x₂^j` with `i + j <= degree`, by total degree then
/// descending power of x₁.
pub fn monomials(x: [f64; 2], degree: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(monomial_count(degree));
    for total in 0..=degree {
        for j in 0..=total {
            let i = total - j;
            out.push(x[0].powi(i as i32) * x[1].powi(j as i32));
        }
    }
    out
}

pub fn monomial_count(degree: u32) -> usize {
    let d = degree as usize;
    (d + 1) * (d + 2) / 2
}

/// Least-squares fit of ±1 targets on monomial features.
pub fn fit_polynomial(points: &[[f64; 2]], labels: &[bool], degree: u32) -> Result<Model> {
    let m = monomial_count(degree);
    if points.len() < m {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} needs at least {m} training points, got {}",
            points.len()
        )));
    }
    let design = DMatrix::from_fn(points.len(), m, |r, c| monomials(points[r], degree)[c]);
    let target = DVector::from_iterator(
        labels.len(),
        labels.iter().map(|&l| if l { 1.0 } else { -1.0 }),
    );
    let coef = design
        .svd(true, true)
        .solve(&target, 1e-10)
        .map_err(|e| Error::InvalidArgument(format!("polynomial fit failed: {e}")))?;
    Ok(Model::Polynomial {
        degree,
        coef: coef.iter().copied().collect(),
    })
}

#[derive(Clone, Debug)]
pub struct Knn {
    pub k: usize,
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<bool>,
}

impl Knn {
    pub fn new(k: usize, points: Vec<[f64; 2]>, labels: Vec<bool>) -> Result<Self> {
        if k == 0 || k > points.len() {
            return Err(Error::InvalidArgument(format!(
                "k = {k} with {} training points",
                points.len()
            )));
        }
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                actual: labels.len(),
            });
        }
        Ok(Self { k, points, labels })
    }

    /// Vote margin in `[-1, 1]`; a tied vote follows the nearest neighbour and
    /// gets a half-vote margin.
    pub fn decision(&self, x: [f64; 2]) -> f64 {
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < order.len() {
            order.select_nth_unstable_by(self.k - 1, by);
            order.truncate(self.k);
        }
        let favourable = order.iter().filter(|(_, i)| self.labels[*i]).count() as f64;
        let margin = (2.0 * favourable - self.k as f64) / self.k as f64;
        if margin != 0.0 {
            return margin;
        }
        let nearest = order.iter().min_by(|a, b| by(a, b)).expect("k >= 1");
        if self.labels[nearest.1] {
            0.5 / self.k as f64
        } else {
            -0.5 / self.k as f64
        }
    }
}

#[derive(Clone, Debug)]
pub enum TreeNode {
    Leaf(bool),
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: [f64; 2]) -> bool {
        match self {
            TreeNode::Leaf(v) => *v,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// Best threshold on one feature, as `(weighted impurity, threshold)`.
fn best_split(points: &[[f64; 2]], labels: &[bool], idx: &[usize], feature: usize) -> Option<(f64, f64)> {
    let mut sorted: Vec<usize> = idx.to_vec();
    sorted.sort_by(|&a, &b| points[a][feature].total_cmp(&points[b][feature]).then(a.cmp(&b)));
    let total_pos = sorted.iter().filter(|&&i| labels[i]).count();
    let n = sorted.len();
    let mut left_pos = 0;
    let mut best: Option<(f64, f64)> = None;
    for s in 1..n {
        if labels[sorted[s - 1]] {
            left_pos += 1;
        }
        let a = points[sorted[s - 1]][feature];
        let b = points[sorted[s]][feature];
        if a == b {
            continue;
        }
        let imp = (s as f64 * gini(left_pos, s) + (n - s) as f64 * gini(total_pos - left_pos, n - s)) / n as f64;
        if best.is_none_or(|(bi, _)| imp < bi) {
            best = Some((imp, (a + b) / 2.0));
        }
    }
    best
}

/// Grows a classification tree. With `rng`, each node tries the features in
/// a shuffled order and takes the first one that lowers impurity; without
/// it, the greedy best split is used.
pub fn grow_tree<R: Rng>(
    points: &[[f64; 2]],
    labels: &[bool],
    max_depth: usize,
    rng: Option<&mut R>,
) -> TreeNode {
    let idx: Vec<usize> = (0..points.len()).collect();
    let mut rng = rng;
    grow(points, labels, &idx, max_depth, &mut rng)
}

fn grow<R: Rng>(
    points: &[[f64; 2]],
    labels: &[bool],
    idx: &[usize],
    depth_left: usize,
    rng: &mut Option<&mut R>,
) -> TreeNode {
    let pos = idx.iter().filter(|&&i| labels[i]).count();
    let majority = 2 * pos >= idx.len();
    if depth_left == 0 || pos == 0 || pos == idx.len() {
        return TreeNode::Leaf(majority);
    }
    let parent = gini(pos, idx.len());
    let mut features = [0usize, 1];
    let chosen = match rng {
        Some(r) => {
            features.shuffle(*r);
            features.iter().find_map(|&f| {
                best_split(points, labels, idx, f)
                    .filter(|(imp, _)| *imp < parent)
                    .map(|(_, t)| (f, t))
            })
        }
        None => features
            .iter()
            .filter_map(|&f| best_split(points, labels, idx, f).map(|(imp, t)| (imp, f, t)))
            .filter(|(imp, _, _)| *imp < parent)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, f, t)| (f, t)),
    };
    let Some((feature, threshold)) = chosen else {
        return TreeNode::Leaf(majority);
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| points[i][feature] <= threshold);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(grow(points, labels, &l, depth_left - 1, rng)),
        right: Box::new(grow(points, labels, &r, depth_left - 1, rng)),
    }
}
