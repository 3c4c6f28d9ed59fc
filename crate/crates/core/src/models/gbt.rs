//! One-vs-rest gradient-boosted regression trees on the logistic loss.
//!
//! Each round fits a tree to the residuals `y - p` by exact greedy
//! squared-error splits and sets leaf values by a single Newton step,
//! `Σ r / Σ p(1-p)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainOptions;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, RowView};
use crate::linalg::sigmoid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Nodes in preorder; the root is `nodes[0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: RowView<'_>) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    k = if row.get(feature) <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, k: usize) -> usize {
            match t.nodes[k] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    /// Initial log-odds per class.
    pub base_scores: Vec<f64>,
    pub shrinkage: f64,
    /// `trees[c]` is the sequence of trees for class `c`.
    pub trees: Vec<Vec<Tree>>,
}

impl Ensemble {
    pub fn scores(&self, row: RowView<'_>) -> Vec<f64> {
        self.base_scores
            .iter()
            .zip(&self.trees)
            .map(|(b, ts)| b + self.shrinkage * ts.iter().map(|t| t.predict(row)).sum::<f64>())
            .collect()
    }
}

/// Nonzero entries of every column, sorted by value then row.
pub(crate) struct Columns(Vec<Vec<(f64, usize)>>);

impl Columns {
    pub(crate) fn build(x: &FeatureMatrix) -> Self {
        let mut cols = vec![Vec::new(); x.cols()];
        for i in 0..x.rows() {
            for (j, v) in x.row(i).entries() {
                if v != 0.0 {
                    cols[j].push((v, i));
                }
            }
        }
        for c in &mut cols {
            c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Columns(cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = a + (b - a) / 2.0;
    if t >= b {
        a
    } else {
        t
    }
}

/// Best squared-error split of the rows flagged in `member`. The gain is
/// `SL²/NL + SR²/NR - S²/N`; ties keep the lowest feature and threshold.
pub(crate) fn best_split(columns: &Columns, member: &[bool], rows: &[usize], residual: &[f64]) -> Option<Split> {
    let n = rows.len() as f64;
    let total: f64 = rows.iter().map(|&i| residual[i]).sum();
    let parent = total * total / n;
    let mut best: Option<Split> = None;
    for (feature, col) in columns.0.iter().enumerate() {
        let (mut nz_sum, mut nz_count) = (0.0, 0usize);
        for &(_, i) in col {
            if member[i] {
                nz_sum += residual[i];
                nz_count += 1;
            }
        }
        let zero_count = rows.len() - nz_count;
        let zero_sum = total - nz_sum;

        let (mut left_sum, mut left_count) = (0.0, 0usize);
        let mut prev: Option<f64> = None;
        let mut zero_done = zero_count == 0;
        let consider = |value: f64, left_sum: f64, left_count: usize, prev: Option<f64>, best: &mut Option<Split>| {
            let Some(p) = prev else { return };
            if value == p || left_count == 0 || left_count == rows.len() {
                return;
            }
            let right_sum = total - left_sum;
            let nl = left_count as f64;
            let nr = n - nl;
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                *best = Some(Split {
                    feature,
                    threshold: midpoint(p, value),
                    gain,
                });
            }
        };
        for &(value, i) in col {
            if !member[i] {
                continue;
            }
            if !zero_done && value > 0.0 {
                consider(0.0, left_sum, left_count, prev, &mut best);
                left_sum += zero_sum;
                left_count += zero_count;
                prev = Some(0.0);
                zero_done = true;
            }
            consider(value, left_sum, left_count, prev, &mut best);
            left_sum += residual[i];
            left_count += 1;
            prev = Some(value);
        }
        if !zero_done {
            consider(0.0, left_sum, left_count, prev, &mut best);
        }
    }
    best
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    columns: &'a Columns,
    residual: &'a [f64],
    hessian: &'a [f64],
    max_depth: usize,
    member: Vec<bool>,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let r: f64 = rows.iter().map(|&i| self.residual[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hessian[i]).sum();
        TreeNode::Leaf {
            value: if h > 1e-12 { r / h } else { 0.0 },
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let split = if depth < self.max_depth && rows.len() >= 2 {
            rows.iter().for_each(|&i| self.member[i] = true);
            let s = best_split(self.columns, &self.member, &rows, self.residual);
            rows.iter().for_each(|&i| self.member[i] = false);
            s
        } else {
            None
        };
        let Some(split) = split else {
            let leaf = self.leaf(&rows);
            self.nodes.push(leaf);
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.x.row(i).get(split.feature) <= split.threshold);
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn fit_tree(x: &FeatureMatrix, columns: &Columns, residual: &[f64], hessian: &[f64], max_depth: usize) -> Tree {
    let mut b = Builder {
        x,
        columns,
        residual,
        hessian,
        max_depth,
        member: vec![false; x.rows()],
        nodes: Vec::new(),
    };
    b.grow((0..x.rows()).collect(), 0);
    Tree { nodes: b.nodes }
}

fn logistic_loss(y: f64, f: f64) -> f64 {
    // -y ln σ(f) - (1-y) ln(1-σ(f))
    f.max(0.0) - y * f + (-f.abs()).exp().ln_1p()
}

/// Returns the ensemble and the per-round training loss summed over classes.
pub(crate) fn fit(x: &FeatureMatrix, y: &[usize], classes: usize, opts: &TrainOptions) -> Result<(Ensemble, Vec<f64>)> {
    let columns = Columns::build(x);
    let n = x.rows();
    let per_class: Vec<(f64, Vec<Tree>, Vec<f64>)> = (0..classes)
        .into_par_iter()
        .map(|c| {
            let target: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { 0.0 }).collect();
            let p = (target.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
            let base = (p / (1.0 - p)).ln();
            let mut f = vec![base; n];
            let mut residual = vec![0.0; n];
            let mut hessian = vec![0.0; n];
            let mut trees = Vec::with_capacity(opts.n_trees);
            let mut losses = Vec::with_capacity(opts.n_trees);
            for _ in 0..opts.n_trees {
                for i in 0..n {
                    let p = sigmoid(f[i]);
                    residual[i] = target[i] - p;
                    hessian[i] = p * (1.0 - p);
                }
                let tree = fit_tree(x, &columns, &residual, &hessian, opts.max_depth);
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi += opts.learning_rate * tree.predict(x.row(i));
                }
                trees.push(tree);
                losses.push(target.iter().zip(&f).map(|(&t, &s)| logistic_loss(t, s)).sum::<f64>() / n as f64);
            }
            (base, trees, losses)
        })
        .collect();

    let mut history = vec![0.0; opts.n_trees];
    let mut base_scores = Vec::with_capacity(classes);
    let mut trees = Vec::with_capacity(classes);
    for (b, ts, losses) in per_class {
        for (h, l) in history.iter_mut().zip(&losses) {
            *h += l;
        }
        base_scores.push(b);
        trees.push(ts);
    }
    if let Some(epoch) = history.iter().position(|l| !l.is_finite()) {
        return Err(Error::NumericalFailure { epoch: epoch + 1 });
    }
    Ok((
        Ensemble {
            base_scores,
            shrinkage: opts.learning_rate,
            trees,
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn brute_force(x: &Matrix, rows: &[usize], residual: &[f64]) -> Option<(usize, f64, f64)> {
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&i| residual[i]).sum();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..x.cols() {
            let mut values: Vec<f64> = rows.iter().map(|&i| x.get(i, j)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let left: Vec<usize> = rows.iter().copied().filter(|&i| x.get(i, j) <= t).collect();
                let sl: f64 = left.iter().map(|&i| residual[i]).sum();
                let nl = left.len() as f64;
                let gain = sl * sl / nl + (total - sl).powi(2) / (n - nl) - total * total / n;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.2) {
                    best = Some((j, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn split_matches_brute_force_with_zeros_and_negatives() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let rows_n = rng.gen_range(3..20);
            let data: Vec<f64> = (0..rows_n * 4)
                .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(-3i32..4) as f64 })
                .collect();
            let x = Matrix::from_vec(rows_n, 4, data);
            let fm = FeatureMatrix::from_dense(x.clone());
            let residual: Vec<f64> = (0..rows_n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rows: Vec<usize> = (0..rows_n).filter(|_| rng.gen_bool(0.8)).collect();
            if rows.len() < 2 {
                continue;
            }
            let mut member = vec![false; rows_n];
            rows.iter().for_each(|&i| member[i] = true);
            let got = best_split(&Columns::build(&fm), &member, &rows, &residual);
            let want = brute_force(&x, &rows, &residual);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some((j, t, gain))) => {
                    assert!((g.gain - gain).abs() < 1e-9, "{g:?} vs {j} {t} {gain}");
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn stump_separates_one_feature() {
        let x = FeatureMatrix::from_dense(Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]));
        let residual = [0.5, 0.5, -0.5, -0.5];
        let hessian = [0.25; 4];
        let tree = fit_tree(&x, &Columns::build(&x), &residual, &hessian, 1);
        assert_eq!(tree.depth(), 1);
        assert_eq!(
            tree.nodes[0],
            TreeNode::Split { feature: 0, threshold: 1.5, left: 1, right: 2 }
        );
        assert_eq!(tree.predict(x.row(0)), 2.0);
        assert_eq!(tree.predict(x.row(3)), -2.0);
    }

    #[test]
    fn logistic_loss_is_stable() {
        assert!((logistic_loss(1.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logistic_loss(1.0, 800.0) < 1e-300);
        assert!((logistic_loss(0.0, 800.0) - 800.0).abs() < 1e-9);
    }
}
