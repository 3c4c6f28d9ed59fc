//! Classifiers over [`FeatureMatrix`] rows.
//!
//! All four share one interface: [`Classifier::fit`] on string labels,
//! [`Classifier::predict`], and (except the SVM) [`Classifier::predict_proba`]
//! with columns in [`Classifier::labels`] order.

mod gbt;
mod linear;
mod mlp;

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, RowView};
use crate::gradcheck::{central_difference, max_relative_error};
use crate::linalg::{argmax, sigmoid, softmax_in_place, Matrix};
use crate::rng::stream_rng;

pub use gbt::{Ensemble, Tree, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logreg,
    Svm,
    Mlp,
    Gbt,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Logreg,
        ClassifierKind::Svm,
        ClassifierKind::Mlp,
        ClassifierKind::Gbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Gbt => "gbt",
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassifierKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown classifier `{s}`")))
    }
}

/// Hyperparameters. Fields a classifier does not use are ignored.
///
/// `learning_rate` is the SGD step for logreg/svm, the Adam step for the
/// MLP and the shrinkage for boosting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub hidden_units: usize,
    /// MLP early stopping: minimum loss improvement...
    pub tol: f64,
    /// ...within this many epochs. 0 disables it.
    pub patience: usize,
    pub n_trees: usize,
    pub max_depth: usize,
}

impl TrainOptions {
    pub fn for_kind(kind: ClassifierKind) -> Self {
        let base = TrainOptions {
            seed: 1,
            epochs: 50,
            learning_rate: 0.5,
            l2: 1e-4,
            batch_size: 32,
            hidden_units: 100,
            tol: 1e-4,
            patience: 10,
            n_trees: 100,
            max_depth: 3,
        };
        match kind {
            ClassifierKind::Logreg => base,
            ClassifierKind::Svm => TrainOptions {
                learning_rate: 0.1,
                ..base
            },
            ClassifierKind::Mlp => TrainOptions {
                epochs: 200,
                learning_rate: 1e-3,
                ..base
            },
            ClassifierKind::Gbt => TrainOptions {
                learning_rate: 0.1,
                ..base
            },
        }
    }

    pub fn validate(&self, kind: ClassifierKind) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        match kind {
            ClassifierKind::Gbt if self.n_trees == 0 || self.max_depth == 0 => bad("n_trees and max_depth must be >= 1"),
            ClassifierKind::Mlp if self.hidden_units == 0 => bad("hidden_units must be >= 1"),
            ClassifierKind::Logreg | ClassifierKind::Svm | ClassifierKind::Mlp
                if self.epochs == 0 || self.batch_size == 0 =>
            {
                bad("epochs and batch_size must be >= 1")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Shape {
    pub features: usize,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Params {
    /// `weights` is classes × features.
    Linear { weights: Matrix, bias: Vec<f64> },
    /// `w1` is features × hidden, `w2` classes × hidden.
    Mlp {
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
    },
    Gbt(Ensemble),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub options: TrainOptions,
    /// Mean training loss per epoch (per boosting round for gbt).
    pub loss_history: Vec<f64>,
    pub stopped_early: bool,
    pub train_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub format_version: u32,
    pub kind: ClassifierKind,
    /// Sorted distinct training labels; class `c` is `labels[c]`.
    pub labels: Vec<String>,
    pub n_features: usize,
    pub params: Params,
    pub meta: TrainMeta,
}

/// Maps string labels to indices into their sorted distinct set.
fn encode_labels(y: &[String]) -> (Vec<String>, Vec<usize>) {
    let mut labels = y.to_vec();
    labels.sort();
    labels.dedup();
    let idx = y.iter().map(|l| labels.binary_search(l).unwrap()).collect();
    (labels, idx)
}

fn check_inputs(x: &FeatureMatrix, y: &[String]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if x.rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("feature matrix".into()));
    }
    Ok(())
}

impl Classifier {
    pub fn fit(kind: ClassifierKind, x: &FeatureMatrix, y: &[String], opts: &TrainOptions) -> Result<Classifier> {
        opts.validate(kind)?;
        check_inputs(x, y)?;
        let (labels, y_idx) = encode_labels(y);
        if labels.len() < 2 {
            return Err(Error::DegenerateLabels);
        }
        let shape = Shape {
            features: x.cols(),
            classes: labels.len(),
        };
        let mut stopped_early = false;
        let (params, loss_history) = match kind {
            ClassifierKind::Logreg | ClassifierKind::Svm => {
                let loss: linear::LossFn = if kind == ClassifierKind::Logreg {
                    linear::logreg_loss_grad
                } else {
                    linear::svm_loss_grad
                };
                let (flat, history) = linear::fit_sgd(loss, x, &y_idx, shape, opts)?;
                (linear_params(&flat, shape), history)
            }
            ClassifierKind::Mlp => {
                let (flat, history, early) = mlp::fit(x, &y_idx, shape, opts)?;
                stopped_early = early;
                (mlp_params(&flat, shape, opts.hidden_units), history)
            }
            ClassifierKind::Gbt => {
                let (ensemble, history) = gbt::fit(x, &y_idx, shape.classes, opts)?;
                (Params::Gbt(ensemble), history)
            }
        };
        Ok(Classifier {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            labels,
            n_features: shape.features,
            params,
            meta: TrainMeta {
                options: opts.clone(),
                loss_history,
                stopped_early,
                train_rows: x.rows(),
            },
        })
    }

    fn shape(&self) -> Shape {
        Shape {
            features: self.n_features,
            classes: self.labels.len(),
        }
    }

    /// Raw per-class scores (logits, margins or boosted log-odds).
    pub fn decision_function(&self, row: RowView<'_>) -> Vec<f64> {
        let shape = self.shape();
        match &self.params {
            Params::Linear { weights, bias } => {
                (0..shape.classes).map(|c| row.dot(weights.row(c)) + bias[c]).collect()
            }
            Params::Mlp { w1, b1, w2, b2 } => {
                let view = mlp::View {
                    w1: w1.as_slice(),
                    b1,
                    w2: w2.as_slice(),
                    b2,
                    hidden: b1.len(),
                };
                let mut a = vec![0.0; b1.len()];
                let mut z = vec![0.0; shape.classes];
                mlp::forward(&view, row, &mut a, &mut z);
                z
            }
            Params::Gbt(e) => e.scores(row),
        }
    }

    fn check_width(&self, x: &FeatureMatrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: x.cols(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("feature matrix".into()));
        }
        Ok(())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<String>> {
        self.check_width(x)?;
        Ok((0..x.rows())
            .map(|i| self.labels[argmax(&self.decision_function(x.row(i)))].clone())
            .collect())
    }

    /// Rows sum to one. The boosted model normalizes its one-vs-rest
    /// sigmoids; the SVM has no probability model.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Matrix> {
        if self.kind == ClassifierKind::Svm {
            return Err(Error::Unsupported("predict_proba"));
        }
        self.check_width(x)?;
        let mut out = Matrix::zeros(x.rows(), self.labels.len());
        for i in 0..x.rows() {
            let mut z = self.decision_function(x.row(i));
            if self.kind == ClassifierKind::Gbt {
                z.iter_mut().for_each(|v| *v = sigmoid(*v));
                let s: f64 = z.iter().sum();
                z.iter_mut().for_each(|v| *v /= s);
            } else {
                softmax_in_place(&mut z);
            }
            out.row_mut(i).copy_from_slice(&z);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Classifier> {
        let c: Classifier = serde_json::from_str(text)?;
        if c.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format {
                line: 1,
                message: format!("unsupported model format_version {}", c.format_version),
            });
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Classifier> {
        let path = path.as_ref();
        Classifier::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

fn linear_params(flat: &[f64], shape: Shape) -> Params {
    let n_w = shape.classes * shape.features;
    Params::Linear {
        weights: Matrix::from_vec(shape.classes, shape.features, flat[..n_w].to_vec()),
        bias: flat[n_w..].to_vec(),
    }
}

fn mlp_params(flat: &[f64], shape: Shape, hidden: usize) -> Params {
    let v = mlp::view(flat, shape, hidden);
    Params::Mlp {
        w1: Matrix::from_vec(shape.features, hidden, v.w1.to_vec()),
        b1: v.b1.to_vec(),
        w2: Matrix::from_vec(shape.classes, hidden, v.w2.to_vec()),
        b2: v.b2.to_vec(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientCheck {
    pub parameters: usize,
    pub max_relative_error: f64,
}

/// Full-batch training objective and its analytic gradient at the flat
/// parameter vector `params` (logreg: `[W | b]`, classes × features row-major;
/// mlp: `[W1 | b1 | W2 | b2]`). Classes are the sorted distinct labels.
pub fn objective(
    kind: ClassifierKind,
    x: &FeatureMatrix,
    y: &[String],
    params: &[f64],
    opts: &TrainOptions,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(x, y)?;
    let (labels, y_idx) = encode_labels(y);
    let shape = Shape {
        features: x.cols(),
        classes: labels.len(),
    };
    let n = match kind {
        ClassifierKind::Logreg => linear::param_count(shape),
        ClassifierKind::Mlp => mlp::param_count(shape, opts.hidden_units),
        _ => return Err(Error::Unsupported("objective gradient")),
    };
    if params.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: params.len(),
        });
    }
    let rows: Vec<usize> = (0..x.rows()).collect();
    let mut grad = vec![0.0; n];
    let loss = objective_at(kind, shape, x, &y_idx, &rows, opts, params, Some(&mut grad));
    Ok((loss, grad))
}

#[allow(clippy::too_many_arguments)]
fn objective_at(
    kind: ClassifierKind,
    shape: Shape,
    x: &FeatureMatrix,
    y: &[usize],
    rows: &[usize],
    opts: &TrainOptions,
    params: &[f64],
    grad: Option<&mut [f64]>,
) -> f64 {
    match kind {
        ClassifierKind::Logreg => linear::logreg_loss_grad(params, shape, x, y, rows, opts.l2, grad),
        ClassifierKind::Mlp => mlp::loss_grad(params, shape, opts.hidden_units, x, y, rows, opts.l2, grad),
        _ => unreachable!(),
    }
}

/// Compares the analytic gradient of the full-batch training objective with
/// central differences at parameters drawn uniformly from `[-0.5, 0.5]`.
pub fn loss_gradient_check(
    kind: ClassifierKind,
    x: &FeatureMatrix,
    y: &[String],
    opts: &TrainOptions,
    seed: u64,
) -> Result<GradientCheck> {
    check_inputs(x, y)?;
    let (labels, y_idx) = encode_labels(y);
    let shape = Shape {
        features: x.cols(),
        classes: labels.len(),
    };
    let rows: Vec<usize> = (0..x.rows()).collect();
    let n = match kind {
        ClassifierKind::Logreg => linear::param_count(shape),
        ClassifierKind::Mlp => mlp::param_count(shape, opts.hidden_units),
        _ => return Err(Error::Unsupported("gradient check")),
    };
    let mut rng = stream_rng(seed, 0);
    let params: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mut analytic = vec![0.0; n];
    objective_at(kind, shape, x, &y_idx, &rows, opts, &params, Some(&mut analytic));
    let numeric = central_difference(|p| objective_at(kind, shape, x, &y_idx, &rows, opts, p, None), &params, 1e-5);
    Ok(GradientCheck {
        parameters: n,
        max_relative_error: max_relative_error(&analytic, &numeric),
    })
}
