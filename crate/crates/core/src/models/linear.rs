//! Softmax logistic regression and one-vs-rest linear SVM over a flat
//! parameter vector `[W (classes × features, row-major) | b (classes)]`.

use rand::seq::SliceRandom;

use super::{Shape, TrainOptions};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, RowView};
use crate::linalg::softmax_in_place;
use crate::rng::stream_rng;

pub(crate) fn param_count(shape: Shape) -> usize {
    shape.classes * shape.features + shape.classes
}

pub(crate) fn scores(params: &[f64], shape: Shape, row: RowView<'_>, out: &mut [f64]) {
    let (w, b) = params.split_at(shape.classes * shape.features);
    for c in 0..shape.classes {
        out[c] = row.dot(&w[c * shape.features..(c + 1) * shape.features]) + b[c];
    }
}

fn l2_term(params: &[f64], shape: Shape, l2: f64, grad: &mut Option<&mut [f64]>) -> f64 {
    let n_w = shape.classes * shape.features;
    let w = &params[..n_w];
    if let Some(g) = grad.as_deref_mut() {
        for (gi, wi) in g[..n_w].iter_mut().zip(w) {
            *gi += l2 * wi;
        }
    }
    0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Mean cross-entropy over `rows` plus `l2/2 ||W||²`. When `grad` is given
/// it is overwritten with the gradient.
pub(crate) fn logreg_loss_grad(
    params: &[f64],
    shape: Shape,
    x: &FeatureMatrix,
    y: &[usize],
    rows: &[usize],
    l2: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let n_w = shape.classes * shape.features;
    let inv = 1.0 / rows.len() as f64;
    let mut z = vec![0.0; shape.classes];
    let mut loss = 0.0;
    for &i in rows {
        let row = x.row(i);
        scores(params, shape, row, &mut z);
        let target = z[y[i]];
        loss += softmax_in_place(&mut z) - target;
        if let Some(g) = grad.as_deref_mut() {
            z[y[i]] -= 1.0;
            let (gw, gb) = g.split_at_mut(n_w);
            for c in 0..shape.classes {
                let d = z[c] * inv;
                row.axpy_into(d, &mut gw[c * shape.features..(c + 1) * shape.features]);
                gb[c] += d;
            }
        }
    }
    loss * inv + l2_term(params, shape, l2, &mut grad)
}

/// Mean one-vs-rest hinge loss summed over classes plus `l2/2 ||W||²`.
pub(crate) fn svm_loss_grad(
    params: &[f64],
    shape: Shape,
    x: &FeatureMatrix,
    y: &[usize],
    rows: &[usize],
    l2: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    let n_w = shape.classes * shape.features;
    let inv = 1.0 / rows.len() as f64;
    let mut z = vec![0.0; shape.classes];
    let mut loss = 0.0;
    for &i in rows {
        let row = x.row(i);
        scores(params, shape, row, &mut z);
        for c in 0..shape.classes {
            let t = if y[i] == c { 1.0 } else { -1.0 };
            let margin = 1.0 - t * z[c];
            if margin > 0.0 {
                loss += margin;
                if let Some(g) = grad.as_deref_mut() {
                    let (gw, gb) = g.split_at_mut(n_w);
                    row.axpy_into(-t * inv, &mut gw[c * shape.features..(c + 1) * shape.features]);
                    gb[c] -= t * inv;
                }
            }
        }
    }
    loss * inv + l2_term(params, shape, l2, &mut grad)
}

pub(crate) type LossFn = fn(&[f64], Shape, &FeatureMatrix, &[usize], &[usize], f64, Option<&mut [f64]>) -> f64;

/// Shuffled minibatch SGD with a constant step. Returns (parameters, per-epoch
/// mean training loss).
pub(crate) fn fit_sgd(
    loss_fn: LossFn,
    x: &FeatureMatrix,
    y: &[usize],
    shape: Shape,
    opts: &TrainOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut params = vec![0.0; param_count(shape)];
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut rng = stream_rng(opts.seed, 0);
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let loss = loss_fn(&params, shape, x, y, batch, opts.l2, Some(&mut grad));
            total += loss * batch.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= opts.learning_rate * g;
            }
        }
        let mean = total / x.rows() as f64;
        if !mean.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure { epoch: epoch + 1 });
        }
        history.push(mean);
    }
    Ok((params, history))
}
