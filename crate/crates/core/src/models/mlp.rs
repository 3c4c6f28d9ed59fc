//! One-hidden-layer ReLU network with a softmax output, trained with Adam.
//!
//! Flat layout: `[W1 (features × hidden) | b1 | W2 (classes × hidden) | b2]`.
//! W1 is stored feature-major so a sparse row only touches the rows of W1
//! for its nonzero columns.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Shape, TrainOptions};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, RowView};
use crate::linalg::{axpy, dot, softmax_in_place};
use crate::rng::stream_rng;

pub(crate) struct View<'a> {
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
    pub hidden: usize,
}

pub(crate) fn param_count(shape: Shape, hidden: usize) -> usize {
    shape.features * hidden + hidden + shape.classes * hidden + shape.classes
}

fn offsets(shape: Shape, hidden: usize) -> [usize; 3] {
    let a = shape.features * hidden;
    let b = a + hidden;
    let c = b + shape.classes * hidden;
    [a, b, c]
}

pub(crate) fn view(params: &[f64], shape: Shape, hidden: usize) -> View<'_> {
    let [a, b, c] = offsets(shape, hidden);
    View {
        w1: &params[..a],
        b1: &params[a..b],
        w2: &params[b..c],
        b2: &params[c..],
        hidden,
    }
}

/// Fills the pre-activations `a` and returns the output logits in `z`.
pub(crate) fn forward(v: &View<'_>, row: RowView<'_>, a: &mut [f64], z: &mut [f64]) {
    let h = v.hidden;
    a.copy_from_slice(v.b1);
    match row {
        RowView::Sparse { indices, values } => {
            for (&j, &x) in indices.iter().zip(values) {
                axpy(x, &v.w1[j * h..(j + 1) * h], a);
            }
        }
        RowView::Dense(xs) => {
            for (j, &x) in xs.iter().enumerate() {
                if x != 0.0 {
                    axpy(x, &v.w1[j * h..(j + 1) * h], a);
                }
            }
        }
    }
    let relu: Vec<f64> = a.iter().map(|&t| t.max(0.0)).collect();
    for (c, zc) in z.iter_mut().enumerate() {
        *zc = dot(&v.w2[c * h..(c + 1) * h], &relu) + v.b2[c];
    }
}

/// Mean cross-entropy over `rows` plus `l2/2 (||W1||² + ||W2||²)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn loss_grad(
    params: &[f64],
    shape: Shape,
    hidden: usize,
    x: &FeatureMatrix,
    y: &[usize],
    rows: &[usize],
    l2: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let v = view(params, shape, hidden);
    let [o1, o2, o3] = offsets(shape, hidden);
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|t| *t = 0.0);
    }
    let inv = 1.0 / rows.len() as f64;
    let mut a = vec![0.0; hidden];
    let mut z = vec![0.0; shape.classes];
    let mut dh = vec![0.0; hidden];
    let mut loss = 0.0;
    for &i in rows {
        let row = x.row(i);
        forward(&v, row, &mut a, &mut z);
        let target = z[y[i]];
        loss += softmax_in_place(&mut z) - target;
        let Some(g) = grad.as_deref_mut() else { continue };
        z[y[i]] -= 1.0;
        let (gw1, rest) = g.split_at_mut(o1);
        let (gb1, rest) = rest.split_at_mut(o2 - o1);
        let (gw2, gb2) = rest.split_at_mut(o3 - o2);
        dh.iter_mut().for_each(|t| *t = 0.0);
        for c in 0..shape.classes {
            let d = z[c] * inv;
            gb2[c] += d;
            let w2c = &v.w2[c * hidden..(c + 1) * hidden];
            let g2c = &mut gw2[c * hidden..(c + 1) * hidden];
            for k in 0..hidden {
                if a[k] > 0.0 {
                    g2c[k] += d * a[k];
                    dh[k] += d * w2c[k];
                }
            }
        }
        axpy(1.0, &dh, gb1);
        for (j, x) in row.entries() {
            if x != 0.0 {
                axpy(x, &dh, &mut gw1[j * hidden..(j + 1) * hidden]);
            }
        }
    }
    let mut penalty = 0.0;
    for range in [0..o1, o2..o3] {
        penalty += params[range.clone()].iter().map(|t| t * t).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for k in range {
                g[k] += l2 * params[k];
            }
        }
    }
    loss * inv + 0.5 * l2 * penalty
}

/// Glorot-uniform weights, zero biases.
pub(crate) fn init(shape: Shape, hidden: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut p = vec![0.0; param_count(shape, hidden)];
    let [o1, o2, o3] = offsets(shape, hidden);
    let b1 = (6.0 / (shape.features + hidden) as f64).sqrt();
    let b2 = (6.0 / (hidden + shape.classes) as f64).sqrt();
    for t in &mut p[..o1] {
        *t = rng.gen_range(-b1..b1);
    }
    for t in &mut p[o2..o3] {
        *t = rng.gen_range(-b2..b2);
    }
    p
}

/// Adam on shuffled minibatches. Stops once the epoch loss has failed to
/// improve on the best seen by more than `tol` for `patience` epochs.
/// Returns (parameters, loss history, stopped early).
pub(crate) fn fit(x: &FeatureMatrix, y: &[usize], shape: Shape, opts: &TrainOptions) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let hidden = opts.hidden_units;
    let mut rng = stream_rng(opts.seed, 0);
    let mut params = init(shape, hidden, &mut rng);
    let mut grad = vec![0.0; params.len()];
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut t = 0i32;
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size) {
            total += loss_grad(&params, shape, hidden, x, y, batch, opts.l2, Some(&mut grad)) * batch.len() as f64;
            t += 1;
            let c1 = 1.0 - BETA1.powi(t);
            let c2 = 1.0 - BETA2.powi(t);
            for k in 0..params.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
                params[k] -= opts.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + EPS);
            }
        }
        let mean = total / x.rows() as f64;
        if !mean.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure { epoch: epoch + 1 });
        }
        history.push(mean);
        if opts.patience > 0 {
            if mean > best - opts.tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(mean);
            if stale >= opts.patience {
                return Ok((params, history, true));
            }
        }
    }
    Ok((params, history, false))
}
