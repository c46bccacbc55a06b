//! Class-weighted logistic regression trained by gradient descent.
//!
//! The objective is `L = -sum_i w_{y_i} [y_i ln p_i + (1 - y_i) ln(1 - p_i)]
//! + l2 ||w||^2` with `w_c = |train| / (2 |c|)`. Features are rescaled by
//! their maximum absolute training value before descent and the scale is
//! folded back into the returned weights; steps use `lr * grad / |train|`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::ConfusionCounts;

pub const PROB_EPS: f64 = 1e-12;

/// Logistic function clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn unclamped_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub neg: f64,
    pub pos: f64,
}

impl ClassWeights {
    pub fn of(&self, y: Label) -> f64 {
        match y {
            Label::Wlt => self.pos,
            Label::Normal => self.neg,
        }
    }

    /// Balanced inverse-frequency weights; both classes must be present.
    pub fn balanced(labels: impl IntoIterator<Item = Label>) -> Result<Self> {
        let (mut pos, mut neg) = (0usize, 0usize);
        for y in labels {
            if y.is_positive() {
                pos += 1;
            } else {
                neg += 1;
            }
        }
        if pos == 0 || neg == 0 {
            return Err(Error::Training(format!(
                "training set needs both classes (got {pos} positive, {neg} negative)"
            )));
        }
        let n = (pos + neg) as f64;
        Ok(ClassWeights { neg: n / (2.0 * neg as f64), pos: n / (2.0 * pos as f64) })
    }
}

/// Weighted loss and its gradient `(dL/dw, dL/db)` at `(weights, bias)`.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    data: &[(FeatureVector, Label)],
    cw: ClassWeights,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    let mut loss = l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (x, y) in data {
        let z = x.dot(weights) + bias;
        let t = y.as_u8() as f64;
        let wy = cw.of(*y);
        loss += wy * (softplus(z) - t * z);
        let dz = wy * (unclamped_sigmoid(z) - t);
        for &(i, v) in x.entries() {
            if i < grad.len() {
                grad[i] += dz * v;
            }
        }
        grad_b += dz;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += 2.0 * l2 * w;
    }
    (loss, grad, grad_b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Epochs without dev-MCC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Minibatch size; `None` is full-batch descent.
    pub batch_size: Option<usize>,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper { lr: 0.5, l2: 0.1, epochs: 300, patience: 30, seed: 0, batch_size: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_weights: ClassWeights,
    pub l2: f64,
    /// Fingerprint of the training split.
    pub trained_on: String,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Training loss (in rescaled feature space) after each epoch.
    pub loss_history: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            class_weights: ClassWeights { neg: 1.0, pos: 1.0 },
            l2: 0.0,
            trained_on: String::new(),
            epochs_run: 0,
            best_epoch: 0,
            loss_history: Vec::new(),
        }
    }

    pub fn logit(&self, x: &FeatureVector) -> f64 {
        x.dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> f64 {
        sigmoid(self.logit(x))
    }
}

fn dev_mcc(weights: &[f64], bias: f64, dev: &[(FeatureVector, Label)]) -> Option<f64> {
    let scores: Vec<(f64, Label)> = dev.iter().map(|(x, y)| (sigmoid(x.dot(weights) + bias), *y)).collect();
    ConfusionCounts::at_threshold(&scores, 0.5).mcc()
}

/// Trains on `train` with early stopping on dev MCC at threshold 0.5. Ids at
/// or beyond `dim` are ignored. A dev set lacking a class disables early
/// stopping.
pub fn train_linear(
    train: &[(FeatureVector, Label)],
    dev: &[(FeatureVector, Label)],
    dim: usize,
    hyper: &Hyper,
) -> Result<LinearModel> {
    if !(hyper.lr > 0.0) || !(hyper.l2 >= 0.0) {
        return Err(Error::Training(format!("invalid hyperparameters {hyper:?}")));
    }
    let cw = ClassWeights::balanced(train.iter().map(|(_, y)| *y))?;

    let mut scale = vec![1.0f64; dim];
    let mut seen = vec![false; dim];
    for (x, _) in train {
        for &(i, v) in x.entries() {
            if i < dim {
                if !v.is_finite() {
                    return Err(Error::Training(format!("non-finite feature {i}")));
                }
                let a = v.abs();
                if !seen[i] || a > scale[i] {
                    scale[i] = a;
                    seen[i] = true;
                }
            }
        }
    }
    for s in &mut scale {
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let rescale = |x: &FeatureVector| {
        FeatureVector::from_entries(
            x.entries().iter().filter(|e| e.0 < dim).map(|&(i, v)| (i, v / scale[i])).collect(),
        )
    };
    let train_s: Vec<(FeatureVector, Label)> = train.iter().map(|(x, y)| (rescale(x), *y)).collect();
    let dev_s: Vec<(FeatureVector, Label)> = dev.iter().map(|(x, y)| (rescale(x), *y)).collect();
    let early_stop = dev.iter().any(|d| d.1.is_positive()) && dev.iter().any(|d| !d.1.is_positive());

    let n = train.len() as f64;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut best = (w.clone(), b, f64::NEG_INFINITY, 0usize);
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order: Vec<usize> = (0..train_s.len()).collect();

    for epoch in 1..=hyper.epochs {
        match hyper.batch_size {
            Some(bs) if bs > 0 && bs < train_s.len() => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(bs) {
                    let batch: Vec<(FeatureVector, Label)> = chunk.iter().map(|&i| train_s[i].clone()).collect();
                    let (_, g, gb) = loss_and_gradient(&w, b, &batch, cw, hyper.l2 * batch.len() as f64 / n);
                    let m = batch.len() as f64;
                    for (wi, gi) in w.iter_mut().zip(&g) {
                        *wi -= hyper.lr * gi / m;
                    }
                    b -= hyper.lr * gb / m;
                }
            }
            _ => {
                let (_, g, gb) = loss_and_gradient(&w, b, &train_s, cw, hyper.l2);
                for (wi, gi) in w.iter_mut().zip(&g) {
                    *wi -= hyper.lr * gi / n;
                }
                b -= hyper.lr * gb / n;
            }
        }
        let (loss, _, _) = loss_and_gradient(&w, b, &train_s, cw, hyper.l2);
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "loss diverged at epoch {epoch} with lr={}, l2={}, epochs={}, batch_size={:?}",
                hyper.lr, hyper.l2, hyper.epochs, hyper.batch_size
            )));
        }
        history.push(loss);
        if early_stop {
            let mcc = dev_mcc(&w, b, &dev_s).unwrap_or(0.0);
            if mcc > best.2 {
                best = (w.clone(), b, mcc, epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= hyper.patience {
                    break;
                }
            }
        }
    }
    let epochs_run = history.len();
    let (w, b, best_epoch) = if early_stop { (best.0, best.1, best.3) } else { (w, b, epochs_run) };
    Ok(LinearModel {
        weights: w.iter().zip(&scale).map(|(wi, s)| wi / s).collect(),
        bias: b,
        class_weights: cw,
        l2: hyper.l2,
        trained_on: String::new(),
        epochs_run,
        best_epoch,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::from_entries(values.iter().copied().enumerate().collect())
    }

    fn toy(seed: u64) -> Vec<(FeatureVector, Label)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..20)
            .map(|i| {
                let pos = i < 6;
                let (cx, cy) = if pos { (2.0, 1.5) } else { (-1.0, -0.5) };
                let x = fv(&[cx + rng.random_range(-0.8..0.8), cy + rng.random_range(-0.8..0.8)]);
                (x, Label::from_bool(pos))
            })
            .collect()
    }

    fn accuracy(pred: impl Fn(&FeatureVector) -> bool, data: &[(FeatureVector, Label)]) -> f64 {
        data.iter().filter(|(x, y)| pred(x) == y.is_positive()).count() as f64 / data.len() as f64
    }

    #[test]
    fn zero_model_is_half() {
        let m = LinearModel::zeros(3);
        assert_eq!(m.predict_proba(&fv(&[1.0, -4.0, 9.0])), 0.5);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), 1.0 - PROB_EPS);
        assert_eq!(sigmoid(-1e6), PROB_EPS);
    }

    #[test]
    fn class_weight_formula() {
        let cw = ClassWeights::balanced([Label::Wlt, Label::Normal, Label::Normal, Label::Normal]).unwrap();
        assert_eq!((cw.neg, cw.pos), (4.0 / 6.0, 2.0));
        assert!(ClassWeights::balanced([Label::Normal]).is_err());
    }

    #[test]
    fn separable_toy_matches_grid_oracle() {
        let data = toy(11);
        // The oracle: best accuracy over a grid of separating lines.
        let mut oracle: f64 = 0.0;
        for a in -20..=20 {
            for c in -20..=20 {
                for b in -20..=20 {
                    let (a, c, b) = (a as f64 / 4.0, c as f64 / 4.0, b as f64 / 4.0);
                    oracle = oracle.max(accuracy(|x| a * x.get(0) + c * x.get(1) + b >= 0.0, &data));
                }
            }
        }
        assert_eq!(oracle, 1.0);
        let hyper = Hyper { epochs: 2000, l2: 0.0, lr: 1.0, ..Default::default() };
        let m = train_linear(&data, &[], 2, &hyper).unwrap();
        assert!(accuracy(|x| m.predict_proba(x) >= 0.5, &data) >= 0.99);
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<(FeatureVector, Label)> {
        (0..n)
            .map(|i| {
                let mut x = Vec::new();
                for j in 0..dim {
                    if rng.random_bool(0.7) {
                        x.push((j, rng.random_range(-2.0..2.0)));
                    }
                }
                (FeatureVector::from_entries(x), Label::from_bool(i % 3 == 0))
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for _ in 0..5 {
            let data = random_problem(&mut rng, 12, 4);
            let cw = ClassWeights::balanced(data.iter().map(|d| d.1)).unwrap();
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b = rng.random_range(-1.0..1.0);
            let (_, g, gb) = loss_and_gradient(&w, b, &data, cw, 0.3);
            for j in 0..=4 {
                let eval = |delta: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if j < 4 { w2[j] += delta } else { b2 += delta }
                    loss_and_gradient(&w2, b2, &data, cw, 0.3).0
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = if j < 4 { g[j] } else { gb };
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-5, "coord {j}: {numeric} vs {analytic}");
            }
        }
    }

    #[test]
    fn full_batch_loss_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_problem(&mut rng, 60, 6);
        let m = train_linear(&data, &[], 6, &Hyper { epochs: 200, ..Default::default() }).unwrap();
        assert_eq!(m.epochs_run, 200);
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn deterministic_with_minibatches() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_problem(&mut rng, 50, 5);
        let dev = random_problem(&mut rng, 20, 5);
        let hyper = Hyper { batch_size: Some(8), seed: 3, ..Default::default() };
        let a = train_linear(&data, &dev, 5, &hyper).unwrap();
        assert_eq!(a, train_linear(&data, &dev, 5, &hyper).unwrap());
        assert!(a.best_epoch <= a.epochs_run);
    }

    #[test]
    fn feature_scaling_preserves_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let data = random_problem(&mut rng, 40, 5);
        let eval = random_problem(&mut rng, 30, 5);
        let hyper = Hyper { epochs: 100, ..Default::default() };
        let rank = |train: &[(FeatureVector, Label)], xs: &[FeatureVector]| {
            let m = train_linear(train, &[], 5, &hyper).unwrap();
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.sort_by(|&a, &b| m.logit(&xs[a]).total_cmp(&m.logit(&xs[b])));
            idx
        };
        let xs: Vec<FeatureVector> = eval.iter().map(|e| e.0.clone()).collect();
        for c in [0.01, 7.0, 1000.0] {
            let scaled: Vec<(FeatureVector, Label)> = data.iter().map(|(x, y)| (x.scaled(c), *y)).collect();
            let scaled_xs: Vec<FeatureVector> = xs.iter().map(|x| x.scaled(c)).collect();
            assert_eq!(rank(&data, &xs), rank(&scaled, &scaled_xs), "c = {c}");
        }
    }

    #[test]
    fn errors() {
        let single = vec![(fv(&[1.0]), Label::Wlt)];
        assert!(train_linear(&single, &[], 1, &Hyper::default()).is_err());
        let data = vec![(fv(&[1.0]), Label::Wlt), (fv(&[-1.0]), Label::Normal)];
        let bad = Hyper { lr: f64::NAN, ..Default::default() };
        assert!(train_linear(&data, &[], 1, &bad).is_err());
        let diverge = Hyper { lr: 1e308, l2: 1e308, epochs: 3, ..Default::default() };
        let err = train_linear(&data, &[], 1, &diverge).unwrap_err().to_string();
        assert!(err.contains("lr="), "{err}");
    }
}
