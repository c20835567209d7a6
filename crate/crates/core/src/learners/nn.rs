//! Single-hidden-layer feed-forward network trained by full-batch gradient
//! descent on mean squared error plus a weight-decay penalty. Inputs are
//! z-score standardized with statistics frozen from the training rows;
//! the decay penalizes the weight matrices only, so the output bias is free
//! to absorb the target mean.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::learners::features::{FeatureRow, FEATURE_WIDTH};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnHyperparams {
    pub hidden_units: usize,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for NnHyperparams {
    fn default() -> Self {
        NnHyperparams {
            hidden_units: 5,
            weight_decay: 1e-3,
            learning_rate: 0.01,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralNetModel {
    pub hidden_units: usize,
    pub weight_decay: f64,
    /// input -> hidden weights, laid out [hidden][input] so the forward
    /// pass walks each unit's weights contiguously.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// hidden -> output weights.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub input_mean: Vec<f64>,
    pub input_sd: Vec<f64>,
    pub hyperparams: NnHyperparams,
    /// (after init, after the last update) training loss, for diagnostics.
    pub loss_trace: (f64, f64),
}

impl NeuralNetModel {
    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_flat_parameters(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let (w1, rest) = p.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (w2, b2) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = b2[0];
    }

    fn standardize(&self, features: &[f64], out: &mut [f64]) {
        for (k, &f) in features.iter().enumerate() {
            out[k] = (f - self.input_mean[k]) / self.input_sd[k];
        }
    }

    /// tanh hidden layer, linear output. `z` must already be standardized.
    fn forward_standardized(&self, z: &[f64], hidden: &mut [f64]) -> f64 {
        let width = z.len();
        for (j, out) in hidden.iter_mut().enumerate() {
            let row = &self.w1[j * width..(j + 1) * width];
            let pre = self.b1[j] + dot(row, z);
            *out = pre.tanh();
        }
        hidden.iter().zip(&self.w2).map(|(h, w)| h * w).sum::<f64>() + self.b2
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn predict_nn(model: &NeuralNetModel, features: &[f64]) -> Result<f64> {
    if features.len() != FEATURE_WIDTH {
        return Err(Error::Input(format!(
            "feature layout mismatch: model expects {FEATURE_WIDTH}, got {}",
            features.len()
        )));
    }
    let mut z = vec![0.0; FEATURE_WIDTH];
    let mut hidden = vec![0.0; model.hidden_units];
    model.standardize(features, &mut z);
    Ok(model.forward_standardized(&z, &mut hidden))
}

/// Regularized training loss: MSE over rows plus decay * (sum of squared
/// weights), biases excluded from the penalty.
pub fn nn_loss(model: &NeuralNetModel, rows: &[FeatureRow]) -> f64 {
    let mut z = vec![0.0; FEATURE_WIDTH];
    let mut hidden = vec![0.0; model.hidden_units];
    let mut sse = 0.0;
    for r in rows {
        model.standardize(&r.features, &mut z);
        let pred = model.forward_standardized(&z, &mut hidden);
        sse += (pred - r.target) * (pred - r.target);
    }
    let penalty: f64 =
        model.w1.iter().map(|w| w * w).sum::<f64>() + model.w2.iter().map(|w| w * w).sum::<f64>();
    sse / rows.len() as f64 + model.weight_decay * penalty
}

/// One pass over pre-standardized rows: accumulates the gradient into the
/// provided buffers and returns the regularized loss of the current
/// weights. `z_rows` is row-major `n x width`.
fn fused_loss_and_gradient(
    model: &NeuralNetModel,
    z_rows: &[f64],
    targets: &[f64],
    grad: &mut [f64],
    hidden: &mut [f64],
) -> f64 {
    let h = model.hidden_units;
    let width = model.input_mean.len();
    let n = targets.len() as f64;
    grad.fill(0.0);
    let (grad_w1, rest) = grad.split_at_mut(h * width);
    let (grad_b1, rest) = rest.split_at_mut(h);
    let (grad_w2, grad_b2) = rest.split_at_mut(h);
    let mut sse = 0.0;
    for (i, &y) in targets.iter().enumerate() {
        let z = &z_rows[i * width..(i + 1) * width];
        let pred = model.forward_standardized(z, hidden);
        let err = pred - y;
        sse += err * err;
        let g = 2.0 * err / n;
        grad_b2[0] += g;
        for j in 0..h {
            grad_w2[j] += g * hidden[j];
            let back = g * model.w2[j] * (1.0 - hidden[j] * hidden[j]);
            grad_b1[j] += back;
            let row = &mut grad_w1[j * width..(j + 1) * width];
            for (gk, &zk) in row.iter_mut().zip(z) {
                *gk += back * zk;
            }
        }
    }
    let mut penalty = 0.0;
    for (gw, w) in grad_w1.iter_mut().zip(&model.w1) {
        *gw += 2.0 * model.weight_decay * w;
        penalty += w * w;
    }
    for (gw, w) in grad_w2.iter_mut().zip(&model.w2) {
        *gw += 2.0 * model.weight_decay * w;
        penalty += w * w;
    }
    sse / n + model.weight_decay * penalty
}

fn standardized_rows(model: &NeuralNetModel, rows: &[FeatureRow]) -> (Vec<f64>, Vec<f64>) {
    let width = model.input_mean.len();
    let mut z = vec![0.0; rows.len() * width];
    let mut y = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        model.standardize(&r.features, &mut z[i * width..(i + 1) * width]);
        y.push(r.target);
    }
    (z, y)
}

/// Analytic gradient of `nn_loss` with respect to every parameter, in
/// `flat_parameters` order.
pub fn nn_gradient(model: &NeuralNetModel, rows: &[FeatureRow]) -> Vec<f64> {
    let (z, y) = standardized_rows(model, rows);
    let mut grad = vec![0.0; model.parameter_count()];
    let mut hidden = vec![0.0; model.hidden_units];
    fused_loss_and_gradient(model, &z, &y, &mut grad, &mut hidden);
    grad
}

/// Full-batch gradient descent from a seeded uniform init; the output bias
/// starts at the target mean. Deterministic per seed. Non-finite loss
/// aborts with the epoch and learning rate.
pub fn fit_nn(rows: &[FeatureRow], hyper: NnHyperparams) -> Result<NeuralNetModel> {
    if hyper.hidden_units < 1 {
        return Err(Error::Input("hidden_units must be at least 1".into()));
    }
    if hyper.epochs < 1 {
        return Err(Error::Input("epochs must be at least 1".into()));
    }
    if !(hyper.weight_decay >= 0.0) {
        return Err(Error::Input("weight_decay must be non-negative".into()));
    }
    if rows.is_empty() {
        return Err(Error::Input("cannot train on an empty row set".into()));
    }
    for r in rows {
        if r.features.len() != FEATURE_WIDTH {
            return Err(Error::Input("feature layout mismatch in training rows".into()));
        }
    }

    let n = rows.len() as f64;
    let mut mean = vec![0.0; FEATURE_WIDTH];
    for r in rows {
        for (m, &f) in mean.iter_mut().zip(&r.features) {
            *m += f;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut sd = vec![0.0; FEATURE_WIDTH];
    for r in rows {
        for (k, &f) in r.features.iter().enumerate() {
            sd[k] += (f - mean[k]) * (f - mean[k]);
        }
    }
    for s in &mut sd {
        *s = (*s / n).sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant column: leave it centred at zero
        }
    }

    let h = hyper.hidden_units;
    let mut rng = derive_rng(hyper.seed, "nn-init", &[h as u64]);
    let mut uniform = || rng.random_range(-0.5..0.5);
    let target_mean = rows.iter().map(|r| r.target).sum::<f64>() / n;
    let mut model = NeuralNetModel {
        hidden_units: h,
        weight_decay: hyper.weight_decay,
        w1: (0..FEATURE_WIDTH * h).map(|_| uniform()).collect(),
        b1: (0..h).map(|_| uniform()).collect(),
        w2: (0..h).map(|_| uniform()).collect(),
        b2: target_mean,
        input_mean: mean,
        input_sd: sd,
        hyperparams: hyper,
        loss_trace: (f64::NAN, f64::NAN),
    };

    let (z, y) = standardized_rows(&model, rows);
    let mut grad = vec![0.0; model.parameter_count()];
    let mut hidden = vec![0.0; h];
    for epoch in 1..=hyper.epochs {
        let loss = fused_loss_and_gradient(&model, &z, &y, &mut grad, &mut hidden);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, learning_rate: hyper.learning_rate });
        }
        if epoch == 1 {
            model.loss_trace.0 = loss;
        }
        let mut params = model.flat_parameters();
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= hyper.learning_rate * g;
        }
        model.set_flat_parameters(&params);
    }
    let final_loss = nn_loss(&model, rows);
    if !final_loss.is_finite() {
        return Err(Error::Divergence { epoch: hyper.epochs, learning_rate: hyper.learning_rate });
    }
    model.loss_trace.1 = final_loss;
    Ok(model)
}

/// Versioned textual dump; floats round-trip bit-exact.
pub fn save_nn(model: &NeuralNetModel, path: &Path) -> Result<()> {
    let mut out = String::from("linkcast-model v1 nn\n");
    out.push_str(&format!("input_dim {FEATURE_WIDTH}\n"));
    out.push_str(&format!("hidden_units {}\n", model.hidden_units));
    out.push_str(&format!("weight_decay {}\n", model.weight_decay));
    let dump = |label: &str, values: &[f64]| {
        let joined: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        format!("{label} {}\n", joined.join(","))
    };
    out.push_str(&dump("input_mean", &model.input_mean));
    out.push_str(&dump("input_sd", &model.input_sd));
    out.push_str(&dump("w1", &model.w1));
    out.push_str(&dump("b1", &model.b1));
    out.push_str(&dump("w2", &model.w2));
    out.push_str(&format!("b2 {}\n", model.b2));
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_nn(path: &Path) -> Result<NeuralNetModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("linkcast-model v1 nn") {
        return Err(Error::Parse(format!("{}: not a v1 nn dump", path.display())));
    }
    let mut field = |label: &str| -> Result<String> {
        lines
            .next()
            .and_then(|l| l.strip_prefix(label).map(|v| v.trim().to_string()))
            .ok_or_else(|| Error::Parse(format!("{}: missing field {label}", path.display())))
    };
    let parse_vec = |s: String| -> Result<Vec<f64>> {
        s.split(',')
            .map(|v| v.parse().map_err(|e| Error::Parse(format!("{e}"))))
            .collect()
    };
    let input_dim: usize = field("input_dim ")?.parse().map_err(|e| Error::Parse(format!("{e}")))?;
    if input_dim != FEATURE_WIDTH {
        return Err(Error::Parse(format!(
            "{}: feature layout differs (input_dim {input_dim} != {FEATURE_WIDTH})",
            path.display()
        )));
    }
    let hidden_units: usize = field("hidden_units ")?.parse().map_err(|e| Error::Parse(format!("{e}")))?;
    let weight_decay: f64 = field("weight_decay ")?.parse().map_err(|e| Error::Parse(format!("{e}")))?;
    let input_mean = parse_vec(field("input_mean ")?)?;
    let input_sd = parse_vec(field("input_sd ")?)?;
    let w1 = parse_vec(field("w1 ")?)?;
    let b1 = parse_vec(field("b1 ")?)?;
    let w2 = parse_vec(field("w2 ")?)?;
    let b2: f64 = field("b2 ")?.parse().map_err(|e| Error::Parse(format!("{e}")))?;
    if w1.len() != FEATURE_WIDTH * hidden_units || b1.len() != hidden_units || w2.len() != hidden_units {
        return Err(Error::Parse(format!("{}: weight shapes are inconsistent", path.display())));
    }
    Ok(NeuralNetModel {
        hidden_units,
        weight_decay,
        w1,
        b1,
        w2,
        b2,
        input_mean,
        input_sd,
        hyperparams: NnHyperparams { hidden_units, weight_decay, ..NnHyperparams::default() },
        loss_trace: (f64::NAN, f64::NAN),
    })
}
