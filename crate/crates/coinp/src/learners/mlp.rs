//! Feedforward network regression trained with minibatch gradient descent.
//!
//! Architecture: fully connected layers with ELU activations (optionally
//! batch-normalised and with dropout on hidden activations) and a linear
//! output. Training uses the Adamax update, gradient-norm clipping, early
//! stopping on a held-back validation slice with best-weight restore, and
//! learning-rate halving when the validation loss plateaus. Features and
//! labels are standardised internally with training statistics; predictions
//! are returned on the original label scale.
//!
//! All randomness (initialisation, validation split, epoch shuffling,
//! dropout masks) comes from one stream derived from the fit seed, so a fit
//! is reproducible bit for bit.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{Learner, Predictor};
use crate::seed;

/// The hidden-layer activation. Only ELU is built in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    #[default]
    Elu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    /// Hidden layer widths, e.g. `[32, 32]`.
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before training stops.
    pub patience: usize,
    /// Fraction of the training data held back for early stopping.
    pub validation_fraction: f64,
    /// Dropout rate on hidden activations, in [0, 1). 0 disables dropout.
    pub dropout_rate: f64,
    /// Batch-normalise hidden pre-activations.
    pub batch_norm: bool,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_layers: vec![32, 32],
            activation: Activation::Elu,
            learning_rate: 0.01,
            max_epochs: 200,
            patience: 50,
            validation_fraction: 0.1,
            dropout_rate: 0.0,
            batch_norm: false,
            batch_size: 32,
        }
    }
}

impl MlpParams {
    /// The large configuration: five hidden layers of 100 units, batch norm
    /// and dropout enabled. Slower and less stable than the default; the
    /// rank-based tests do not need the extra capacity.
    pub fn large() -> Self {
        MlpParams {
            hidden_layers: vec![100; 5],
            learning_rate: 0.002,
            max_epochs: 500,
            dropout_rate: 0.5,
            batch_norm: true,
            ..MlpParams::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::invalid("hidden_layers must all have width >= 1"));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return Err(Error::invalid(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Mlp {
    pub params: MlpParams,
}

impl Learner for Mlp {
    fn name(&self) -> &str {
        "mlp"
    }

    fn fit(&self, train: &Dataset, seed: u64) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(fit_mlp(train, &self.params, seed)?))
    }
}

/// Flattened parameter layout: per layer `W` then `b`, and for hidden
/// layers with batch norm additionally `gamma` then `beta`.
#[derive(Clone, Debug)]
struct Network {
    sizes: Vec<usize>,
    batch_norm: bool,
    params: Vec<f64>,
    running_mean: Vec<Vec<f64>>,
    running_var: Vec<Vec<f64>>,
}

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

struct LayerOffsets {
    w: usize,
    b: usize,
    gamma: Option<usize>,
    beta: Option<usize>,
}

impl Network {
    fn new(sizes: Vec<usize>, batch_norm: bool, rng: &mut impl Rng) -> Network {
        let n_layers = sizes.len() - 1;
        let mut params = Vec::new();
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let sd = (2.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(rng);
                params.push(z * sd);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
            if batch_norm && l + 1 < n_layers {
                params.extend(std::iter::repeat_n(1.0, fan_out)); // gamma
                params.extend(std::iter::repeat_n(0.0, fan_out)); // beta
            }
        }
        let running_mean = (0..n_layers.saturating_sub(1)).map(|l| vec![0.0; sizes[l + 1]]).collect();
        let running_var = (0..n_layers.saturating_sub(1)).map(|l| vec![1.0; sizes[l + 1]]).collect();
        Network {
            sizes,
            batch_norm,
            params,
            running_mean,
            running_var,
        }
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn offsets(&self, layer: usize) -> LayerOffsets {
        let mut at = 0;
        for l in 0..layer {
            at += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            if self.batch_norm && l + 1 < self.n_layers() {
                at += 2 * self.sizes[l + 1];
            }
        }
        let w = at;
        let b = w + self.sizes[layer] * self.sizes[layer + 1];
        let (gamma, beta) = if self.batch_norm && layer + 1 < self.n_layers() {
            (
                Some(b + self.sizes[layer + 1]),
                Some(b + 2 * self.sizes[layer + 1]),
            )
        } else {
            (None, None)
        };
        LayerOffsets { w, b, gamma, beta }
    }

    /// Forward pass in inference mode for a batch stored row-major.
    fn predict_standardized(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..self.n_layers() {
            let off = self.offsets(l);
            let (d_in, d_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = vec![0.0; batch * d_out];
            for bi in 0..batch {
                for o in 0..d_out {
                    let mut acc = self.params[off.b + o];
                    let wrow = &self.params[off.w + o * d_in..off.w + (o + 1) * d_in];
                    for i in 0..d_in {
                        acc += wrow[i] * a[bi * d_in + i];
                    }
                    z[bi * d_out + o] = acc;
                }
            }
            if l + 1 < self.n_layers() {
                if let (Some(g), Some(be)) = (off.gamma, off.beta) {
                    for bi in 0..batch {
                        for o in 0..d_out {
                            let norm = (z[bi * d_out + o] - self.running_mean[l][o])
                                / (self.running_var[l][o] + BN_EPS).sqrt();
                            z[bi * d_out + o] = self.params[g + o] * norm + self.params[be + o];
                        }
                    }
                }
                for v in z.iter_mut() {
                    *v = elu(*v);
                }
            }
            a = z;
        }
        a
    }
}

fn elu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        v.exp() - 1.0
    }
}

fn elu_grad(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        v.exp()
    }
}

/// One training-mode forward/backward pass over a minibatch. Returns the
/// batch MSE and the gradient w.r.t. every parameter. Updates running
/// batch-norm statistics when `update_running` is set.
fn forward_backward(
    net: &mut Network,
    x: &[f64],
    y: &[f64],
    batch: usize,
    dropout_rate: f64,
    rng: &mut impl Rng,
    update_running: bool,
) -> (f64, Vec<f64>) {
    let n_layers = net.n_layers();
    let mut grads = vec![0.0; net.params.len()];

    // forward, keeping per-layer caches
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers); // layer input activations
    let mut pre_acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers); // activation inputs (post-BN)
    let mut normed: Vec<Vec<f64>> = Vec::with_capacity(n_layers); // BN-normalised z
    let mut stats: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(n_layers); // batch mean/var
    let mut masks: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
    let mut a = x.to_vec();
    for l in 0..n_layers {
        let off = net.offsets(l);
        let (d_in, d_out) = (net.sizes[l], net.sizes[l + 1]);
        inputs.push(a.clone());
        let mut z = vec![0.0; batch * d_out];
        for bi in 0..batch {
            for o in 0..d_out {
                let mut acc = net.params[off.b + o];
                let wrow = &net.params[off.w + o * d_in..off.w + (o + 1) * d_in];
                for i in 0..d_in {
                    acc += wrow[i] * a[bi * d_in + i];
                }
                z[bi * d_out + o] = acc;
            }
        }
        let hidden = l + 1 < n_layers;
        let (mut zn, mut mu, mut var) = (Vec::new(), Vec::new(), Vec::new());
        if hidden && net.batch_norm {
            mu = vec![0.0; d_out];
            var = vec![0.0; d_out];
            for o in 0..d_out {
                let mean = (0..batch).map(|bi| z[bi * d_out + o]).sum::<f64>() / batch as f64;
                let v = (0..batch)
                    .map(|bi| (z[bi * d_out + o] - mean).powi(2))
                    .sum::<f64>()
                    / batch as f64;
                mu[o] = mean;
                var[o] = v;
                if update_running {
                    net.running_mean[l][o] =
                        (1.0 - BN_MOMENTUM) * net.running_mean[l][o] + BN_MOMENTUM * mean;
                    net.running_var[l][o] =
                        (1.0 - BN_MOMENTUM) * net.running_var[l][o] + BN_MOMENTUM * v;
                }
            }
            zn = vec![0.0; batch * d_out];
            let (g, be) = (off.gamma.unwrap(), off.beta.unwrap());
            for bi in 0..batch {
                for o in 0..d_out {
                    let norm = (z[bi * d_out + o] - mu[o]) / (var[o] + BN_EPS).sqrt();
                    zn[bi * d_out + o] = norm;
                    z[bi * d_out + o] = net.params[g + o] * norm + net.params[be + o];
                }
            }
        }
        normed.push(zn);
        stats.push((mu, var));
        pre_acts.push(z.clone());
        let mut mask = Vec::new();
        if hidden {
            for v in z.iter_mut() {
                *v = elu(*v);
            }
            if dropout_rate > 0.0 {
                let keep = 1.0 - dropout_rate;
                mask = (0..z.len())
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (v, m) in z.iter_mut().zip(&mask) {
                    *v *= m;
                }
            }
        }
        masks.push(mask);
        a = z;
    }

    let loss = (0..batch).map(|bi| (a[bi] - y[bi]).powi(2)).sum::<f64>() / batch as f64;

    // backward
    let mut delta: Vec<f64> = (0..batch).map(|bi| 2.0 * (a[bi] - y[bi]) / batch as f64).collect();
    for l in (0..n_layers).rev() {
        let off = net.offsets(l);
        let (d_in, d_out) = (net.sizes[l], net.sizes[l + 1]);
        let hidden = l + 1 < n_layers;
        let mut dz = delta;
        if hidden {
            if !masks[l].is_empty() {
                for (v, m) in dz.iter_mut().zip(&masks[l]) {
                    *v *= m;
                }
            }
            for (v, pre) in dz.iter_mut().zip(&pre_acts[l]) {
                *v *= elu_grad(*pre);
            }
            if net.batch_norm {
                let (g, be) = (off.gamma.unwrap(), off.beta.unwrap());
                let zn = &normed[l];
                let var = &stats[l].1;
                let mut dzn = vec![0.0; batch * d_out];
                for o in 0..d_out {
                    let mut dgamma = 0.0;
                    let mut dbeta = 0.0;
                    for bi in 0..batch {
                        let d = dz[bi * d_out + o];
                        dgamma += d * zn[bi * d_out + o];
                        dbeta += d;
                        dzn[bi * d_out + o] = d * net.params[g + o];
                    }
                    grads[g + o] += dgamma;
                    grads[be + o] += dbeta;
                    let sum_dzn: f64 = (0..batch).map(|bi| dzn[bi * d_out + o]).sum();
                    let sum_dzn_zn: f64 = (0..batch)
                        .map(|bi| dzn[bi * d_out + o] * zn[bi * d_out + o])
                        .sum();
                    let inv_sd = 1.0 / (var[o] + BN_EPS).sqrt();
                    for bi in 0..batch {
                        dz[bi * d_out + o] = inv_sd / batch as f64
                            * (batch as f64 * dzn[bi * d_out + o]
                                - sum_dzn
                                - zn[bi * d_out + o] * sum_dzn_zn);
                    }
                }
            }
        }
        let x_l = &inputs[l];
        let mut dx = vec![0.0; batch * d_in];
        for bi in 0..batch {
            for o in 0..d_out {
                let d = dz[bi * d_out + o];
                grads[off.b + o] += d;
                for i in 0..d_in {
                    grads[off.w + o * d_in + i] += d * x_l[bi * d_in + i];
                    dx[bi * d_in + i] += d * net.params[off.w + o * d_in + i];
                }
            }
        }
        delta = dx;
    }
    (loss, grads)
}

struct Standardizer {
    mean: Vec<f64>,
    sd: Vec<f64>,
    y_mean: f64,
    y_sd: f64,
}

impl Standardizer {
    fn fit(train: &Dataset) -> Standardizer {
        let (n, p) = (train.n_rows() as f64, train.n_features());
        let mut mean = vec![0.0; p];
        let mut sd = vec![0.0; p];
        for i in 0..train.n_rows() {
            for (j, v) in train.row(i).iter().enumerate() {
                mean[j] += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        for i in 0..train.n_rows() {
            for (j, v) in train.row(i).iter().enumerate() {
                sd[j] += (v - mean[j]).powi(2);
            }
        }
        for s in sd.iter_mut() {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        let y_mean = train.labels().iter().sum::<f64>() / n;
        let mut y_sd = (train.labels().iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        if y_sd == 0.0 {
            y_sd = 1.0;
        }
        Standardizer {
            mean,
            sd,
            y_mean,
            y_sd,
        }
    }

    fn row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.extend(
            row.iter()
                .enumerate()
                .map(|(j, v)| (v - self.mean[j]) / self.sd[j]),
        );
    }
}

pub struct MlpModel {
    net: Network,
    standardizer: Standardizer,
}

impl Predictor for MlpModel {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut x = Vec::with_capacity(row.len());
        self.standardizer.row(row, &mut x);
        let out = self.net.predict_standardized(&x, 1);
        self.standardizer.y_mean + self.standardizer.y_sd * out[0]
    }
}

const GRAD_CLIP_NORM: f64 = 10.0;
const MIN_LEARNING_RATE: f64 = 1e-6;

/// Parameters plus batch-norm running statistics, for best-epoch restore.
type NetworkSnapshot = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);

pub fn fit_mlp(train: &Dataset, params: &MlpParams, fit_seed: u64) -> Result<MlpModel> {
    params.validate()?;
    if params.max_epochs == 0 {
        return Err(Error::Training(
            "max_epochs is 0; at least one epoch must run".into(),
        ));
    }
    let n = train.n_rows();
    if n < 10 {
        return Err(Error::Training(format!(
            "need at least 10 training rows for the validation split, got {n}"
        )));
    }
    let p = train.n_features();
    let mut rng = seed::rng(fit_seed);

    let standardizer = Standardizer::fit(train);
    let mut xs = Vec::with_capacity(n * p);
    for i in 0..n {
        standardizer.row(train.row(i), &mut xs);
    }
    let ys: Vec<f64> = train
        .labels()
        .iter()
        .map(|y| (y - standardizer.y_mean) / standardizer.y_sd)
        .collect();

    // validation split for early stopping
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        indices.swap(i, j);
    }
    let n_val = ((n as f64 * params.validation_fraction).round() as usize).clamp(1, n - 1);
    let (val_idx, fit_idx) = indices.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let mut fit_idx = fit_idx.to_vec();

    let mut sizes = Vec::with_capacity(params.hidden_layers.len() + 2);
    sizes.push(p);
    sizes.extend_from_slice(&params.hidden_layers);
    sizes.push(1);
    let mut net = Network::new(sizes, params.batch_norm, &mut rng);

    // Adamax state
    let mut m = vec![0.0; net.params.len()];
    let mut u = vec![0.0; net.params.len()];
    let (beta1, beta2): (f64, f64) = (0.9, 0.999);
    let mut step = 0u32;
    let mut lr = params.learning_rate;

    let val_loss = |net: &Network, xs: &[f64], ys: &[f64]| -> f64 {
        let mut x = Vec::with_capacity(val_idx.len() * p);
        let mut y = Vec::with_capacity(val_idx.len());
        for &i in &val_idx {
            x.extend_from_slice(&xs[i * p..(i + 1) * p]);
            y.push(ys[i]);
        }
        let out = net.predict_standardized(&x, val_idx.len());
        out.iter().zip(&y).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / y.len() as f64
    };

    let mut best = f64::INFINITY;
    let mut best_state: Option<NetworkSnapshot> = None;
    let mut stall = 0usize;
    let mut lr_stall = 0usize;
    let lr_patience = (params.patience / 2).max(1);

    for _epoch in 0..params.max_epochs {
        for i in (1..fit_idx.len()).rev() {
            let j = rng.random_range(0..=i);
            fit_idx.swap(i, j);
        }
        for chunk in fit_idx.chunks(params.batch_size) {
            let mut x = Vec::with_capacity(chunk.len() * p);
            let mut y = Vec::with_capacity(chunk.len());
            for &i in chunk {
                x.extend_from_slice(&xs[i * p..(i + 1) * p]);
                y.push(ys[i]);
            }
            let (loss, mut grads) = forward_backward(
                &mut net,
                &x,
                &y,
                chunk.len(),
                params.dropout_rate,
                &mut rng,
                true,
            );
            if !loss.is_finite() {
                return Err(Error::Training("non-finite minibatch loss".into()));
            }
            let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > GRAD_CLIP_NORM {
                let scale = GRAD_CLIP_NORM / norm;
                for g in grads.iter_mut() {
                    *g *= scale;
                }
            }
            step += 1;
            let correction = 1.0 - beta1.powi(step as i32);
            for k in 0..net.params.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * grads[k];
                u[k] = (beta2 * u[k]).max(grads[k].abs());
                net.params[k] -= lr / correction * m[k] / (u[k] + 1e-12);
            }
        }
        let vl = val_loss(&net, &xs, &ys);
        if !vl.is_finite() {
            return Err(Error::Training("non-finite validation loss".into()));
        }
        if vl < best {
            best = vl;
            best_state = Some((
                net.params.clone(),
                net.running_mean.clone(),
                net.running_var.clone(),
            ));
            stall = 0;
            lr_stall = 0;
        } else {
            stall += 1;
            lr_stall += 1;
            if lr_stall >= lr_patience && lr > MIN_LEARNING_RATE {
                lr = (lr * 0.5).max(MIN_LEARNING_RATE);
                lr_stall = 0;
            }
            if stall >= params.patience {
                break;
            }
        }
    }
    if let Some((p, rm, rv)) = best_state {
        net.params = p;
        net.running_mean = rm;
        net.running_var = rv;
    }
    Ok(MlpModel { net, standardizer })
}

/// Numerical auditing of the backward pass.
pub mod diagnostics {
    use super::*;

    /// Largest relative disagreement between the analytic gradient and a
    /// central finite difference, over every parameter of a freshly
    /// initialised network on `train` taken as one batch. Dropout is
    /// disabled (its masks would decouple the two evaluations); batch norm
    /// is exercised if `params.batch_norm` is set.
    pub fn gradient_max_rel_error(params: &MlpParams, train: &Dataset, seed: u64) -> f64 {
        let p = train.n_features();
        let n = train.n_rows();
        let mut rng = seed::rng(seed);
        let mut sizes = vec![p];
        sizes.extend_from_slice(&params.hidden_layers);
        sizes.push(1);
        let mut net = Network::new(sizes, params.batch_norm, &mut rng);
        let standardizer = Standardizer::fit(train);
        let mut xs = Vec::with_capacity(n * p);
        for i in 0..n {
            standardizer.row(train.row(i), &mut xs);
        }
        let ys: Vec<f64> = train
            .labels()
            .iter()
            .map(|y| (y - standardizer.y_mean) / standardizer.y_sd)
            .collect();

        let mut probe_rng = seed::rng(0);
        let (_, analytic) =
            forward_backward(&mut net, &xs, &ys, n, 0.0, &mut probe_rng, false);
        let mut worst = 0.0f64;
        for k in 0..net.params.len() {
            let h = 1e-5 * net.params[k].abs().max(1.0);
            let orig = net.params[k];
            net.params[k] = orig + h;
            let (lp, _) = forward_backward(&mut net, &xs, &ys, n, 0.0, &mut probe_rng, false);
            net.params[k] = orig - h;
            let (lm, _) = forward_backward(&mut net, &xs, &ys, n, 0.0, &mut probe_rng, false);
            net.params[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let denom = analytic[k].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[k] - numeric).abs() / denom);
        }
        worst
    }
}
