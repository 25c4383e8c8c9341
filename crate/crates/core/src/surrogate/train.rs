use std::collections::HashSet;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetMetadata, SurrogateNet};
use crate::stochastic::SampleSet;
use crate::{Error, Result};

/// Stochastic gradient descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    pub seed: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning rate multiplier applied after every epoch.
    pub lr_decay: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Epochs always run before early stopping may trigger.
    pub min_epochs: usize,
    /// Share of the data held out for testing.
    pub test_fraction: f64,
    /// Share of the remaining data used for early-stopping validation.
    pub validation_fraction: f64,
    /// Epoch interval of the recorded error history.
    pub history_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 10,
            seed: 0,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay: 0.99995,
            max_epochs: 50_000,
            patience: 500,
            min_epochs: 2000,
            test_fraction: 0.2,
            validation_fraction: 0.25,
            history_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("training settings: {m}")));
        if self.hidden == 0 {
            return bad("hidden width must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.history_every == 0 {
            return bad("batch size, epoch budget and history interval must be positive");
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) || !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("need learning_rate > 0, 0 <= momentum < 1 and 0 < lr_decay <= 1");
        }
        if !(0.0..1.0).contains(&self.test_fraction) || !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("split fractions must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Errors are mean squared errors in normalized output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_mse: f64,
    pub validation_mse: f64,
    pub test_mse: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub initial_learning_rate: f64,
    pub final_learning_rate: f64,
    pub lr_decay: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    /// `(train, validation, test)` shares of the deduplicated data.
    pub split: (f64, f64, f64),
    pub duplicates_removed: usize,
    /// `(epoch, train, validation, test)` MSE samples.
    pub history: Vec<(usize, f64, f64, f64)>,
    pub warnings: Vec<String>,
}

struct Data {
    u: Vec<Vec<f64>>,
    y: Vec<f64>,
}

/// Fits a net to an evaluated sample set.
///
/// Exact duplicate rows are dropped first, the data are split with a seeded
/// shuffle, scaling bounds are frozen from the training rows and weights
/// are fitted by mini-batch SGD with momentum. The weights with the lowest
/// validation error are returned.
pub fn train(samples: &SampleSet, config: &TrainConfig) -> Result<(SurrogateNet, TrainReport)> {
    config.validate()?;
    if !samples.is_evaluated() {
        return Err(Error::InsufficientData("sample set has no limit-state values".into()));
    }
    let n_in = samples.dim();
    let mut warnings = Vec::new();

    let mut seen = HashSet::new();
    let mut rows: Vec<usize> = Vec::with_capacity(samples.len());
    for (i, x) in samples.x.iter().enumerate() {
        let key: Vec<u64> = x.iter().chain(std::iter::once(&samples.g[i])).map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            rows.push(i);
        }
    }
    let duplicates_removed = samples.len() - rows.len();
    let n = rows.len();
    if n < n_in + 2 {
        return Err(Error::InsufficientData(format!("{n} distinct samples for {n_in} inputs; need at least {}", n_in + 2)));
    }
    if n < 10 * config.hidden {
        let msg = format!("{n} samples for {} hidden units; at least {} recommended", config.hidden, 10 * config.hidden);
        warn!("{msg}");
        warnings.push(msg);
    }

    let mut hasher = Sha256::new();
    for name in &samples.names {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    for &r in &rows {
        for v in samples.x[r].iter().chain(std::iter::once(&samples.g[r])) {
            hasher.update(v.to_le_bytes());
        }
    }
    let digest: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

    let mut x_min = vec![f64::INFINITY; n_in];
    let mut x_max = vec![f64::NEG_INFINITY; n_in];
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &r in &rows {
        for i in 0..n_in {
            x_min[i] = x_min[i].min(samples.x[r][i]);
            x_max[i] = x_max[i].max(samples.x[r][i]);
        }
        y_min = y_min.min(samples.g[r]);
        y_max = y_max.max(samples.g[r]);
    }

    // Rows on the bounding box always go to the training part, so the frozen
    // bounds are those of the training data and held-out rows never need
    // extrapolation.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order = rows.clone();
    order.shuffle(&mut rng);
    let on_box = |r: usize| {
        samples.g[r] == y_min
            || samples.g[r] == y_max
            || (0..n_in).any(|i| samples.x[r][i] == x_min[i] || samples.x[r][i] == x_max[i])
    };
    let (mut order, inner): (Vec<usize>, Vec<usize>) = order.into_iter().partition(|&r| on_box(r));
    order.extend(inner);
    let n_test = ((n as f64) * config.test_fraction).round() as usize;
    let n_val = (((n - n_test) as f64) * config.validation_fraction).round() as usize;
    let n_train = n - n_test - n_val;
    if n_train < 2 {
        return Err(Error::InsufficientData(format!("only {n_train} training rows after the split")));
    }
    let (train_rows, rest) = order.split_at(n_train);
    let (val_rows, test_rows) = rest.split_at(n_val);

    let widen = |lo: &mut f64, hi: &mut f64| {
        if !(*lo < *hi) {
            let d = lo.abs().max(1.0) * 1e-6;
            *lo -= d;
            *hi += d;
        }
    };
    for i in 0..n_in {
        widen(&mut x_min[i], &mut x_max[i]);
    }
    widen(&mut y_min, &mut y_max);

    let mut net = SurrogateNet::zeros(config.hidden, x_min, x_max, y_min, y_max)?;
    net.meta = NetMetadata { seed: config.seed, training_digest: digest, input_names: samples.names.clone() };
    let data = |rs: &[usize]| Data {
        u: rs.iter().map(|&r| net.normalize_input(&samples.x[r])).collect(),
        y: rs.iter().map(|&r| net.normalize_output(samples.g[r])).collect(),
    };
    let (train_set, val_set, test_set) = (data(train_rows), data(val_rows), data(test_rows));

    let j = config.hidden;
    let a_in = (3.0 / n_in as f64).sqrt();
    let a_out = (3.0 / j as f64).sqrt();
    for w in net.w_hidden.iter_mut() {
        *w = rng.random_range(-a_in..a_in);
    }
    for b in net.b_hidden.iter_mut() {
        *b = rng.random_range(-a_in..a_in);
    }
    for w in net.w_out.iter_mut() {
        *w = rng.random_range(-a_out..a_out);
    }

    let n_params = j * n_in + 2 * j + 1;
    let mut velocity = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let mut best = net.clone();
    let monitor = if val_set.y.is_empty() { &train_set } else { &val_set };
    let mut best_err = mse(&net, monitor);
    let mut best_epoch = 0;
    let mut lr = config.learning_rate;
    let mut idx: Vec<usize> = (0..n_train).collect();
    let mut history = Vec::new();
    let mut epochs = 0;
    let mut stopped_early = false;
    let mut z = vec![0.0; j];

    for epoch in 1..=config.max_epochs {
        epochs = epoch;
        idx.shuffle(&mut rng);
        for batch in idx.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &s in batch {
                let u = &train_set.u[s];
                for (k, zk) in z.iter_mut().enumerate() {
                    let row = &net.w_hidden[k * n_in..(k + 1) * n_in];
                    *zk = (row.iter().zip(u).map(|(w, v)| w * v).sum::<f64>() + net.b_hidden[k]).tanh();
                }
                let out = z.iter().zip(&net.w_out).map(|(a, b)| a * b).sum::<f64>() + net.b_out;
                let e = 2.0 * (out - train_set.y[s]) / batch.len() as f64;
                for k in 0..j {
                    let back = e * net.w_out[k] * (1.0 - z[k] * z[k]);
                    let gw = &mut grad[k * n_in..(k + 1) * n_in];
                    for (g, v) in gw.iter_mut().zip(u) {
                        *g += back * v;
                    }
                    grad[j * n_in + k] += back;
                    grad[j * n_in + j + k] += e * z[k];
                }
                grad[n_params - 1] += e;
            }
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = config.momentum * *v - lr * g;
            }
            let (wh, rest) = velocity.split_at(j * n_in);
            net.w_hidden.iter_mut().zip(wh).for_each(|(w, v)| *w += v);
            net.b_hidden.iter_mut().zip(&rest[..j]).for_each(|(w, v)| *w += v);
            net.w_out.iter_mut().zip(&rest[j..2 * j]).for_each(|(w, v)| *w += v);
            net.b_out += rest[2 * j];
        }
        lr *= config.lr_decay;

        let err = mse(&net, monitor);
        if err < best_err {
            best_err = err;
            best_epoch = epoch;
            best.clone_from(&net);
        }
        if epoch % config.history_every == 0 {
            history.push((epoch, mse(&net, &train_set), mse(&net, &val_set), mse(&net, &test_set)));
        }
        if epoch >= config.min_epochs && epoch - best_epoch >= config.patience {
            stopped_early = true;
            break;
        }
        if !err.is_finite() {
            warnings.push(format!("training diverged at epoch {epoch}"));
            break;
        }
    }

    let report = TrainReport {
        train_mse: mse(&best, &train_set),
        validation_mse: mse(&best, &val_set),
        test_mse: mse(&best, &test_set),
        epochs,
        best_epoch,
        stopped_early,
        initial_learning_rate: config.learning_rate,
        final_learning_rate: lr,
        lr_decay: config.lr_decay,
        n_train,
        n_validation: n_val,
        n_test,
        split: (n_train as f64 / n as f64, n_val as f64 / n as f64, n_test as f64 / n as f64),
        duplicates_removed,
        history,
        warnings,
    };
    Ok((best, report))
}

/// Mean squared error in normalized units; zero for an empty set.
fn mse(net: &SurrogateNet, data: &Data) -> f64 {
    if data.y.is_empty() {
        return 0.0;
    }
    data.u.iter().zip(&data.y).map(|(u, y)| (net.forward_normalized(u) - y).powi(2)).sum::<f64>() / data.y.len() as f64
}
