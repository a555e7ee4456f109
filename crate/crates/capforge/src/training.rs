//! Maximum-likelihood training with an attention-mass penalty, plain SGD
//! with classical momentum, and a halving learning-rate schedule.
//!
//! The loss for one example is
//!
//! ```text
//! -sum_j log p(w_j)  +  lambda * sum_i (1 - sum_j alpha_{j,i})^2
//! ```
//!
//! where `j` runs over time steps and `i` over annotation rows: next to the
//! negative log-likelihood, each annotation row is nudged toward receiving a
//! total attention mass of one over the caption. [`grad_check`] compares the
//! analytic gradients of [`crate::decoder::backward_sequence`] against
//! central finite differences, coordinate by coordinate.

use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::annotation::AnnotationSet;
use crate::decoder::{backward_sequence, forward_sequence, DecoderParams, StepTrace};
use crate::error::{Error, Result};

/// Hyperparameters of a training run. Mirrors the `key = value` config file
/// one to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub lr0: f64,
    /// Classical momentum coefficient.
    pub momentum: f64,
    pub batch_size: usize,
    /// Halve the learning rate after every this many iterations.
    pub halve_every: u64,
    /// Attention-penalty weight.
    pub lambda: f64,
    /// Total optimizer steps to take.
    pub max_iters: u64,
    /// Seed for shuffling (and, by convention, parameter init in the CLI).
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.01,
            momentum: 0.9,
            batch_size: 100,
            halve_every: 20_000,
            lambda: 1.0,
            max_iters: 100_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::InvalidConfigValue {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.lr0.is_nan() || self.lr0 <= 0.0 {
            return bad("lr0", "must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", "must satisfy 0 <= momentum < 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size", "must be >= 1");
        }
        if self.halve_every < 1 {
            return bad("halve_every", "must be >= 1");
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return bad("lambda", "must be >= 0");
        }
        Ok(())
    }

    /// Parses the flat `key = value` format. All seven keys must appear
    /// exactly once; unknown keys are errors. `#` lines are comments.
    pub fn read_from<R: BufRead>(r: R) -> Result<TrainConfig> {
        let mut config = TrainConfig::default();
        let mut seen = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::parse_at(idx + 1, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse_at(idx + 1, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            if seen.contains(&key.to_owned()) {
                return Err(Error::InvalidConfigValue {
                    key: key.into(),
                    msg: "duplicate key".into(),
                });
            }
            seen.push(key.to_owned());
            let invalid = |msg: &str| Error::InvalidConfigValue {
                key: key.into(),
                msg: msg.into(),
            };
            match key {
                "lr0" => config.lr0 = value.parse().map_err(|_| invalid("not a real"))?,
                "momentum" => config.momentum = value.parse().map_err(|_| invalid("not a real"))?,
                "batch_size" => {
                    config.batch_size = value.parse().map_err(|_| invalid("not an integer"))?
                }
                "halve_every" => {
                    config.halve_every = value.parse().map_err(|_| invalid("not an integer"))?
                }
                "lambda" => config.lambda = value.parse().map_err(|_| invalid("not a real"))?,
                "max_iters" => {
                    config.max_iters = value.parse().map_err(|_| invalid("not an integer"))?
                }
                "seed" => config.seed = value.parse().map_err(|_| invalid("not an integer"))?,
                other => {
                    return Err(Error::UnknownConfigKey { key: other.into() });
                }
            }
        }
        for key in [
            "lr0",
            "momentum",
            "batch_size",
            "halve_every",
            "lambda",
            "max_iters",
            "seed",
        ] {
            if !seen.iter().any(|s| s == key) {
                return Err(Error::InvalidConfigValue {
                    key: key.into(),
                    msg: "missing from config file".into(),
                });
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lr0 = {}", self.lr0)?;
        writeln!(w, "momentum = {}", self.momentum)?;
        writeln!(w, "batch_size = {}", self.batch_size)?;
        writeln!(w, "halve_every = {}", self.halve_every)?;
        writeln!(w, "lambda = {}", self.lambda)?;
        writeln!(w, "max_iters = {}", self.max_iters)?;
        writeln!(w, "seed = {}", self.seed)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file)).map_err(|e| e.with_path(path))
    }
}

/// Per-tensor velocity plus the iteration counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub velocity: DecoderParams,
    pub iter: u64,
}

impl OptimizerState {
    pub fn new(template: &DecoderParams) -> OptimizerState {
        OptimizerState {
            velocity: DecoderParams::zeros(template.dims),
            iter: 0,
        }
    }
}

/// One captioned training example: annotation matrix plus encoded caption
/// (terminated with the end id).
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub annotations: AnnotationSet,
    pub target_ids: Vec<usize>,
}

/// Regularized negative log-likelihood of one example given its forward
/// traces: the summed NLL of the target words plus
/// `lambda * sum_i (1 - sum_j alpha_{j,i})^2`.
pub fn loss(traces: &[StepTrace], target_ids: &[usize], lambda: f64) -> f64 {
    assert_eq!(traces.len(), target_ids.len(), "one trace per target id");
    let nll: f64 = traces
        .iter()
        .zip(target_ids)
        .map(|(trace, &word)| -trace.log_probs[word])
        .sum();
    let mut mass = Array1::<f64>::zeros(traces[0].alpha.len());
    for trace in traces {
        mass += &trace.alpha;
    }
    let penalty: f64 = mass.iter().map(|&s| (1.0 - s) * (1.0 - s)).sum();
    nll + lambda * penalty
}

/// Stepped learning rate: `lr0 * 0.5^(iter / halve_every)`.
pub fn lr_at(iter: u64, config: &TrainConfig) -> f64 {
    config.lr0 * 0.5f64.powi((iter / config.halve_every) as i32)
}

/// Classical momentum update, per tensor: `v <- momentum v + g`,
/// `p <- p - lr v`. A non-finite gradient coordinate halts training.
pub fn sgd_momentum_step(
    params: &mut DecoderParams,
    grads: &DecoderParams,
    opt: &mut OptimizerState,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient { name: name.into() });
    }
    for ((p, v), g) in params
        .visit_mut()
        .into_iter()
        .zip(opt.velocity.visit_mut())
        .zip(grads.visit())
    {
        for ((pv, vv), gv) in p.data.iter_mut().zip(v.data.iter_mut()).zip(g.data) {
            *vv = momentum * *vv + gv;
            *pv -= lr * *vv;
        }
    }
    opt.iter += 1;
    Ok(())
}

fn add_scaled(dst: &mut DecoderParams, src: &DecoderParams, scale: f64) {
    for (d, s) in dst.visit_mut().into_iter().zip(src.visit()) {
        for (dv, sv) in d.data.iter_mut().zip(s.data) {
            *dv += scale * sv;
        }
    }
}

/// Mean loss and summed gradient of a batch, reduced sequentially so the
/// result does not depend on scheduling.
fn batch_forward_backward(
    dataset: &[TrainExample],
    batch: &[usize],
    params: &DecoderParams,
    start_id: usize,
    lambda: f64,
) -> Result<(f64, DecoderParams)> {
    let mut grad_sum = DecoderParams::zeros(params.dims);
    let mut loss_sum = 0.0;
    for &idx in batch {
        let example = &dataset[idx];
        let traces = forward_sequence(&example.annotations, &example.target_ids, params, start_id)?;
        loss_sum += loss(&traces, &example.target_ids, lambda);
        let grads = backward_sequence(
            &example.annotations,
            &example.target_ids,
            params,
            &traces,
            start_id,
            lambda,
        )?;
        add_scaled(&mut grad_sum, &grads, 1.0);
    }
    let scale = 1.0 / batch.len() as f64;
    for t in grad_sum.visit_mut() {
        for v in t.data.iter_mut() {
            *v *= scale;
        }
    }
    Ok((loss_sum * scale, grad_sum))
}

/// Runs SGD with momentum for `config.max_iters` optimizer steps.
///
/// Each epoch reshuffles the dataset with the seeded RNG and walks it in
/// batches (the trailing short batch is kept). The returned history holds one
/// `(iteration, mean batch loss)` entry per step, with the loss measured
/// before the step. Fully deterministic given the seed.
pub fn train(
    dataset: &[TrainExample],
    config: &TrainConfig,
    params: DecoderParams,
    start_id: usize,
) -> Result<(DecoderParams, Vec<(u64, f64)>)> {
    assert!(!dataset.is_empty(), "dataset must be non-empty");
    config.validate()?;
    let mut params = params;
    let mut opt = OptimizerState::new(&params);
    let mut history = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    'epochs: loop {
        if opt.iter >= config.max_iters {
            break;
        }
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            if opt.iter >= config.max_iters {
                break 'epochs;
            }
            let (mean_loss, grads) =
                batch_forward_backward(dataset, batch, &params, start_id, config.lambda)?;
            let lr = lr_at(opt.iter, config);
            let iter_before = opt.iter;
            sgd_momentum_step(&mut params, &grads, &mut opt, lr, config.momentum)?;
            history.push((iter_before, mean_loss));
        }
    }
    Ok((params, history))
}

/// Largest relative disagreement between `analytic` and central finite
/// differences of the loss, over every parameter coordinate.
fn max_relative_error(
    params: &DecoderParams,
    example: &TrainExample,
    start_id: usize,
    lambda: f64,
    epsilon: f64,
    analytic: &DecoderParams,
) -> Result<f64> {
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let n_tensors = params.visit().len();
    for t_idx in 0..n_tensors {
        let coords = params.visit()[t_idx].data.len();
        for k in 0..coords {
            let numeric = {
                let eval = |p: &DecoderParams| -> Result<f64> {
                    let traces =
                        forward_sequence(&example.annotations, &example.target_ids, p, start_id)?;
                    Ok(loss(&traces, &example.target_ids, lambda))
                };
                let original = probe.visit()[t_idx].data[k];
                probe.visit_mut()[t_idx].data[k] = original + epsilon;
                let plus = eval(&probe)?;
                probe.visit_mut()[t_idx].data[k] = original - epsilon;
                let minus = eval(&probe)?;
                probe.visit_mut()[t_idx].data[k] = original;
                (plus - minus) / (2.0 * epsilon)
            };
            let a = analytic.visit()[t_idx].data[k];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Central-finite-difference check of the analytic gradient on one example.
/// Returns the maximum relative error over all parameter coordinates; healthy
/// gradients land well below 1e-4 at `epsilon = 1e-5` in double precision.
pub fn grad_check(
    params: &DecoderParams,
    example: &TrainExample,
    start_id: usize,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    let traces = forward_sequence(&example.annotations, &example.target_ids, params, start_id)?;
    let analytic = backward_sequence(
        &example.annotations,
        &example.target_ids,
        params,
        &traces,
        start_id,
        lambda,
    )?;
    max_relative_error(params, example, start_id, lambda, epsilon, &analytic)
}

/// Writes the loss history as `iter<TAB>loss` lines.
pub fn write_loss_history<W: Write>(mut w: W, history: &[(u64, f64)]) -> std::io::Result<()> {
    for (iter, loss) in history {
        writeln!(w, "{iter}\t{loss}")?;
    }
    Ok(())
}
