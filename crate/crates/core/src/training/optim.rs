//! Batch adaptive-step descent, minibatch RMSprop and multistart.

use std::time::Instant;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::{group_pairs, random_groups, Dissimilarities, Pair, PairSet, PhiTransform};
use crate::error::{Error, Result};
use crate::focalsets::FocalSets;
use crate::network::NetworkParams;
use crate::training::objective::{LossBreakdown, LossWeights, Objective};
use crate::training::{ConstraintSet, LabelSet};

/// Offset between the seeds of consecutive restarts.
const RESTART_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Inputs shared by every restart.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub focal: &'a FocalSets,
    /// Network inputs, one row per object.
    pub inputs: ArrayView2<'a, f64>,
    pub svm_scores: Option<&'a [f64]>,
    /// Raw dissimilarities, used to build minibatch and validation pairs.
    pub source: &'a Dissimilarities,
    pub phi: PhiTransform,
    /// Pairs of the batch loss; also used to rank restarts.
    pub pairs: &'a PairSet,
    pub constraints: Option<&'a ConstraintSet>,
    pub labels: Option<&'a LabelSet>,
}

impl<'a> TrainingData<'a> {
    fn objective<'b>(&'b self, pairs: &'b PairSet, weights: LossWeights) -> Objective<'b> {
        Objective {
            focal: self.focal,
            inputs: self.inputs,
            svm_scores: self.svm_scores,
            pairs,
            constraints: self.constraints,
            labels: self.labels,
            weights,
        }
    }

    fn pair(&self, i: usize, j: usize) -> Pair {
        Pair { i, j, target: self.phi.apply(self.source.get(i, j)) }
    }

    fn validate(&self) -> Result<()> {
        let n = self.inputs.nrows();
        if self.source.len() != n {
            return Err(Error::dims(n, self.source.len(), "dissimilarity objects"));
        }
        if n < 2 {
            return Err(Error::invalid("at least two objects are required"));
        }
        Ok(())
    }
}

/// Adaptive per-parameter step sizes with backtracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchOptions {
    pub max_epochs: usize,
    pub initial_step: f64,
    /// Step multiplier when the gradient keeps its sign.
    pub increase: f64,
    /// Step multiplier when the gradient changes sign or a step is rejected.
    pub decrease: f64,
    /// Optional upper bound on any step size.
    pub max_step: Option<f64>,
    /// Stop once the relative improvement over `window` epochs drops below this.
    pub tolerance: Option<f64>,
    pub window: usize,
}

impl BatchOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.initial_step) || self.max_step.is_some_and(|m| !positive(m)) {
            return Err(Error::invalid("step sizes must be positive and finite"));
        }
        if !(self.increase > 1.0 && self.increase.is_finite()) || !(self.decrease > 0.0 && self.decrease < 1.0) {
            return Err(Error::invalid("step multipliers need increase > 1 and decrease in (0, 1)"));
        }
        Ok(())
    }
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            max_epochs: 5000,
            initial_step: 1e-2,
            increase: 1.2,
            decrease: 0.8,
            max_step: None,
            tolerance: None,
            window: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarlyStopping {
    /// Fraction of objects held out; their within-group pairs form the validation set.
    pub validation_fraction: f64,
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping { validation_fraction: 0.1, patience: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsPropOptions {
    /// Number of object groups per epoch.
    pub blocks: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub rho: f64,
    pub delta: f64,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for RmsPropOptions {
    fn default() -> Self {
        RmsPropOptions { blocks: 10, max_epochs: 300, learning_rate: 1e-3, rho: 0.9, delta: 1e-8, early_stopping: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Batch(BatchOptions),
    Minibatch(RmsPropOptions),
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Batch(BatchOptions::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_units: Vec<usize>,
    pub weights: LossWeights,
    pub optimizer: OptimizerKind,
    pub restarts: usize,
    pub seed: u64,
}

/// One line of the training report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    pub wall_ms: f64,
    /// Validation loss when early stopping is on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    /// Loss on the ranking pairs, `None` if the restart failed.
    pub final_loss: Option<f64>,
    pub epochs: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub final_loss: LossBreakdown,
    /// History of the selected restart.
    pub history: Vec<EpochRecord>,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_add((restart as u64).wrapping_mul(RESTART_STRIDE))
}

/// Runs `config.restarts` independent initializations and keeps the one with
/// the lowest loss on `data.pairs`. Ties go to the earlier restart.
pub fn train(data: &TrainingData<'_>, config: &TrainConfig) -> Result<TrainOutcome> {
    data.validate()?;
    config.weights.validate()?;
    if config.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let d = data.inputs.ncols();
    let f = data.focal.len();
    let runs: Vec<Result<(NetworkParams, Vec<EpochRecord>, LossBreakdown)>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(restart_seed(config.seed, r));
            let init = NetworkParams::random(d, &config.hidden_units, f, &mut rng)?;
            let (params, history) = match config.optimizer {
                OptimizerKind::Batch(opts) => train_batch(data, init, config.weights, &opts)?,
                OptimizerKind::Minibatch(opts) => train_minibatch(data, init, config.weights, &opts, rng.random())?,
            };
            let loss = data.objective(data.pairs, config.weights).loss(&params)?;
            Ok((params, history, loss))
        })
        .collect();

    let mut summaries = Vec::with_capacity(runs.len());
    let mut best: Option<(usize, NetworkParams, Vec<EpochRecord>, LossBreakdown)> = None;
    let mut first_error = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok((params, history, loss)) => {
                summaries.push(RestartSummary {
                    restart: r,
                    seed: restart_seed(config.seed, r),
                    final_loss: Some(loss.total),
                    epochs: history.last().map_or(0, |h| h.epoch),
                    error: None,
                });
                if best.as_ref().is_none_or(|b| loss.total < b.3.total) {
                    best = Some((r, params, history, loss));
                }
            }
            Err(e) => {
                summaries.push(RestartSummary {
                    restart: r,
                    seed: restart_seed(config.seed, r),
                    final_loss: None,
                    epochs: 0,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some((best_restart, params, history, final_loss)) => {
            Ok(TrainOutcome { params, final_loss, history, best_restart, restarts: summaries })
        }
        None => Err(first_error.expect("at least one restart ran")),
    }
}

/// Full-batch descent where each parameter has its own step size.
///
/// A candidate that does not lower the loss is rejected: every step shrinks
/// and the sign memory is cleared. The history therefore only records accepted
/// losses and never increases.
pub fn train_batch(
    data: &TrainingData<'_>,
    init: NetworkParams,
    weights: LossWeights,
    opts: &BatchOptions,
) -> Result<(NetworkParams, Vec<EpochRecord>)> {
    data.validate()?;
    opts.validate()?;
    let objective = data.objective(data.pairs, weights);
    let start = Instant::now();
    let mut params = init;
    let (mut loss, grad) = objective.loss_and_gradient(&params)?;
    let mut g = grad.to_flat();
    let mut history = vec![record(0, loss, norm(&g), start, None)];
    let mut theta = params.to_flat();
    let mut steps = vec![opts.initial_step; theta.len()];
    let mut previous = vec![0.0; theta.len()];
    let mut candidate = params.clone();

    for epoch in 1..=opts.max_epochs {
        for k in 0..theta.len() {
            let s = g[k] * previous[k];
            if s > 0.0 {
                steps[k] = (steps[k] * opts.increase).min(opts.max_step.unwrap_or(f64::INFINITY));
            } else if s < 0.0 {
                steps[k] *= opts.decrease;
            }
        }
        let trial: Vec<f64> = theta.iter().zip(&steps).zip(&g).map(|((t, s), gk)| t - s * gk).collect();
        candidate.set_flat(&trial);
        let accepted = match objective.loss_and_gradient(&candidate) {
            Ok((l, gr)) if l.total <= loss.total => Some((l, gr.to_flat())),
            Ok(_) | Err(Error::NonFinite(_)) => None,
            Err(e) => return Err(e),
        };
        match accepted {
            Some((l, gnew)) => {
                previous = std::mem::replace(&mut g, gnew);
                theta = trial;
                loss = l;
            }
            None => {
                for s in &mut steps {
                    *s *= opts.decrease;
                }
                previous.iter_mut().for_each(|p| *p = 0.0);
            }
        }
        history.push(record(epoch, loss, norm(&g), start, None));
        if let Some(tol) = opts.tolerance {
            if epoch >= opts.window {
                let old = history[epoch - opts.window].loss.total;
                if old - loss.total <= tol * old {
                    break;
                }
            }
        }
    }
    params.set_flat(&theta);
    Ok((params, history))
}

/// RMSprop over random object groups; each group contributes all of its
/// within-group pairs and yields one update per epoch.
pub fn train_minibatch(
    data: &TrainingData<'_>,
    init: NetworkParams,
    weights: LossWeights,
    opts: &RmsPropOptions,
    seed: u64,
) -> Result<(NetworkParams, Vec<EpochRecord>)> {
    data.validate()?;
    let n = data.inputs.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();

    // objects available for blocks, and the held-out pairs
    let (train_objects, validation) = match opts.early_stopping {
        Some(es) => {
            if !(es.validation_fraction > 0.0 && es.validation_fraction < 1.0) {
                return Err(Error::invalid("validation fraction must lie in (0, 1)"));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let held = ((n as f64 * es.validation_fraction).ceil() as usize).clamp(2, n - 2);
            let mut held_out = order[..held].to_vec();
            held_out.sort_unstable();
            let mut rest = order[held..].to_vec();
            rest.sort_unstable();
            let mut pairs = Vec::new();
            for a in 0..held_out.len() {
                for b in a + 1..held_out.len() {
                    pairs.push(data.pair(held_out[a], held_out[b]));
                }
            }
            (rest, Some((PairSet::averaged(pairs), es.patience)))
        }
        None => ((0..n).collect::<Vec<_>>(), None),
    };
    if opts.blocks == 0 || opts.blocks > train_objects.len() / 2 {
        return Err(Error::invalid(format!(
            "block count s = {} must lie in 1..={}",
            opts.blocks,
            train_objects.len() / 2
        )));
    }
    let validation_loss = |p: &NetworkParams, pairs: &PairSet| -> Result<f64> {
        let obj = Objective {
            constraints: None,
            labels: None,
            ..data.objective(pairs, LossWeights { lambda: 0.0, ..weights })
        };
        Ok(obj.loss(p)?.base)
    };

    let mut params = init;
    let mut theta = params.to_flat();
    let mut mean_sq = vec![0.0; theta.len()];
    let mut history = Vec::with_capacity(opts.max_epochs + 1);
    let initial = data.objective(data.pairs, weights).loss(&params)?;
    let mut best = match &validation {
        Some((pairs, _)) => Some((validation_loss(&params, pairs)?, theta.clone(), 0usize)),
        None => None,
    };
    history.push(record(0, initial, 0.0, start, best.as_ref().map(|b| b.0)));

    for epoch in 1..=opts.max_epochs {
        let groups: Vec<Vec<usize>> = random_groups(train_objects.len(), opts.blocks, &mut rng)?
            .into_iter()
            .map(|g| g.into_iter().map(|k| train_objects[k]).collect())
            .collect();
        let mut sum = LossBreakdown::default();
        let mut grad_sq = 0.0;
        for block in group_pairs(&groups) {
            let pairs = PairSet::averaged(block.into_iter().map(|(i, j)| data.pair(i, j)).collect());
            let (l, g) = data.objective(&pairs, weights).loss_and_gradient(&params)?;
            let g = g.to_flat();
            for k in 0..theta.len() {
                mean_sq[k] = opts.rho * mean_sq[k] + (1.0 - opts.rho) * g[k] * g[k];
                theta[k] -= opts.learning_rate * g[k] / (opts.delta + mean_sq[k]).sqrt();
            }
            params.set_flat(&theta);
            grad_sq += g.iter().map(|v| v * v).sum::<f64>();
            sum.total += l.total;
            sum.base += l.base;
            sum.regularization += l.regularization;
            sum.constraints += l.constraints;
            sum.labels += l.labels;
        }
        if !params.is_finite() {
            return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
        }
        let s = opts.blocks as f64;
        let mean = LossBreakdown {
            total: sum.total / s,
            base: sum.base / s,
            regularization: sum.regularization / s,
            constraints: sum.constraints / s,
            labels: sum.labels / s,
        };
        let mut val = None;
        if let (Some((pairs, patience)), Some(b)) = (&validation, best.as_mut()) {
            let v = validation_loss(&params, pairs)?;
            val = Some(v);
            if v < b.0 {
                *b = (v, theta.clone(), epoch);
            }
            history.push(record(epoch, mean, (grad_sq / s).sqrt(), start, val));
            if epoch - b.2 >= *patience {
                break;
            }
            continue;
        }
        history.push(record(epoch, mean, (grad_sq / s).sqrt(), start, val));
    }
    if let Some((_, best_theta, _)) = best {
        params.set_flat(&best_theta);
    }
    Ok((params, history))
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn record(epoch: usize, loss: LossBreakdown, grad_norm: f64, start: Instant, validation: Option<f64>) -> EpochRecord {
    EpochRecord { epoch, loss, grad_norm, wall_ms: start.elapsed().as_secs_f64() * 1e3, validation }
}
