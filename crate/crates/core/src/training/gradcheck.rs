//! Finite-difference check of the analytic gradient.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dissim::{Pair, PairSet};
use crate::error::{Error, Result};
use crate::focalsets::{FocalScheme, FocalSets, Frame};
use crate::network::NetworkParams;
use crate::training::objective::{Gradient, LossWeights, Objective};
use crate::training::{ConstraintSet, LabelSet};

/// Dimensions and options of a random test instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub n: usize,
    pub d: usize,
    pub hidden: Vec<usize>,
    pub clusters: usize,
    pub scheme: FocalScheme,
    pub gate: bool,
    /// Number of pairwise constraints, alternately must-link and cannot-link.
    pub constraints: usize,
    /// Number of labelled objects.
    pub labels: usize,
    pub lambda: f64,
    pub xi: f64,
    pub nu: f64,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            n: 6,
            d: 2,
            hidden: vec![3],
            clusters: 2,
            scheme: FocalScheme::SingletonsPlus,
            gate: true,
            constraints: 0,
            labels: 0,
            lambda: 0.0,
            xi: 0.5,
            nu: 0.5,
            seed: 0,
        }
    }
}

/// A self-contained instance: data, pairs, penalties and parameters.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub focal: FocalSets,
    pub inputs: Array2<f64>,
    pub svm_scores: Option<Vec<f64>>,
    pub pairs: PairSet,
    pub constraints: Option<ConstraintSet>,
    pub labels: Option<LabelSet>,
    pub weights: LossWeights,
    pub params: NetworkParams,
}

impl InstanceSpec {
    pub fn build(&self) -> Result<GradCheckInstance> {
        if self.n < 2 {
            return Err(Error::invalid("a gradient check needs at least two objects"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let focal = FocalSets::build(Frame::new(self.clusters)?, self.scheme)?;
        let inputs = Array2::from_shape_fn((self.n, self.d), |_| rng.random_range(-2.0..2.0));
        let svm_scores = self.gate.then(|| (0..self.n).map(|_| rng.random_range(-1.0..1.0)).collect());
        let mut pairs = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                pairs.push(Pair { i, j, target: rng.random_range(0.0..1.0) });
            }
        }
        let constraints = if self.constraints > 0 {
            let all: Vec<(usize, usize)> = pairs.iter().map(|p| (p.i, p.j)).collect();
            let picked = rand::seq::index::sample(&mut rng, all.len(), self.constraints.min(all.len()));
            let (mut ml, mut cl) = (Vec::new(), Vec::new());
            for (k, idx) in picked.into_iter().enumerate() {
                if k % 2 == 0 {
                    ml.push(all[idx])
                } else {
                    cl.push(all[idx])
                }
            }
            Some(ConstraintSet::new(self.n, ml, cl)?)
        } else {
            None
        };
        let labels = if self.labels > 0 {
            let entries = (0..self.labels.min(self.n)).map(|i| (i, rng.random_range(0..self.clusters))).collect();
            Some(LabelSet::new(self.n, self.clusters, entries)?)
        } else {
            None
        };
        let mut params = NetworkParams::random(self.d, &self.hidden, focal.len(), &mut rng)?;
        if self.gate {
            params.beta0 = rng.random_range(-1.0..1.0);
            params.beta1 = rng.random_range(0.5..2.0);
        }
        Ok(GradCheckInstance {
            focal,
            inputs,
            svm_scores,
            pairs: PairSet::averaged(pairs),
            constraints,
            labels,
            weights: LossWeights { lambda: self.lambda, xi: self.xi, nu: self.nu },
            params,
        })
    }
}

impl GradCheckInstance {
    pub fn objective(&self) -> Objective<'_> {
        Objective {
            focal: &self.focal,
            inputs: self.inputs.view(),
            svm_scores: self.svm_scores.as_deref(),
            pairs: &self.pairs,
            constraints: self.constraints.as_ref(),
            labels: self.labels.as_ref(),
            weights: self.weights,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound of the relative-error denominator.
    pub floor: f64,
    /// Test hook: perturbs the analytic output-layer gradient.
    #[serde(skip)]
    pub inject_fault: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { step: 1e-6, tolerance: 1e-5, floor: 1e-4, inject_fault: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    /// `V1`, `V2`, …, `W`, `beta0` or `beta1`.
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index within the block of the worst entry.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Largest analytic magnitude in the block.
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn block(&self, name: &str) -> Option<&BlockReport> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Blocks over tolerance, worst first.
    pub fn offenders(&self) -> Vec<&BlockReport> {
        let mut v: Vec<_> = self.blocks.iter().filter(|b| b.max_rel_error >= self.tolerance).collect();
        v.sort_by(|a, b| b.max_rel_error.total_cmp(&a.max_rel_error));
        v
    }
}

fn block_layout(params: &NetworkParams) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> =
        params.hidden.iter().enumerate().map(|(l, m)| (format!("V{}", l + 1), m.len())).collect();
    v.push(("W".into(), params.output.len()));
    v.push(("beta0".into(), 1));
    v.push(("beta1".into(), 1));
    v
}

/// Compares the analytic gradient with central differences, parameter by parameter.
pub fn grad_check(instance: &GradCheckInstance, options: &GradCheckOptions) -> Result<GradCheckReport> {
    let objective = instance.objective();
    let params = &instance.params;
    let (_, mut grad): (_, Gradient) = objective.loss_and_gradient(params)?;
    if options.inject_fault {
        grad.output.mapv_inplace(|g| 1.5 * g + 1e-3);
    }
    let analytic = grad.to_flat();
    let theta = params.to_flat();
    let mut probe = params.clone();
    let mut shifted = theta.clone();
    let h = options.step;
    let mut numeric = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        shifted[k] = theta[k] + h;
        probe.set_flat(&shifted);
        let up = objective.loss(&probe)?.total;
        shifted[k] = theta[k] - h;
        probe.set_flat(&shifted);
        let down = objective.loss(&probe)?.total;
        shifted[k] = theta[k];
        numeric.push((up - down) / (2.0 * h));
    }

    let mut blocks = Vec::new();
    let mut offset = 0;
    for (name, len) in block_layout(params) {
        let mut report = BlockReport {
            name,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: analytic[offset],
            numeric: numeric[offset],
            max_abs_gradient: 0.0,
        };
        for k in 0..len {
            let (a, n) = (analytic[offset + k], numeric[offset + k]);
            let err = (a - n).abs() / a.abs().max(n.abs()).max(options.floor);
            report.max_abs_gradient = report.max_abs_gradient.max(a.abs());
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_index = k;
                report.analytic = a;
                report.numeric = n;
            }
        }
        blocks.push(report);
        offset += len;
    }
    let max_rel_error = blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        blocks,
        max_rel_error,
        tolerance: options.tolerance,
        passed: max_rel_error < options.tolerance,
    })
}
