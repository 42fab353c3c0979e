//! The composite training loss and its gradient.
//!
//! ```text
//! total = (1 − ν) (L + ξ / (2 (|ML| + |CL|)) (P_ML + P_CL)) + ν P_s + R
//! ```
//!
//! where `L` is the weighted stress `w Σ (κᵢⱼ − δ*ᵢⱼ)²` over the supplied
//! pairs, `P_ML`/`P_CL` the pairwise-constraint penalties, `P_s` the
//! labelled-data penalty and `R` the normalised ℓ₂ term on the network weights
//! (the gate coefficients are not regularised). `ν` only applies when labels
//! are supplied.
//!
//! Every term depends on the parameters through the per-object masses `m*ᵢ`,
//! so the gradient is assembled as `∂total/∂m*ᵢ` for each object and then
//! back-propagated once per object.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissim::PairSet;
use crate::error::{Error, Result};
use crate::evidential::EvidentialPartition;
use crate::focalsets::{bilinear, FocalSets};
use crate::network::{ForwardTrace, NetworkParams};
use crate::training::{ConstraintSet, LabelSet};

/// Objects back-propagated per parallel task.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// ℓ₂ coefficient λ.
    pub lambda: f64,
    /// Constraint weight ξ.
    pub xi: f64,
    /// Labelled-data blend ν.
    pub nu: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda: 0.0, xi: 0.5, nu: 0.5 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0 && self.xi.is_finite() && self.xi >= 0.0)
            || !(0.0..=1.0).contains(&self.nu)
        {
            return Err(Error::invalid(format!(
                "loss weights out of range: λ = {}, ξ = {}, ν = {}",
                self.lambda, self.xi, self.nu
            )));
        }
        Ok(())
    }
}

/// Value of each term of the composite loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Averaged stress over the pairs.
    pub base: f64,
    /// `λ/2` times the normalised squared weights.
    pub regularization: f64,
    /// `ξ / (2 (|ML| + |CL|)) (P_ML + P_CL)`.
    pub constraints: f64,
    /// `P_s`.
    pub labels: f64,
}

/// Gradient with the same layout as [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub hidden: Vec<Array2<f64>>,
    pub output: Array2<f64>,
    pub beta0: f64,
    pub beta1: f64,
}

impl Gradient {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Gradient {
            hidden: params.hidden.iter().map(|l| Array2::zeros(l.raw_dim())).collect(),
            output: Array2::zeros(params.output.raw_dim()),
            beta0: 0.0,
            beta1: 0.0,
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for layer in &self.hidden {
            v.extend(layer.iter());
        }
        v.extend(self.output.iter());
        v.push(self.beta0);
        v.push(self.beta1);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.hidden.iter_mut().zip(&other.hidden) {
            *a += b;
        }
        self.output += &other.output;
        self.beta0 += other.beta0;
        self.beta1 += other.beta1;
    }

    fn scale(&mut self, s: f64) {
        for layer in &mut self.hidden {
            *layer *= s;
        }
        self.output *= s;
        self.beta0 *= s;
        self.beta1 *= s;
    }

    /// Names the first block holding a non-finite entry.
    fn check_finite(&self) -> Result<()> {
        for (l, layer) in self.hidden.iter().enumerate() {
            if layer.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of hidden layer {}", l + 1)));
            }
        }
        if self.output.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient of output layer".into()));
        }
        if !self.beta0.is_finite() || !self.beta1.is_finite() {
            return Err(Error::NonFinite("gradient of gate coefficients".into()));
        }
        Ok(())
    }
}

/// `(m*ᵢᵀ C m*ⱼ − δ*)²`.
pub fn pair_loss(trace_i: &ForwardTrace, trace_j: &ForwardTrace, target: f64, fs: &FocalSets) -> f64 {
    let kappa = bilinear(
        fs.conflict_matrix(),
        trace_i.m_star.as_slice().expect("contiguous"),
        trace_j.m_star.as_slice().expect("contiguous"),
    );
    (kappa - target) * (kappa - target)
}

/// `(P_ML, P_CL)` with `P_ML = Σ m*ᵢᵀ Q m*ⱼ` and `P_CL = Σ (2 − m*ᵢᵀ Q m*ⱼ)`.
pub fn penalty_must_cannot(
    masses: ArrayView2<'_, f64>,
    constraints: &ConstraintSet,
    fs: &FocalSets,
) -> Result<(f64, f64)> {
    check_partition_rows(masses, fs, constraints.max_index())?;
    let q = fs.penalty_matrix();
    let form = |i: usize, j: usize| bilinear(q, &masses.row(i).to_vec(), &masses.row(j).to_vec());
    let ml = constraints.must_link().iter().map(|&(i, j)| form(i, j)).sum();
    let cl = constraints.cannot_link().iter().map(|&(i, j)| 2.0 - form(i, j)).sum();
    Ok((ml, cl))
}

/// `P_s = (1/n_s) Σᵢ Σ_l (pl*ᵢₗ − yᵢₗ)²` with one-hot `y`.
pub fn penalty_labels(masses: ArrayView2<'_, f64>, labels: &LabelSet, fs: &FocalSets) -> Result<f64> {
    check_partition_rows(masses, fs, labels.entries().iter().map(|e| e.0).max())?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &(i, y) in labels.entries() {
        if y >= fs.clusters() {
            return Err(Error::invalid(format!("class {} outside 1..={}", y + 1, fs.clusters())));
        }
        let pl = fs.membership().dot(&masses.row(i));
        total += label_residual(pl.view(), y).iter().map(|r| r * r).sum::<f64>();
    }
    Ok(total / labels.len() as f64)
}

fn check_partition_rows(masses: ArrayView2<'_, f64>, fs: &FocalSets, max_index: Option<usize>) -> Result<()> {
    if masses.ncols() != fs.len() {
        return Err(Error::dims(fs.len(), masses.ncols(), "mass columns"));
    }
    if let Some(m) = max_index {
        if m >= masses.nrows() {
            return Err(Error::invalid(format!(
                "object {} referenced but only {} objects present",
                m + 1,
                masses.nrows()
            )));
        }
    }
    Ok(())
}

fn label_residual(pl: ArrayView1<'_, f64>, y: usize) -> Array1<f64> {
    let mut r = pl.to_owned();
    r[y] -= 1.0;
    r
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Everything the loss depends on apart from the parameters.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub focal: &'a FocalSets,
    pub inputs: ArrayView2<'a, f64>,
    /// One-class-SVM scores of the inputs; `None` disables the gate.
    pub svm_scores: Option<&'a [f64]>,
    pub pairs: &'a PairSet,
    pub constraints: Option<&'a ConstraintSet>,
    pub labels: Option<&'a LabelSet>,
    pub weights: LossWeights,
}

impl<'a> Objective<'a> {
    pub fn validate(&self, params: &NetworkParams) -> Result<()> {
        let n = self.inputs.nrows();
        self.weights.validate()?;
        if params.input_dim() != self.inputs.ncols() {
            return Err(Error::dims(params.input_dim(), self.inputs.ncols(), "input dimension"));
        }
        if params.focal_count() != self.focal.len() {
            return Err(Error::dims(self.focal.len(), params.focal_count(), "focal sets"));
        }
        if let Some(s) = self.svm_scores {
            if s.len() != n {
                return Err(Error::dims(n, s.len(), "SVM scores"));
            }
        }
        if self.pairs.pairs.iter().any(|p| p.i >= n || p.j >= n) {
            return Err(Error::invalid("pair references an object out of range"));
        }
        if let Some(m) = self.constraints.and_then(ConstraintSet::max_index) {
            if m >= n {
                return Err(Error::invalid(format!("constraint references object {} of {n}", m + 1)));
            }
        }
        if let Some(labels) = self.labels {
            for &(i, y) in labels.entries() {
                if i >= n || y >= self.focal.clusters() {
                    return Err(Error::invalid(format!("label ({}, {}) out of range", i + 1, y + 1)));
                }
            }
        }
        Ok(())
    }

    fn label_blend(&self) -> f64 {
        match self.labels {
            Some(l) if !l.is_empty() => self.weights.nu,
            _ => 0.0,
        }
    }

    fn constraint_factor(&self) -> f64 {
        match self.constraints {
            Some(c) if !c.is_empty() => self.weights.xi / (2.0 * c.len() as f64),
            _ => 0.0,
        }
    }

    /// Objects whose masses enter any term, in increasing order.
    fn active_objects(&self) -> Vec<usize> {
        let n = self.inputs.nrows();
        let mut used = vec![false; n];
        for p in &self.pairs.pairs {
            used[p.i] = true;
            used[p.j] = true;
        }
        if let Some(c) = self.constraints {
            for &(i, j) in c.must_link().iter().chain(c.cannot_link()) {
                used[i] = true;
                used[j] = true;
            }
        }
        if let Some(l) = self.labels {
            for &(i, _) in l.entries() {
                used[i] = true;
            }
        }
        (0..n).filter(|&i| used[i]).collect()
    }

    fn forward_all(&self, params: &NetworkParams, objects: &[usize]) -> Result<Vec<Option<ForwardTrace>>> {
        let traces: Vec<ForwardTrace> = objects
            .par_iter()
            .map(|&i| params.forward(self.inputs.row(i), self.svm_scores.map(|s| s[i]), self.focal))
            .collect::<Result<_>>()?;
        let mut out = vec![None; self.inputs.nrows()];
        for (&i, t) in objects.iter().zip(traces) {
            out[i] = Some(t);
        }
        Ok(out)
    }

    /// Masses `m*` of every object.
    pub fn masses(&self, params: &NetworkParams) -> Result<EvidentialPartition> {
        let all: Vec<usize> = (0..self.inputs.nrows()).collect();
        let traces = self.forward_all(params, &all)?;
        let mut masses = Array2::zeros((all.len(), self.focal.len()));
        for (i, t) in traces.into_iter().enumerate() {
            masses.row_mut(i).assign(&t.expect("computed").m_star);
        }
        EvidentialPartition::new(self.focal.clone(), masses)
    }

    pub fn loss(&self, params: &NetworkParams) -> Result<LossBreakdown> {
        Ok(self.evaluate(params, false)?.0)
    }

    pub fn loss_and_gradient(&self, params: &NetworkParams) -> Result<(LossBreakdown, Gradient)> {
        let (loss, grad) = self.evaluate(params, true)?;
        Ok((loss, grad.expect("requested")))
    }

    fn evaluate(&self, params: &NetworkParams, with_gradient: bool) -> Result<(LossBreakdown, Option<Gradient>)> {
        self.validate(params)?;
        let f = self.focal.len();
        let objects = self.active_objects();
        let traces = self.forward_all(params, &objects)?;
        let mstar = |i: usize| traces[i].as_ref().expect("active object").m_star.view();

        let nu = self.label_blend();
        let stress_scale = 1.0 - nu;
        // ∂total/∂m*ᵢ, one row per object
        let mut dmass = if with_gradient { Array2::zeros((self.inputs.nrows(), f)) } else { Array2::zeros((0, f)) };

        // stress
        let conflict = self.focal.conflict_matrix();
        let mut c_times = vec![None; self.inputs.nrows()];
        for p in &self.pairs.pairs {
            for k in [p.i, p.j] {
                if c_times[k].is_none() {
                    c_times[k] = Some(conflict.dot(&mstar(k)));
                }
            }
        }
        let mut stress = CompensatedSum::default();
        let w = self.pairs.weight;
        for p in &self.pairs.pairs {
            let cm_j: &Array1<f64> = c_times[p.j].as_ref().expect("filled");
            let kappa = mstar(p.i).dot(cm_j);
            let r = kappa - p.target;
            stress.add(r * r);
            if with_gradient {
                let coef = stress_scale * w * 2.0 * r;
                let cm_i: &Array1<f64> = c_times[p.i].as_ref().expect("filled");
                dmass.row_mut(p.i).scaled_add(coef, cm_j);
                dmass.row_mut(p.j).scaled_add(coef, cm_i);
            }
        }
        let base = w * stress.value();

        // pairwise constraints
        let mut constraint_term = 0.0;
        if let Some(cs) = self.constraints.filter(|c| !c.is_empty()) {
            let factor = self.constraint_factor();
            let q = self.focal.penalty_matrix();
            let mut total = CompensatedSum::default();
            for (sign, list) in [(1.0, cs.must_link()), (-1.0, cs.cannot_link())] {
                for &(i, j) in list {
                    let qm_j = q.dot(&mstar(j));
                    let form = mstar(i).dot(&qm_j);
                    total.add(if sign > 0.0 { form } else { 2.0 - form });
                    if with_gradient {
                        let coef = stress_scale * factor * sign;
                        let qm_i = q.dot(&mstar(i));
                        dmass.row_mut(i).scaled_add(coef, &qm_j);
                        dmass.row_mut(j).scaled_add(coef, &qm_i);
                    }
                }
            }
            constraint_term = factor * total.value();
        }

        // labelled objects
        let mut label_term = 0.0;
        if let Some(ls) = self.labels.filter(|l| !l.is_empty()) {
            let membership = self.focal.membership();
            let mut total = CompensatedSum::default();
            let scale = nu / ls.len() as f64;
            for &(i, y) in ls.entries() {
                let residual = label_residual(membership.dot(&mstar(i)).view(), y);
                total.add(residual.dot(&residual));
                if with_gradient {
                    let g = membership.t().dot(&residual);
                    dmass.row_mut(i).scaled_add(2.0 * scale, &g);
                }
            }
            label_term = total.value() / ls.len() as f64;
        }

        // ℓ₂ on the weight matrices
        let lambda = self.weights.lambda;
        let mut regularization = 0.0;
        if lambda > 0.0 {
            for layer in params.hidden.iter().chain(std::iter::once(&params.output)) {
                regularization += layer.iter().map(|v| v * v).sum::<f64>() / layer.len() as f64;
            }
            regularization *= lambda / 2.0;
        }

        let loss = LossBreakdown {
            total: stress_scale * (base + constraint_term) + nu * label_term + regularization,
            base,
            regularization,
            constraints: constraint_term,
            labels: label_term,
        };
        if !loss.total.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        if !with_gradient {
            return Ok((loss, None));
        }

        let partials: Vec<Gradient> = objects
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = Gradient::zeros_like(params);
                for &i in chunk {
                    backprop(params, traces[i].as_ref().expect("active"), self.inputs.row(i), dmass.row(i), &mut g);
                }
                g
            })
            .collect();
        let mut grad = Gradient::zeros_like(params);
        for g in &partials {
            grad.add_assign(g);
        }
        if lambda > 0.0 {
            for (g, layer) in grad.hidden.iter_mut().zip(&params.hidden) {
                g.scaled_add(lambda / layer.len() as f64, layer);
            }
            grad.output.scaled_add(lambda / params.output.len() as f64, &params.output);
        }
        grad.check_finite()?;
        Ok((loss, Some(grad)))
    }

    /// Gradient scaled by a constant, for tests that corrupt one block.
    #[doc(hidden)]
    pub fn scaled_gradient(&self, params: &NetworkParams, s: f64) -> Result<Gradient> {
        let (_, mut g) = self.loss_and_gradient(params)?;
        g.scale(s);
        Ok(g)
    }
}

/// Accumulates the parameter gradient of one object given `∂loss/∂m*`.
fn backprop(
    params: &NetworkParams,
    trace: &ForwardTrace,
    x: ArrayView1<'_, f64>,
    dmass_star: ArrayView1<'_, f64>,
    grad: &mut Gradient,
) {
    if dmass_star.iter().all(|&v| v == 0.0) {
        return;
    }
    let m = &trace.m;
    // through the gate: ∂m*ᵣ/∂mᵣ = γ and ∂m*ᵣ/∂γ = mᵣ − [r = ∅]
    let (dm, dgamma) = match trace.gate {
        Some(g) => (&dmass_star * g.gamma, dmass_star.dot(m) - dmass_star[0]),
        None => (dmass_star.to_owned(), 0.0),
    };
    if let Some(g) = trace.gate {
        let dg0 = dgamma * g.dgamma_dbeta0();
        grad.beta0 += dg0;
        grad.beta1 += dg0 * g.score;
    }
    // softmax Jacobian
    let inner = dm.dot(m);
    let dmu: Array1<f64> = m.iter().zip(dm.iter()).map(|(&mr, &g)| mr * (g - inner)).collect();

    let z_last = trace.outputs.last().expect("one hidden layer");
    accumulate_layer(&mut grad.output, dmu.view(), z_last.view());
    let mut dz = back_through(&params.output, dmu.view());

    for l in (0..params.hidden.len()).rev() {
        let da: Array1<f64> =
            dz.iter().zip(trace.activations[l].iter()).map(|(&g, &a)| if a > 0.0 { g } else { 0.0 }).collect();
        let input = if l == 0 { x } else { trace.outputs[l - 1].view() };
        accumulate_layer(&mut grad.hidden[l], da.view(), input);
        if l > 0 {
            dz = back_through(&params.hidden[l], da.view());
        }
    }
}

/// `dW += δ ⊗ [1; input]`.
fn accumulate_layer(dw: &mut Array2<f64>, delta: ArrayView1<'_, f64>, input: ArrayView1<'_, f64>) {
    for (h, mut row) in dw.rows_mut().into_iter().enumerate() {
        let d = delta[h];
        if d == 0.0 {
            continue;
        }
        row[0] += d;
        for (k, &v) in input.iter().enumerate() {
            row[k + 1] += d * v;
        }
    }
}

/// `W[:, 1..]ᵀ δ`.
fn back_through(w: &Array2<f64>, delta: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut out = Array1::zeros(w.ncols() - 1);
    for (q, row) in w.rows().into_iter().enumerate() {
        let d = delta[q];
        if d == 0.0 {
            continue;
        }
        for k in 0..out.len() {
            out[k] += d * row[k + 1];
        }
    }
    out
}
