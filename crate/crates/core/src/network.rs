//! Feedforward network mapping attribute vectors to mass vectors, with the
//! optional one-class-SVM gate that diverts mass to the empty set.
//!
//! Each hidden layer computes `a = V [1; x]`, `z = max(0, a)`; the output layer
//! computes `μ = W [1; z]` followed by a softmax, giving a mass vector `m`.
//! With a gate score `s`, `η = softplus(β₀ + β₁ s)`, `γ = η / (1 + η)` and the
//! returned mass is `m* = γ m + (1 − γ) m_∅`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidential::EvidentialPartition;
use crate::focalsets::FocalSets;
use crate::ocsvm::OneClassSvm;

/// Default hidden-layer width: ⌈1.5 f⌉.
pub fn default_hidden_units(focal_count: usize) -> usize {
    (3 * focal_count).div_ceil(2)
}

/// Weights of the network and of the gate.
///
/// Every weight matrix stores the bias in column 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Hidden layers, input side first; layer `l` has shape `units_l x (inputs_l + 1)`.
    pub hidden: Vec<Array2<f64>>,
    /// Output layer, shape `f x (units_last + 1)`.
    pub output: Array2<f64>,
    pub beta0: f64,
    pub beta1: f64,
}

impl NetworkParams {
    /// All weights zero, gate at its initial `β₀ = 0, β₁ = 1`.
    pub fn zeros(input_dim: usize, hidden_units: &[usize], focal_count: usize) -> Result<Self> {
        Self::with_init(input_dim, hidden_units, focal_count, |_, _| 0.0)
    }

    /// Uniform weights in `[−a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn random<R: Rng>(input_dim: usize, hidden_units: &[usize], focal_count: usize, rng: &mut R) -> Result<Self> {
        Self::with_init(input_dim, hidden_units, focal_count, |fan_in, fan_out| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            rng.random_range(-a..=a)
        })
    }

    fn with_init(
        input_dim: usize,
        hidden_units: &[usize],
        focal_count: usize,
        mut draw: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if hidden_units.is_empty() || hidden_units.contains(&0) {
            return Err(Error::invalid("at least one hidden layer with positive width is required"));
        }
        if focal_count < 2 {
            return Err(Error::invalid("at least two focal sets are required"));
        }
        let mut hidden = Vec::with_capacity(hidden_units.len());
        let mut inputs = input_dim;
        for &units in hidden_units {
            hidden.push(Array2::from_shape_fn((units, inputs + 1), |_| draw(inputs, units)));
            inputs = units;
        }
        let output = Array2::from_shape_fn((focal_count, inputs + 1), |_| draw(inputs, focal_count));
        Ok(NetworkParams { hidden, output, beta0: 0.0, beta1: 1.0 })
    }

    pub fn input_dim(&self) -> usize {
        self.hidden[0].ncols() - 1
    }

    pub fn hidden_units(&self) -> Vec<usize> {
        self.hidden.iter().map(Array2::nrows).collect()
    }

    pub fn focal_count(&self) -> usize {
        self.output.nrows()
    }

    /// Total number of scalar parameters, gate included.
    pub fn len(&self) -> usize {
        self.hidden.iter().map(Array2::len).sum::<usize>() + self.output.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parameters in a fixed order: hidden layers, output layer, β₀, β₁.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        for layer in &self.hidden {
            v.extend(layer.iter());
        }
        v.extend(self.output.iter());
        v.push(self.beta0);
        v.push(self.beta1);
        v
    }

    /// Overwrites all parameters from a vector laid out as in [`to_flat`](Self::to_flat).
    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length");
        let mut k = 0;
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            for w in layer.iter_mut() {
                *w = flat[k];
                k += 1;
            }
        }
        self.beta0 = flat[k];
        self.beta1 = flat[k + 1];
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    /// Runs one input through the network and, if `svm_score` is given, the gate.
    pub fn forward(&self, x: ArrayView1<'_, f64>, svm_score: Option<f64>, fs: &FocalSets) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::dims(self.input_dim(), x.len(), "input vector"));
        }
        if fs.len() != self.focal_count() {
            return Err(Error::dims(fs.len(), self.focal_count(), "network outputs vs focal sets"));
        }
        if svm_score.is_some() && fs.empty_set_index().is_none() {
            return Err(Error::invalid("gating requires the empty set among the focal sets"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input vector".into()));
        }
        let mut activations = Vec::with_capacity(self.hidden.len());
        let mut outputs: Vec<Array1<f64>> = Vec::with_capacity(self.hidden.len());
        for (l, layer) in self.hidden.iter().enumerate() {
            let input = outputs.last().map_or(x, |z| z.view());
            let a = affine(layer.view(), input);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("hidden layer {}", l + 1)));
            }
            outputs.push(a.mapv(|v| v.max(0.0)));
            activations.push(a);
        }
        let mu = affine(self.output.view(), outputs.last().expect("one hidden layer").view());
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("output layer".into()));
        }
        let m = softmax(mu.view());
        let gate = svm_score.map(|s| Gate::new(self.beta0, self.beta1, s));
        let m_star = match &gate {
            Some(g) => {
                if !g.gamma.is_finite() {
                    return Err(Error::NonFinite("gate".into()));
                }
                let mut ms = &m * g.gamma;
                ms[0] += 1.0 - g.gamma;
                ms
            }
            None => m.clone(),
        };
        Ok(ForwardTrace { activations, outputs, mu, m, gate, m_star })
    }
}

/// `W [1; x]` with the bias in column 0.
fn affine(w: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut out = Array1::zeros(w.nrows());
    for (h, row) in w.rows().into_iter().enumerate() {
        let mut acc = row[0];
        for (k, &xk) in x.iter().enumerate() {
            acc += row[k + 1] * xk;
        }
        out[h] = acc;
    }
    out
}

/// Softmax with the maximum logit subtracted first.
pub fn softmax(mu: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = mu.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut e = mu.mapv(|v| (v - max).exp());
    let total = e.sum();
    e /= total;
    e
}

/// `ln(1 + eᵗ)` without overflow.
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Gate state for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gate {
    pub score: f64,
    /// `β₀ + β₁ s`.
    pub t: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl Gate {
    pub fn new(beta0: f64, beta1: f64, score: f64) -> Self {
        let t = beta0 + beta1 * score;
        let eta = softplus(t);
        Gate { score, t, eta, gamma: eta / (1.0 + eta) }
    }

    /// `∂γ/∂β₀ = σ(t) / (1 + η)²`; `∂γ/∂β₁` is this times the score.
    pub fn dgamma_dbeta0(&self) -> f64 {
        sigmoid(self.t) / ((1.0 + self.eta) * (1.0 + self.eta))
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Pre-activations `a` of each hidden layer.
    pub activations: Vec<Array1<f64>>,
    /// ReLU outputs `z` of each hidden layer.
    pub outputs: Vec<Array1<f64>>,
    pub mu: Array1<f64>,
    pub m: Array1<f64>,
    pub gate: Option<Gate>,
    pub m_star: Array1<f64>,
}

impl ForwardTrace {
    /// γ, or 1 when the gate is off.
    pub fn gamma(&self) -> f64 {
        self.gate.map_or(1.0, |g| g.gamma)
    }
}

/// Whether a model consumes attribute vectors or dissimilarity rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Attributes,
    /// Dissimilarities to the training objects, mapped through a PCA embedding.
    Relational,
}

/// Per-column centring and scaling of network inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    /// Population standard deviation; 1 for constant columns.
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<'_, f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot standardize an empty table"));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let scale = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::dims(self.mean.len(), x.ncols(), "standardized columns"));
        }
        Ok((&x - &self.mean) / &self.scale)
    }
}

/// Everything needed to compute masses for new objects.
///
/// Raw inputs go through the PCA embedding (relational models), then the SVM
/// scores them, then the standardizer rescales them for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub focal: FocalSets,
    pub params: NetworkParams,
    pub phi: crate::dissim::PhiTransform,
    pub svm: Option<OneClassSvm>,
    pub pca: Option<crate::dissim::PcaEmbedding>,
    pub scaler: Option<Standardizer>,
}

impl Model {
    pub fn input_kind(&self) -> InputKind {
        if self.pca.is_some() {
            InputKind::Relational
        } else {
            InputKind::Attributes
        }
    }

    /// Width of a raw input row: `d` for attributes, the training size for
    /// relational models.
    pub fn input_width(&self) -> usize {
        match &self.pca {
            Some(p) => p.input_len(),
            None => self.params.input_dim(),
        }
    }

    /// Masses for attribute vectors (after any PCA projection).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<EvidentialPartition> {
        if x.ncols() != self.params.input_dim() {
            return Err(Error::dims(self.params.input_dim(), x.ncols(), "attribute columns"));
        }
        let scaled = self.scaler.as_ref().map(|s| s.apply(x)).transpose()?;
        let z = scaled.as_ref().map_or(x, |s| s.view());
        let mut masses = Array2::zeros((x.nrows(), self.focal.len()));
        for (i, row) in z.rows().into_iter().enumerate() {
            let score = self.svm.as_ref().map(|s| s.gate_score(x.row(i)));
            let trace = self.params.forward(row, score, &self.focal)?;
            masses.row_mut(i).assign(&trace.m_star);
        }
        EvidentialPartition::new(self.focal.clone(), masses)
    }

    /// Masses for raw inputs: attribute rows, or dissimilarity rows for relational models.
    pub fn predict_raw(&self, rows: ArrayView2<'_, f64>) -> Result<EvidentialPartition> {
        match &self.pca {
            Some(pca) => self.predict(pca.project_rows(rows)?.view()),
            None => self.predict(rows),
        }
    }
}
