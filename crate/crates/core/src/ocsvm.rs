//! One-class ν-SVM with a Gaussian kernel.
//!
//! The dual problem is
//!
//! ```text
//! minimise ½ αᵀ K α   subject to   0 ≤ αᵢ ≤ 1/(ν n),   Σ αᵢ = 1
//! ```
//!
//! with `K(x, y) = exp(−σ ‖x − y‖²)`, so `σ` is an inverse width. The decision
//! function is `f(x) = Σ αᵢ K(x, xᵢ) − ρ`: positive inside the estimated
//! support region and negative outside.
//!
//! The solver is SMO on the maximal violating pair.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dissim::quantile;
use crate::error::{Error, Result};

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    pub nu: f64,
    /// Inverse kernel width; `None` selects `1 / median ‖xᵢ − xⱼ‖²`.
    pub sigma: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        SvmOptions { nu: 0.2, sigma: None, tolerance: 1e-4, max_iterations: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneClassSvm {
    pub support_vectors: Array2<f64>,
    pub alphas: Vec<f64>,
    /// ρ; the constant term of the decision function is `−ρ`.
    pub offset: f64,
    pub sigma: f64,
    pub nu: f64,
    /// Number of training points; `ν·n` rescales decisions to libsvm units.
    pub training_size: usize,
}

/// `1 / median ‖xᵢ − xⱼ‖²` over all pairs.
pub fn median_heuristic_sigma(x: ArrayView2<'_, f64>) -> Result<f64> {
    let n = x.nrows();
    let mut sq = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            sq.push(squared_distance(x.row(i), x.row(j)));
        }
    }
    let med = quantile(&sq, 0.5)?;
    if med <= 0.0 {
        return Err(Error::Degenerate("median squared distance is zero".into()));
    }
    Ok(1.0 / med)
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Gaussian kernel matrix of the rows of `x`.
pub fn kernel_matrix(x: ArrayView2<'_, f64>, sigma: f64) -> Array2<f64> {
    let n = x.nrows();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in i + 1..n {
            let v = (-sigma * squared_distance(x.row(i), x.row(j))).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Dual variables and offset for a precomputed kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    pub offset: f64,
    pub objective: f64,
    pub iterations: usize,
    pub violation: f64,
}

/// SMO on the maximal violating pair.
pub fn solve_dual(
    kernel: &Array2<f64>,
    nu: f64,
    tolerance: f64,
    max_iterations: usize,
    seed: u64,
) -> Result<DualSolution> {
    let n = kernel.nrows();
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::invalid(format!("ν = {nu} must lie in (0, 1)")));
    }
    if n < 2 {
        return Err(Error::invalid("one-class SVM needs at least two points"));
    }
    let upper = 1.0 / (nu * n as f64);

    // feasible start: fill a seeded random order up to the box bound
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut alphas = vec![0.0; n];
    let mut remaining: f64 = 1.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let a = remaining.min(upper);
        alphas[i] = a;
        remaining -= a;
    }

    let mut grad = vec![0.0; n];
    for (i, &a) in alphas.iter().enumerate() {
        if a != 0.0 {
            for r in 0..n {
                grad[r] += a * kernel[[r, i]];
            }
        }
    }

    let at_upper = |a: f64| a >= upper * (1.0 - 1e-12);
    let mut iterations = 0;
    let mut violation;
    loop {
        // i can grow (α < U) with the smallest gradient, j can shrink (α > 0) with the largest
        let mut best_up: Option<usize> = None;
        let mut best_low: Option<usize> = None;
        for r in 0..n {
            if !at_upper(alphas[r]) && best_up.is_none_or(|b| grad[r] < grad[b]) {
                best_up = Some(r);
            }
            if alphas[r] > 0.0 && best_low.is_none_or(|b| grad[r] > grad[b]) {
                best_low = Some(r);
            }
        }
        let (i, j) = match (best_up, best_low) {
            (Some(i), Some(j)) => (i, j),
            _ => {
                violation = 0.0;
                break;
            }
        };
        violation = grad[j] - grad[i];
        if violation <= tolerance {
            break;
        }
        if iterations >= max_iterations {
            return Err(Error::NoConvergence { iterations, violation });
        }
        iterations += 1;

        let curvature = (kernel[[i, i]] + kernel[[j, j]] - 2.0 * kernel[[i, j]]).max(1e-12);
        let step = (violation / curvature).min(upper - alphas[i]).min(alphas[j]);
        alphas[i] += step;
        alphas[j] -= step;
        if alphas[j] < 1e-15 {
            alphas[j] = 0.0;
        }
        for r in 0..n {
            grad[r] += step * (kernel[[r, i]] - kernel[[r, j]]);
        }
    }

    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for r in 0..n {
        if alphas[r] > 0.0 && !at_upper(alphas[r]) {
            free_sum += grad[r];
            free_count += 1;
        } else if alphas[r] == 0.0 {
            hi = hi.min(grad[r]);
        } else {
            lo = lo.max(grad[r]);
        }
    }
    let offset = if free_count > 0 {
        free_sum / free_count as f64
    } else if lo.is_finite() && hi.is_finite() {
        (lo + hi) / 2.0
    } else if lo.is_finite() {
        lo
    } else {
        hi
    };
    let objective = 0.5 * alphas.iter().zip(&grad).map(|(a, g)| a * g).sum::<f64>();
    Ok(DualSolution { alphas, offset, objective, iterations, violation })
}

impl OneClassSvm {
    pub fn fit(x: ArrayView2<'_, f64>, options: &SvmOptions) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::invalid("one-class SVM needs at least two points"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("SVM training data".into()));
        }
        let sigma = match options.sigma {
            Some(s) if s > 0.0 && s.is_finite() => s,
            Some(s) => return Err(Error::invalid(format!("kernel parameter σ = {s} must be positive"))),
            None => median_heuristic_sigma(x).unwrap_or(1.0),
        };
        let kernel = kernel_matrix(x, sigma);
        let sol = solve_dual(&kernel, options.nu, options.tolerance, options.max_iterations, options.seed)?;
        let keep: Vec<usize> = (0..n).filter(|&i| sol.alphas[i] > 0.0).collect();
        let support_vectors = x.select(ndarray::Axis(0), &keep);
        Ok(OneClassSvm {
            support_vectors,
            alphas: keep.iter().map(|&i| sol.alphas[i]).collect(),
            offset: sol.offset,
            sigma,
            nu: options.nu,
            training_size: n,
        })
    }

    /// Convenience wrapper with the default tolerance.
    pub fn fit_with(x: ArrayView2<'_, f64>, nu: f64, sigma: f64, seed: u64) -> Result<Self> {
        Self::fit(x, &SvmOptions { nu, sigma: Some(sigma), seed, ..SvmOptions::default() })
    }

    pub fn decision(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut s = 0.0;
        for (sv, &a) in self.support_vectors.rows().into_iter().zip(&self.alphas) {
            s += a * (-self.sigma * squared_distance(x, sv)).exp();
        }
        s - self.offset
    }

    pub fn decision_batch(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.decision(r)).collect()
    }

    /// Decision value in libsvm/kernlab units (multipliers summing to `ν·n`),
    /// which is what the mass gate consumes.
    pub fn gate_score(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.gate_scale() * self.decision(x)
    }

    pub fn gate_scores(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.gate_score(r)).collect()
    }

    pub fn gate_scale(&self) -> f64 {
        self.nu * self.training_size as f64
    }

    pub fn input_dim(&self) -> usize {
        self.support_vectors.ncols()
    }
}
