//! Dissimilarity data: distances, the φ transform, pair sampling and the
//! PCA embedding used to turn relational data into attribute vectors.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise Euclidean distances between the rows of `x`.
pub fn euclidean_distances(x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("at least two objects are required"));
    }
    if x.ncols() == 0 {
        return Err(Error::invalid("attribute matrix has no columns"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("attribute matrix".into()));
    }
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(x.row(i), x.row(j));
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(d)
}

pub(crate) fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// `(D + Dᵀ) / 2`.
pub fn symmetrize(d: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if d.nrows() != d.ncols() {
        return Err(Error::invalid(format!("dissimilarity matrix is {}x{}, not square", d.nrows(), d.ncols())));
    }
    let mut out = d.to_owned();
    let n = d.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = (d[[i, j]] + d[[j, i]]) / 2.0;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

/// Linear-interpolation quantile between order statistics (the "type 7" rule).
pub fn quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::invalid(format!("quantile level {level} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// φ(δ) = 1 − exp(−γ δ²), calibrated so that φ(δ₀) = 0.95.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiTransform {
    pub gamma: f64,
    pub delta0: f64,
}

impl PhiTransform {
    pub fn with_delta0(delta0: f64) -> Result<Self> {
        if !(delta0.is_finite() && delta0 > 0.0) {
            return Err(Error::Degenerate(format!("δ₀ = {delta0} must be positive")));
        }
        Ok(PhiTransform { gamma: -(0.05f64).ln() / (delta0 * delta0), delta0 })
    }

    /// Takes δ₀ as the `level`-quantile of the given dissimilarities.
    pub fn calibrate(dissimilarities: &[f64], level: f64) -> Result<Self> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::invalid(format!("δ₀ quantile level {level} outside (0, 1]")));
        }
        if dissimilarities.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("dissimilarities must be finite and nonnegative"));
        }
        let delta0 = quantile(dissimilarities, level)?;
        if delta0 == 0.0 {
            return Err(Error::Degenerate(format!("the {level}-quantile of the dissimilarities is zero")));
        }
        Self::with_delta0(delta0)
    }

    /// Calibrates on the off-diagonal (i < j) entries of a square matrix.
    pub fn calibrate_matrix(d: ArrayView2<'_, f64>, level: f64) -> Result<Self> {
        Self::calibrate(&upper_triangle(d), level)
    }

    pub fn apply(&self, delta: f64) -> f64 {
        -(-self.gamma * delta * delta).exp_m1()
    }
}

pub(crate) fn upper_triangle(d: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = d.nrows();
    let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            v.push(d[[i, j]]);
        }
    }
    v
}

/// Where pairwise dissimilarities come from.
#[derive(Debug, Clone)]
pub enum Dissimilarities {
    /// A full `n x n` matrix.
    Matrix(Array2<f64>),
    /// Euclidean distances computed on demand from attribute rows.
    Euclidean(Array2<f64>),
}

impl Dissimilarities {
    pub fn len(&self) -> usize {
        match self {
            Dissimilarities::Matrix(d) => d.nrows(),
            Dissimilarities::Euclidean(x) => x.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Dissimilarities::Matrix(d) => d[[i, j]],
            Dissimilarities::Euclidean(x) => euclidean(x.row(i), x.row(j)),
        }
    }

    /// All off-diagonal (i < j) values.
    pub fn off_diagonal(&self) -> Vec<f64> {
        match self {
            Dissimilarities::Matrix(d) => upper_triangle(d.view()),
            Dissimilarities::Euclidean(_) => {
                let n = self.len();
                let mut v = Vec::with_capacity(n * n.saturating_sub(1) / 2);
                for i in 0..n {
                    for j in i + 1..n {
                        v.push(self.get(i, j));
                    }
                }
                v
            }
        }
    }
}

/// One retained object pair with its transformed dissimilarity δ*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub target: f64,
}

/// A list of pairs together with the factor that turns the sum of squared
/// errors into the averaged loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
    pub weight: f64,
}

impl PairSet {
    /// Pairs averaged with weight `1 / len`.
    pub fn averaged(pairs: Vec<Pair>) -> Self {
        let weight = if pairs.is_empty() { 0.0 } else { 1.0 / pairs.len() as f64 };
        PairSet { pairs, weight }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// How pairs were selected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    /// Every pair i < j.
    Dense,
    /// `p` partners per object, drawn once.
    Sampled { p: usize },
}

/// Transformed dissimilarities for the pairs entering the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityView {
    pub n: usize,
    pub mode: ViewMode,
    pub phi: PhiTransform,
    pub pairs: PairSet,
}

impl DissimilarityView {
    /// All pairs i < j, weighted by 2 / (n(n−1)).
    pub fn dense(source: &Dissimilarities, phi: PhiTransform) -> Result<Self> {
        let n = source.len();
        if n < 2 {
            return Err(Error::invalid("at least two objects are required"));
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push(Pair { i, j, target: phi.apply(source.get(i, j)) });
            }
        }
        Ok(DissimilarityView { n, mode: ViewMode::Dense, phi, pairs: PairSet::averaged(pairs) })
    }

    /// Pairs `(i, j)` for `j ∈ J(i)`, weighted by 1 / (np).
    pub fn sampled(source: &Dissimilarities, phi: PhiTransform, partners: &[Vec<usize>]) -> Result<Self> {
        let n = source.len();
        if partners.len() != n {
            return Err(Error::dims(n, partners.len(), "partner lists"));
        }
        let p = partners.first().map_or(0, Vec::len);
        let mut pairs = Vec::with_capacity(n * p);
        for (i, js) in partners.iter().enumerate() {
            if js.len() != p {
                return Err(Error::invalid("partner lists must all have the same size"));
            }
            for &j in js {
                if j >= n || j == i {
                    return Err(Error::invalid(format!("invalid partner {j} for object {i}")));
                }
                pairs.push(Pair { i, j, target: phi.apply(source.get(i, j)) });
            }
        }
        Ok(DissimilarityView { n, mode: ViewMode::Sampled { p }, phi, pairs: PairSet::averaged(pairs) })
    }
}

/// Draws `J(i)`: `p` distinct partners `≠ i` for every object.
pub fn sample_pairs(n: usize, p: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n < 2 || p == 0 || p > n - 1 {
        return Err(Error::invalid(format!("sample size p = {p} must lie in 1..={}", n.saturating_sub(1))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|i| {
            let mut js: Vec<usize> = rand::seq::index::sample(&mut rng, n - 1, p)
                .into_iter()
                .map(|k| if k >= i { k + 1 } else { k })
                .collect();
            js.sort_unstable();
            js
        })
        .collect())
}

/// Randomly splits `0..n` into `s` groups whose sizes differ by at most one.
pub fn random_groups<R: rand::Rng>(n: usize, s: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if s == 0 || s > n / 2 {
        return Err(Error::invalid(format!("block count s = {s} must lie in 1..={}", n / 2)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let base = n / s;
    let extra = n % s;
    let mut groups = Vec::with_capacity(s);
    let mut start = 0;
    for b in 0..s {
        let size = base + usize::from(b < extra);
        groups.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(groups)
}

/// All unordered pairs within each group.
pub fn group_pairs(groups: &[Vec<usize>]) -> Vec<Vec<(usize, usize)>> {
    groups
        .iter()
        .map(|g| {
            let mut pairs = Vec::with_capacity(g.len() * g.len().saturating_sub(1) / 2);
            for a in 0..g.len() {
                for b in a + 1..g.len() {
                    let (i, j) = (g[a].min(g[b]), g[a].max(g[b]));
                    pairs.push((i, j));
                }
            }
            pairs
        })
        .collect()
}

/// Minibatch pair blocks for one epoch, seeded.
pub fn minibatch_blocks(n: usize, s: usize, seed: u64) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(group_pairs(&random_groups(n, s, &mut rng)?))
}

/// Principal-component projection of dissimilarity rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaEmbedding {
    pub mean_row: Array1<f64>,
    /// `n x p` matrix with orthonormal columns.
    pub projection: Array2<f64>,
    /// Variances of the retained components, in decreasing order.
    pub variances: Vec<f64>,
}

impl PcaEmbedding {
    /// Effective number of components.
    pub fn dims(&self) -> usize {
        self.projection.ncols()
    }

    /// Number of training objects a new dissimilarity vector must cover.
    pub fn input_len(&self) -> usize {
        self.mean_row.len()
    }

    /// `(δ_new − mean) · projection`.
    pub fn project(&self, delta: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if delta.len() != self.input_len() {
            return Err(Error::dims(self.input_len(), delta.len(), "dissimilarity vector"));
        }
        Ok((&delta - &self.mean_row).dot(&self.projection))
    }

    pub fn project_rows(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.input_len() {
            return Err(Error::dims(self.input_len(), rows.ncols(), "dissimilarity vector"));
        }
        Ok((&rows - &self.mean_row.view().insert_axis(Axis(0))).dot(&self.projection))
    }
}

/// Treats each row of `d` as an attribute vector and keeps the first `p`
/// principal components. Returns the embedding and the `n x p` scores.
///
/// Fewer than `p` components are returned when the centred rows have lower rank.
pub fn pca_embed(d: ArrayView2<'_, f64>, p: usize) -> Result<(PcaEmbedding, Array2<f64>)> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::invalid("PCA input must be a square dissimilarity matrix"));
    }
    if p == 0 || p > n {
        return Err(Error::invalid(format!("PCA dimension {p} must lie in 1..={n}")));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dissimilarity matrix".into()));
    }
    let scale = d.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (d[[i, j]] - d[[j, i]]).abs() > 1e-9 * scale {
                return Err(Error::invalid("PCA input must be symmetric; symmetrize it first"));
            }
        }
    }
    let mean_row = d.mean_axis(Axis(0)).expect("n >= 1");
    let centred = &d - &mean_row.view().insert_axis(Axis(0));
    let denom = (n.max(2) - 1) as f64;
    let cov = centred.t().dot(&centred) / denom;

    let eig = SymmetricEigen::new(DMatrix::from_fn(n, n, |r, c| cov[[r, c]]));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank_floor = top * 1e-10 * n as f64;
    let keep: Vec<usize> =
        order.into_iter().take(p).take_while(|&k| top > 0.0 && eig.eigenvalues[k] > rank_floor).collect();

    let mut projection = Array2::zeros((n, keep.len()));
    for (col, &k) in keep.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = (0..n).fold(0, |best, r| if v[r].abs() > v[best].abs() { r } else { best });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            projection[[r, col]] = sign * v[r];
        }
    }
    let variances = keep.iter().map(|&k| eig.eigenvalues[k]).collect();
    let scores = centred.dot(&projection);
    Ok((PcaEmbedding { mean_row, projection, variances }, scores))
}
