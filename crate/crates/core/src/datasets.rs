//! Small datasets for examples and tests: seeded synthetic generators and the
//! bundled Iris table.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};

use crate::error::{Error, Result};

/// Attribute rows with the index of the generating component.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
}

/// Isotropic Gaussian clusters, `per_cluster` points around each centre.
pub fn gaussian_blobs(centres: &Array2<f64>, per_cluster: usize, sd: f64, seed: u64) -> Result<Dataset> {
    let noise = Normal::new(0.0, sd).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, d) = centres.dim();
    let mut x = Array2::zeros((k * per_cluster, d));
    let mut labels = Vec::with_capacity(k * per_cluster);
    for c in 0..k {
        for r in 0..per_cluster {
            let i = c * per_cluster + r;
            for j in 0..d {
                x[[i, j]] = centres[[c, j]] + noise.sample(&mut rng);
            }
            labels.push(c);
        }
    }
    Ok(Dataset { x, labels })
}

/// Centres of the four-class generator.
pub const FOURCLASS_CENTRES: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 6.0], [6.0, 0.0], [6.0, 6.0]];
/// Degrees of freedom of the Student components.
pub const FOURCLASS_DF: f64 = 5.0;

/// Four bivariate Student-t clusters: independent `t(5)` coordinates with unit
/// scale around the corners of a square of side 6. 100 points per cluster
/// gives the 400-point set used throughout the examples.
pub fn fourclass(per_cluster: usize, seed: u64) -> Dataset {
    let t = StudentT::new(FOURCLASS_DF).expect("positive degrees of freedom");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((4 * per_cluster, 2));
    let mut labels = Vec::with_capacity(4 * per_cluster);
    for (c, centre) in FOURCLASS_CENTRES.iter().enumerate() {
        for r in 0..per_cluster {
            let i = c * per_cluster + r;
            x[[i, 0]] = centre[0] + t.sample(&mut rng);
            x[[i, 1]] = centre[1] + t.sample(&mut rng);
            labels.push(c);
        }
    }
    Dataset { x, labels }
}

/// Two interleaved half circles of radius 1 with Gaussian noise.
pub fn two_moons(per_moon: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let jitter = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((2 * per_moon, 2));
    let mut labels = Vec::with_capacity(2 * per_moon);
    for moon in 0..2 {
        for r in 0..per_moon {
            let i = moon * per_moon + r;
            let t = std::f64::consts::PI * rng.random::<f64>();
            let (px, py) = if moon == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
            x[[i, 0]] = px + jitter.sample(&mut rng);
            x[[i, 1]] = py + jitter.sample(&mut rng);
            labels.push(moon);
        }
    }
    Ok(Dataset { x, labels })
}

/// Non-metric dissimilarities between objects of `clusters` latent groups.
///
/// Objects are drawn from Gaussian clusters in `dim` dimensions; each
/// directed entry is the Euclidean distance times `1 + 0.1 u` with `u`
/// uniform on `[−1, 1]`, so the matrix is not symmetric. Objects are shuffled
/// so that any prefix mixes all groups.
pub fn relational_clusters(n: usize, clusters: usize, dim: usize, seed: u64) -> Result<(Array2<f64>, Vec<usize>)> {
    if clusters == 0 || dim == 0 || n < clusters {
        return Err(Error::invalid("need at least one object per cluster and a positive dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let centres = Array2::from_shape_fn((clusters, dim), |_| 4.0 * unit.sample(&mut rng));
    let mut labels: Vec<usize> = (0..n).map(|i| i % clusters).collect();
    use rand::seq::SliceRandom;
    labels.shuffle(&mut rng);
    let points: Vec<Array1<f64>> =
        labels.iter().map(|&c| Array1::from_shape_fn(dim, |j| centres[[c, j]] + unit.sample(&mut rng))).collect();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dist = (&points[i] - &points[j]).mapv(|v| v * v).sum().sqrt();
                d[[i, j]] = dist * (1.0 + 0.1 * rng.random_range(-1.0..=1.0));
            }
        }
    }
    Ok((d, labels))
}

const IRIS: &str = include_str!("../data/iris.csv");

/// Fisher's Iris data: 150 × 4 measurements (cm) and species codes 0, 1, 2.
pub fn iris() -> Dataset {
    let mut rdr = csv::Reader::from_reader(IRIS.as_bytes());
    let mut values = Vec::with_capacity(600);
    let mut labels = Vec::with_capacity(150);
    let mut species: Vec<String> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.expect("bundled iris table");
        for k in 0..4 {
            values.push(rec[k].parse::<f64>().expect("bundled iris table"));
        }
        let name = rec[4].to_string();
        let code = species.iter().position(|s| *s == name).unwrap_or_else(|| {
            species.push(name);
            species.len() - 1
        });
        labels.push(code);
    }
    Dataset { x: Array2::from_shape_vec((labels.len(), 4), values).expect("4 columns"), labels }
}
