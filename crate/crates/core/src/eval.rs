//! Agreement with a reference partition and Shepard-diagram data.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dissim::PairSet;
use crate::error::{Error, Result};
use crate::evidential::EvidentialPartition;
use crate::focalsets::bilinear;

/// Adjusted Rand index of two labelings (Hubert and Arabie).
///
/// Two single-cluster labelings, or any labeling of one object, give 1.
pub fn adjusted_rand_index<A, B>(a: &[A], b: &[B]) -> Result<f64>
where
    A: Eq + Hash,
    B: Eq + Hash,
{
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len(), "labelings"));
    }
    let n = a.len();
    if n == 0 {
        return Err(Error::invalid("ARI of an empty labeling is undefined"));
    }
    let (ca, cb) = (codes_of(a), codes_of(b));
    let ka = ca.iter().max().map_or(0, |m| m + 1);
    let kb = cb.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&i, &j) in ca.iter().zip(&cb) {
        table[i * kb + j] += 1;
    }
    let comb2 = |x: u64| (x * x.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&x| comb2(x)).sum();
    let rows: f64 = (0..ka).map(|i| comb2(table[i * kb..(i + 1) * kb].iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| comb2((0..ka).map(|i| table[i * kb + j]).sum())).sum();
    let total = comb2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        // both labelings trivial in the same way
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

fn codes_of<T: Eq + Hash>(labels: &[T]) -> Vec<usize> {
    let mut map: HashMap<&T, usize> = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// One point of a Shepard diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShepardPoint {
    pub i: usize,
    pub j: usize,
    pub delta_star: f64,
    pub kappa: f64,
}

/// `(δ*ᵢⱼ, κᵢⱼ)` for every pair of `pairs`.
pub fn shepard_data(partition: &EvidentialPartition, pairs: &PairSet) -> Result<Vec<ShepardPoint>> {
    let n = partition.len();
    let conflict = partition.focal_sets().conflict_matrix();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| partition.row(i).to_vec()).collect();
    pairs
        .pairs
        .iter()
        .map(|p| {
            if p.i >= n || p.j >= n {
                return Err(Error::invalid(format!("pair ({}, {}) outside {n} objects", p.i + 1, p.j + 1)));
            }
            Ok(ShepardPoint { i: p.i, j: p.j, delta_star: p.target, kappa: bilinear(conflict, &rows[p.i], &rows[p.j]) })
        })
        .collect()
}

/// Mean squared vertical deviation from the diagonal.
pub fn shepard_stress(points: &[ShepardPoint]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().map(|p| (p.kappa - p.delta_star).powi(2)).sum::<f64>() / points.len() as f64
}

pub fn write_shepard_csv<W: Write>(points: &[ShepardPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta_star", "kappa"])?;
    for p in points {
        w.write_record([p.delta_star.to_string(), p.kappa.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<shepard>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ari: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    pub outlier_count: usize,
    pub objects: usize,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub shepard: Vec<ShepardPoint>,
}

impl EvalReport {
    /// ARI of the max-plausibility labels against `truth`; outlier flags are ignored.
    pub fn new<T: Eq + Hash>(partition: &EvidentialPartition, truth: &[T]) -> Result<Self> {
        let labels = partition.hard_partition();
        Ok(EvalReport {
            ari: adjusted_rand_index(&labels, truth)?,
            final_loss: None,
            outlier_count: partition.rough_partition().outliers.len(),
            objects: partition.len(),
            shepard: Vec::new(),
        })
    }
}
