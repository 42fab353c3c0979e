//! Evidential partitions and their hard and rough summaries.

use std::io::Write;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::focalsets::FocalSets;

/// One mass vector per object, stored as the rows of an `n x f` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidentialPartition {
    focal: FocalSets,
    masses: Array2<f64>,
}

/// Lower and upper approximations of each cluster, plus the outliers.
///
/// Object indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoughPartition {
    pub lower: Vec<Vec<usize>>,
    pub upper: Vec<Vec<usize>>,
    pub outliers: Vec<usize>,
}

impl EvidentialPartition {
    /// Wraps a mass matrix after checking every row.
    pub fn new(focal: FocalSets, masses: Array2<f64>) -> Result<Self> {
        if masses.ncols() != focal.len() {
            return Err(Error::dims(focal.len(), masses.ncols(), "partition columns"));
        }
        for row in masses.rows() {
            focal.validate_mass(row.as_slice().unwrap_or(&row.to_vec()))?;
        }
        Ok(EvidentialPartition { focal, masses })
    }

    pub fn focal_sets(&self) -> &FocalSets {
        &self.focal
    }

    pub fn masses(&self) -> &Array2<f64> {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.nrows() == 0
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.masses.row(i)
    }

    /// Contour functions of all objects as an `n x c` matrix.
    pub fn plausibilities(&self) -> Array2<f64> {
        self.masses.dot(&self.focal.membership().t())
    }

    /// Zero-based label of the most plausible cluster for each object.
    ///
    /// Ties go to the lowest cluster index.
    pub fn hard_partition(&self) -> Vec<usize> {
        self.plausibilities().rows().into_iter().map(|pl| argmax_first(pl.iter().copied())).collect()
    }

    /// Index of the maximum-mass focal set of object `i`.
    ///
    /// Ties prefer the smaller focal set, then the lower focal index.
    pub fn max_mass_focal(&self, i: usize) -> usize {
        let subsets = self.focal.subsets();
        let row = self.masses.row(i);
        let mut best = 0;
        for q in 1..row.len() {
            let better = row[q] > row[best] || (row[q] == row[best] && subsets[q].len() < subsets[best].len());
            if better {
                best = q;
            }
        }
        best
    }

    /// Approximates each mass function by its maximum-mass focal set.
    pub fn rough_partition(&self) -> RoughPartition {
        let c = self.focal.clusters();
        let mut rough = RoughPartition { lower: vec![Vec::new(); c], upper: vec![Vec::new(); c], outliers: Vec::new() };
        for i in 0..self.len() {
            let a = self.focal.subsets()[self.max_mass_focal(i)];
            if a.is_empty() {
                rough.outliers.push(i);
                continue;
            }
            if a.len() == 1 {
                rough.lower[a.members().next().unwrap()].push(i);
            }
            for k in a.members() {
                rough.upper[k].push(i);
            }
        }
        rough
    }

    /// Writes the partition as CSV: one mass column per focal set, then the
    /// 1-based hard label and the 0/1 outlier flag.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = self.focal.column_names();
        header.push("label".into());
        header.push("outlier".into());
        writer.write_record(&header)?;
        let labels = self.hard_partition();
        let rough = self.rough_partition();
        let mut outlier = vec![false; self.len()];
        for &i in &rough.outliers {
            outlier[i] = true;
        }
        for i in 0..self.len() {
            let mut record: Vec<String> = self.masses.row(i).iter().map(|v| v.to_string()).collect();
            record.push((labels[i] + 1).to_string());
            record.push(u8::from(outlier[i]).to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io("<partition csv>", e))?;
        Ok(())
    }
}

pub(crate) fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (k, v) in values.enumerate() {
        if v > best_value {
            best = k;
            best_value = v;
        }
    }
    best
}
