//! Losses, penalties, analytic gradients and optimizers.

mod gradcheck;
mod objective;
mod optim;

pub use gradcheck::{grad_check, BlockReport, GradCheckInstance, GradCheckOptions, GradCheckReport, InstanceSpec};
pub use objective::{pair_loss, penalty_labels, penalty_must_cannot, Gradient, LossBreakdown, LossWeights, Objective};
pub use optim::{
    train, train_batch, train_minibatch, BatchOptions, EarlyStopping, EpochRecord, OptimizerKind, RestartSummary,
    RmsPropOptions, TrainConfig, TrainOutcome, TrainingData,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Must-link and cannot-link pairs (zero-based object indices).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    must_link: Vec<(usize, usize)>,
    cannot_link: Vec<(usize, usize)>,
}

impl ConstraintSet {
    pub fn new(n: usize, must_link: Vec<(usize, usize)>, cannot_link: Vec<(usize, usize)>) -> Result<Self> {
        let key = |(i, j): (usize, usize)| (i.min(j), i.max(j));
        for &(i, j) in must_link.iter().chain(&cannot_link) {
            if i == j {
                return Err(Error::invalid(format!("constraint links object {} to itself", i + 1)));
            }
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "constraint ({}, {}) references an object outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
        }
        let ml: std::collections::HashSet<_> = must_link.iter().copied().map(key).collect();
        if let Some(&(i, j)) = cannot_link.iter().find(|&&p| ml.contains(&key(p))) {
            return Err(Error::invalid(format!("pair ({}, {}) is both must-link and cannot-link", i + 1, j + 1)));
        }
        Ok(ConstraintSet { must_link, cannot_link })
    }

    pub fn must_link(&self) -> &[(usize, usize)] {
        &self.must_link
    }

    pub fn cannot_link(&self) -> &[(usize, usize)] {
        &self.cannot_link
    }

    pub fn len(&self) -> usize {
        self.must_link.len() + self.cannot_link.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        self.must_link.iter().chain(&self.cannot_link).map(|&(i, j)| i.max(j)).max()
    }
}

/// Labelled objects: `(object, class)`, both zero-based.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    entries: Vec<(usize, usize)>,
}

impl LabelSet {
    pub fn new(n: usize, clusters: usize, entries: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for &(i, y) in &entries {
            if i >= n {
                return Err(Error::invalid(format!("labelled object {} outside 1..={n}", i + 1)));
            }
            if y >= clusters {
                return Err(Error::invalid(format!("class {} outside 1..={clusters}", y + 1)));
            }
            if !seen.insert(i) {
                return Err(Error::invalid(format!("object {} is labelled twice", i + 1)));
            }
        }
        Ok(LabelSet { entries })
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_validation() {
        assert!(ConstraintSet::new(4, vec![(0, 1)], vec![(2, 3)]).is_ok());
        assert!(ConstraintSet::new(4, vec![(1, 1)], vec![]).is_err());
        assert!(ConstraintSet::new(4, vec![(0, 4)], vec![]).is_err());
        assert!(ConstraintSet::new(4, vec![(0, 1)], vec![(1, 0)]).is_err());
    }

    #[test]
    fn label_validation() {
        assert!(LabelSet::new(5, 3, vec![(0, 2), (4, 0)]).is_ok());
        assert!(LabelSet::new(5, 3, vec![(0, 3)]).is_err());
        assert!(LabelSet::new(5, 3, vec![(5, 0)]).is_err());
        assert!(LabelSet::new(5, 3, vec![(1, 0), (1, 1)]).is_err());
    }
}
