//! Evidential clustering with a neural network.
//!
//! A feedforward network maps each object to a mass function over subsets of
//! the set of clusters. It is trained so that the degree of conflict between
//! the mass functions of two objects matches a transform of their
//! dissimilarity. Optional pieces: a one-class SVM gate that moves mass to the
//! empty set for outliers, must-link / cannot-link penalties, a labelled-data
//! penalty, and PCA embedding of dissimilarity rows for relational data.
//!
//! ```
//! use nnevclus::focalsets::{FocalScheme, FocalSets, Frame};
//!
//! let fs = FocalSets::build(Frame::new(3).unwrap(), FocalScheme::Full).unwrap();
//! let mut m1 = vec![0.0; fs.len()];
//! m1[fs.len() - 1] = 1.0; // vacuous
//! assert_eq!(fs.degree_of_conflict(&m1, &m1).unwrap(), 0.0);
//! ```

pub mod bundle;
pub mod cli;
pub mod config;
pub mod datasets;
pub mod dissim;
pub mod error;
pub mod eval;
pub mod evidential;
pub mod focalsets;
pub mod io;
pub mod network;
pub mod ocsvm;
pub mod training;

pub use error::{Error, Result};
pub use evidential::{EvidentialPartition, RoughPartition};
pub use focalsets::{FocalScheme, FocalSets, Frame};
pub use network::{Model, NetworkParams};
