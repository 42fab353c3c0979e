//! Frame of discernment, focal sets and the set-intersection matrices.
//!
//! A mass function restricted to `f` focal sets is stored as a plain slice of
//! `f` masses, indexed in the order fixed by [`FocalSets`]. The empty set, when
//! present, always sits at index 0; singletons follow in cluster order, then
//! larger subsets by cardinality and lexicographic order, and the whole frame
//! comes last.
//!
//! Three `f x f` matrices turn pairwise quantities into bilinear forms:
//!
//! * `C[q][r] = 1` iff `F_q ∩ F_r = ∅`, so the degree of conflict is `m1ᵀ C m2`;
//! * `E` indexes the empty set (first row and column);
//! * `S` is the diagonal indicator of singletons.
//!
//! `Q = 11ᵀ + C − E − S` is the matrix of the pairwise-constraint penalty.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|Σm − 1|` when validating a mass vector.
pub const MASS_SUM_TOLERANCE: f64 = 1e-9;

/// Largest frame for which the full power set may be used.
pub const MAX_FULL_FRAME: usize = 5;

/// Ω = {ω₁, …, ω_c}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    c: usize,
}

impl Frame {
    pub fn new(c: usize) -> Result<Self> {
        if c == 0 {
            return Err(Error::invalid("frame must contain at least one cluster"));
        }
        if c > 64 {
            return Err(Error::invalid(format!("frame of {c} clusters exceeds 64")));
        }
        Ok(Frame { c })
    }

    pub fn clusters(&self) -> usize {
        self.c
    }

    /// Bit-set of the whole frame.
    pub fn omega(&self) -> Subset {
        if self.c == 64 {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << self.c) - 1)
        }
    }
}

/// A subset of Ω stored as a bit-set (bit `k` ↔ ω_{k+1}).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subset(pub u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn singleton(k: usize) -> Self {
        Subset(1u64 << k)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn intersects(self, other: Subset) -> bool {
        self.0 & other.0 != 0
    }

    /// Zero-based cluster indices in increasing order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&k| self.contains(k))
    }
}

/// Which family of focal sets a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FocalScheme {
    /// All 2^c subsets (c ≤ 5).
    Full,
    /// ∅, the singletons and Ω.
    SingletonsPlus,
    /// ∅, the singletons, all pairs and Ω.
    PairsPlus,
}

impl std::str::FromStr for FocalScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FocalScheme::Full),
            "singletons_plus" | "singletons" => Ok(FocalScheme::SingletonsPlus),
            "pairs_plus" | "pairs" => Ok(FocalScheme::PairsPlus),
            other => Err(Error::invalid(format!("unknown focal scheme '{other}'"))),
        }
    }
}

/// Ordered focal sets plus the precomputed `C`, `E`, `S`, `Q` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FocalSets {
    frame: Frame,
    scheme: Option<FocalScheme>,
    subsets: Vec<Subset>,
    conflict: Array2<f64>,
    empty_index: Array2<f64>,
    singleton_diag: Array2<f64>,
    penalty: Array2<f64>,
    /// `c x f` indicator `ω_l ∈ F_r`, used for contour functions.
    membership: Array2<f64>,
}

impl FocalSets {
    /// Builds one of the standard focal-set families.
    pub fn build(frame: Frame, scheme: FocalScheme) -> Result<Self> {
        let c = frame.clusters();
        let omega = frame.omega();
        let mut subsets = vec![Subset::EMPTY];
        match scheme {
            FocalScheme::Full => {
                if c > MAX_FULL_FRAME {
                    return Err(Error::invalid(format!(
                        "the full power set is limited to c <= {MAX_FULL_FRAME} (got c = {c})"
                    )));
                }
                let mut rest: Vec<Subset> = (1..(1u64 << c)).map(Subset).collect();
                rest.sort_by_key(|s| (s.len(), lex_key(*s)));
                subsets.extend(rest);
            }
            FocalScheme::SingletonsPlus => {
                subsets.extend((0..c).map(Subset::singleton));
                subsets.push(omega);
            }
            FocalScheme::PairsPlus => {
                subsets.extend((0..c).map(Subset::singleton));
                for a in 0..c {
                    for b in a + 1..c {
                        subsets.push(Subset(1 << a | 1 << b));
                    }
                }
                subsets.push(omega);
            }
        }
        // small frames make Ω coincide with a singleton or a pair
        let mut seen = std::collections::HashSet::new();
        subsets.retain(|s| seen.insert(*s));
        let mut fs = Self::from_subsets(frame, subsets)?;
        fs.scheme = Some(scheme);
        Ok(fs)
    }

    /// Builds the structure from an explicit ordered list of subsets.
    ///
    /// If the empty set is present it must come first.
    pub fn from_subsets(frame: Frame, subsets: Vec<Subset>) -> Result<Self> {
        let f = subsets.len();
        if f < 2 {
            return Err(Error::invalid("at least two focal sets are required"));
        }
        let omega = frame.omega();
        for (q, s) in subsets.iter().enumerate() {
            if s.0 & !omega.0 != 0 {
                return Err(Error::invalid(format!("focal set {q} is not a subset of the frame")));
            }
            if s.is_empty() && q != 0 {
                return Err(Error::invalid("the empty set must be the first focal set"));
            }
            if subsets[..q].contains(s) {
                return Err(Error::invalid(format!("focal set {q} is duplicated")));
            }
        }
        let has_empty = subsets[0].is_empty();

        let conflict = Array2::from_shape_fn((f, f), |(q, r)| indicator(!subsets[q].intersects(subsets[r])));
        let empty_index = Array2::from_shape_fn((f, f), |(q, r)| indicator(has_empty && (q == 0 || r == 0)));
        let singleton_diag = Array2::from_shape_fn((f, f), |(q, r)| indicator(q == r && subsets[q].len() == 1));
        let penalty = Array2::from_shape_fn((f, f), |(q, r)| {
            1.0 + conflict[[q, r]] - empty_index[[q, r]] - singleton_diag[[q, r]]
        });
        let membership = Array2::from_shape_fn((frame.clusters(), f), |(l, r)| indicator(subsets[r].contains(l)));

        Ok(FocalSets { frame, scheme: None, subsets, conflict, empty_index, singleton_diag, penalty, membership })
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn clusters(&self) -> usize {
        self.frame.clusters()
    }

    /// The standard family used to build this structure, if any.
    pub fn scheme(&self) -> Option<FocalScheme> {
        self.scheme
    }

    /// Number of focal sets `f`.
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    pub fn subsets(&self) -> &[Subset] {
        &self.subsets
    }

    /// Index of ∅, which is always 0 when present.
    pub fn empty_set_index(&self) -> Option<usize> {
        self.subsets[0].is_empty().then_some(0)
    }

    pub fn index_of(&self, s: Subset) -> Option<usize> {
        self.subsets.iter().position(|&t| t == s)
    }

    pub fn conflict_matrix(&self) -> &Array2<f64> {
        &self.conflict
    }

    pub fn empty_matrix(&self) -> &Array2<f64> {
        &self.empty_index
    }

    pub fn singleton_matrix(&self) -> &Array2<f64> {
        &self.singleton_diag
    }

    pub fn penalty_matrix(&self) -> &Array2<f64> {
        &self.penalty
    }

    pub fn membership(&self) -> &Array2<f64> {
        &self.membership
    }

    /// Column names of the partition export, e.g. `m_{}`, `m_{1,2}`, `m_{Omega}`.
    pub fn column_names(&self) -> Vec<String> {
        let omega = self.frame.omega();
        self.subsets
            .iter()
            .map(|&s| {
                if s == omega && !s.is_empty() && self.clusters() > 1 {
                    "m_{Omega}".to_string()
                } else {
                    let ids: Vec<String> = s.members().map(|k| (k + 1).to_string()).collect();
                    format!("m_{{{}}}", ids.join(","))
                }
            })
            .collect()
    }

    /// Checks length, nonnegativity and unit sum.
    pub fn validate_mass(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.len() {
            return Err(Error::dims(self.len(), m.len(), "mass vector length"));
        }
        if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("mass vector has negative or non-finite entries"));
        }
        let total: f64 = m.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(Error::invalid(format!("masses sum to {total}, not 1")));
        }
        Ok(())
    }

    /// Degree of conflict κ = m1ᵀ C m2.
    pub fn degree_of_conflict(&self, m1: &[f64], m2: &[f64]) -> Result<f64> {
        self.validate_mass(m1)?;
        self.validate_mass(m2)?;
        Ok(bilinear(&self.conflict, m1, m2))
    }

    /// `(Pl(S), Pl(S̄))`: plausibility that the two objects share a cluster, and that they do not.
    pub fn plausibility_same(&self, m1: &[f64], m2: &[f64]) -> Result<(f64, f64)> {
        self.validate_mass(m1)?;
        self.validate_mass(m2)?;
        let kappa = bilinear(&self.conflict, m1, m2);
        let e = bilinear(&self.empty_index, m1, m2);
        let s = bilinear(&self.singleton_diag, m1, m2);
        Ok((1.0 - kappa, 1.0 - e - s))
    }

    /// Contour function `pl(ω_l) = Σ_{r: ω_l ∈ F_r} m_r`.
    pub fn contour(&self, m: &[f64]) -> Result<Array1<f64>> {
        self.validate_mass(m)?;
        Ok(self.contour_unchecked(m))
    }

    pub(crate) fn contour_unchecked(&self, m: &[f64]) -> Array1<f64> {
        self.membership.dot(&ndarray::ArrayView1::from(m))
    }
}

/// `aᵀ M b` for a square matrix.
pub(crate) fn bilinear(mat: &Array2<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (q, &aq) in a.iter().enumerate() {
        if aq == 0.0 {
            continue;
        }
        let row = mat.row(q);
        let mut acc = 0.0;
        for (r, &br) in b.iter().enumerate() {
            acc += row[r] * br;
        }
        total += aq * acc;
    }
    total
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn lex_key(s: Subset) -> Vec<usize> {
    s.members().collect()
}
