//! Reference computations shared by the integration tests.

use nnevclus::FocalSets;
use rand::Rng;

/// A random mass vector with roughly a third of the focal sets left empty.
pub fn random_mass(f: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut m: Vec<f64> =
        (0..f).map(|_| if rng.random::<f64>() < 0.35 { 0.0 } else { -rng.random::<f64>().ln() }).collect();
    if m.iter().all(|&v| v == 0.0) {
        m[rng.random_range(0..f)] = 1.0;
    }
    let total: f64 = m.iter().sum();
    m.iter_mut().for_each(|v| *v /= total);
    m
}

/// κ as the plain double sum over disjoint focal sets.
pub fn kappa_double_sum(fs: &FocalSets, a: &[f64], b: &[f64]) -> f64 {
    let mut k = 0.0;
    for (p, &sp) in fs.subsets().iter().enumerate() {
        for (q, &sq) in fs.subsets().iter().enumerate() {
            if sp.0 & sq.0 == 0 {
                k += a[p] * b[q];
            }
        }
    }
    k
}

/// Plausibility on Ω² of "same class" and "different class", by enumerating
/// the class pairs inside each product of focal sets.
pub fn pl_same_different(fs: &FocalSets, a: &[f64], b: &[f64]) -> (f64, f64) {
    let c = fs.clusters();
    let (mut same, mut diff) = (0.0, 0.0);
    for (p, &sp) in fs.subsets().iter().enumerate() {
        for (q, &sq) in fs.subsets().iter().enumerate() {
            let w = a[p] * b[q];
            let mut hits_same = false;
            let mut hits_diff = false;
            for k in 0..c {
                for l in 0..c {
                    if sp.contains(k) && sq.contains(l) {
                        if k == l {
                            hits_same = true;
                        } else {
                            hits_diff = true;
                        }
                    }
                }
            }
            if hits_same {
                same += w;
            }
            if hits_diff {
                diff += w;
            }
        }
    }
    (same, diff)
}
