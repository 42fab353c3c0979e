//! Library results checked against slow, independent reimplementations.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use nnevclus::dissim::{pca_embed, symmetrize};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::focalsets::Subset;
use nnevclus::network::NetworkParams;
use nnevclus::ocsvm::{kernel_matrix, solve_dual};
use nnevclus::training::{penalty_labels, penalty_must_cannot, ConstraintSet, InstanceSpec, LabelSet};
use nnevclus::{FocalScheme, FocalSets, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{kappa_double_sum, pl_same_different, random_mass};

fn schemes() -> Vec<FocalSets> {
    vec![
        FocalSets::build(Frame::new(3).unwrap(), FocalScheme::Full).unwrap(),
        FocalSets::build(Frame::new(4).unwrap(), FocalScheme::PairsPlus).unwrap(),
        FocalSets::build(Frame::new(5).unwrap(), FocalScheme::SingletonsPlus).unwrap(),
    ]
}

#[test]
fn conflict_matrix_form_matches_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for fs in schemes() {
        for _ in 0..1000 {
            let a = random_mass(fs.len(), &mut rng);
            let b = random_mass(fs.len(), &mut rng);
            let k = fs.degree_of_conflict(&a, &b).unwrap();
            assert!((k - kappa_double_sum(&fs, &a, &b)).abs() < 1e-12);
        }
    }
}

#[test]
fn penalty_matrix_matches_plausibility_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for fs in schemes() {
        for _ in 0..1000 {
            let a = random_mass(fs.len(), &mut rng);
            let b = random_mass(fs.len(), &mut rng);
            let masses = Array2::from_shape_fn((2, fs.len()), |(r, q)| if r == 0 { a[q] } else { b[q] });
            let (pl_s, pl_d) = pl_same_different(&fs, &a, &b);

            let ml = ConstraintSet::new(2, vec![(0, 1)], vec![]).unwrap();
            let cl = ConstraintSet::new(2, vec![], vec![(0, 1)]).unwrap();
            let (p_ml, zero) = penalty_must_cannot(masses.view(), &ml, &fs).unwrap();
            let (zero2, p_cl) = penalty_must_cannot(masses.view(), &cl, &fs).unwrap();
            assert_eq!((zero, zero2), (0.0, 0.0));
            assert!((p_ml - (pl_d + 1.0 - pl_s)).abs() < 1e-12, "{p_ml} vs {}", pl_d + 1.0 - pl_s);
            assert!((p_cl - (pl_s + 1.0 - pl_d)).abs() < 1e-12);

            let (same, different) = fs.plausibility_same(&a, &b).unwrap();
            assert!((same - pl_s).abs() < 1e-12 && (different - pl_d).abs() < 1e-12);
        }
    }
}

#[test]
fn label_penalty_matches_contour_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let fs = FocalSets::build(Frame::new(4).unwrap(), FocalScheme::PairsPlus).unwrap();
    let n = 20;
    let mut masses = Array2::zeros((n, fs.len()));
    for i in 0..n {
        let m = random_mass(fs.len(), &mut rng);
        masses.row_mut(i).assign(&Array1::from(m));
    }
    let entries: Vec<(usize, usize)> = (0..n).step_by(3).map(|i| (i, i % 4)).collect();
    let labels = LabelSet::new(n, 4, entries.clone()).unwrap();
    let mut expected = 0.0;
    for &(i, y) in &entries {
        for l in 0..4 {
            let pl: f64 =
                fs.subsets().iter().enumerate().filter(|(_, s)| s.contains(l)).map(|(q, _)| masses[[i, q]]).sum();
            let target = if l == y { 1.0 } else { 0.0 };
            expected += (pl - target).powi(2);
        }
    }
    expected /= entries.len() as f64;
    assert_relative_eq!(penalty_labels(masses.view(), &labels, &fs).unwrap(), expected, max_relative = 1e-13);
}

/// Forward pass written out from the layer shapes alone.
fn oracle_masses(params: &NetworkParams, x: &[f64], score: Option<f64>) -> Vec<f64> {
    let mut h: Vec<f64> = x.to_vec();
    for layer in &params.hidden {
        h = (0..layer.nrows())
            .map(|u| {
                let a = layer[[u, 0]] + (0..h.len()).map(|k| layer[[u, k + 1]] * h[k]).sum::<f64>();
                a.max(0.0)
            })
            .collect();
    }
    let w = &params.output;
    let mu: Vec<f64> =
        (0..w.nrows()).map(|q| w[[q, 0]] + (0..h.len()).map(|k| w[[q, k + 1]] * h[k]).sum::<f64>()).collect();
    let top = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = mu.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut m: Vec<f64> = e.iter().map(|v| v / z).collect();
    if let Some(s) = score {
        let eta = (1.0 + (params.beta0 + params.beta1 * s).exp()).ln();
        let gamma = eta / (1.0 + eta);
        for v in m.iter_mut() {
            *v *= gamma;
        }
        m[0] += 1.0 - gamma;
    }
    m
}

#[test]
fn loss_matches_brute_force() {
    for seed in 0..12u64 {
        let spec = InstanceSpec {
            n: 9,
            d: 3,
            hidden: if seed % 3 == 0 { vec![4, 3] } else { vec![5] },
            clusters: 3,
            scheme: if seed % 2 == 0 { FocalScheme::PairsPlus } else { FocalScheme::Full },
            gate: seed % 4 != 1,
            constraints: 5,
            labels: if seed % 5 == 0 { 0 } else { 3 },
            lambda: 0.3,
            xi: 0.7,
            nu: 0.4,
            seed,
        };
        let inst = spec.build().unwrap();
        let fs = &inst.focal;
        let n = inst.inputs.nrows();
        let masses: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let score = inst.svm_scores.as_ref().map(|s| s[i]);
                oracle_masses(&inst.params, inst.inputs.row(i).as_slice().unwrap(), score)
            })
            .collect();

        let mut base = 0.0;
        for p in &inst.pairs.pairs {
            base += (kappa_double_sum(fs, &masses[p.i], &masses[p.j]) - p.target).powi(2);
        }
        base /= inst.pairs.pairs.len() as f64;

        let cs = inst.constraints.as_ref().unwrap();
        let mut pen = 0.0;
        for &(i, j) in cs.must_link() {
            let (s, d) = pl_same_different(fs, &masses[i], &masses[j]);
            pen += d + 1.0 - s;
        }
        for &(i, j) in cs.cannot_link() {
            let (s, d) = pl_same_different(fs, &masses[i], &masses[j]);
            pen += s + 1.0 - d;
        }
        let constraint = 0.7 / (2.0 * cs.len() as f64) * pen;

        let (nu, labels) = match inst.labels.as_ref().filter(|l| !l.is_empty()) {
            Some(ls) => {
                let mut total = 0.0;
                for &(i, y) in ls.entries() {
                    for l in 0..3 {
                        let pl: f64 =
                            fs.subsets().iter().zip(&masses[i]).filter(|(s, _)| s.contains(l)).map(|(_, v)| v).sum();
                        total += (pl - if l == y { 1.0 } else { 0.0 }).powi(2);
                    }
                }
                (0.4, total / ls.len() as f64)
            }
            None => (0.0, 0.0),
        };

        let mut reg = 0.0;
        for layer in inst.params.hidden.iter().chain(std::iter::once(&inst.params.output)) {
            reg += layer.iter().map(|v| v * v).sum::<f64>() / layer.len() as f64;
        }
        reg *= 0.3 / 2.0;

        let expected = (1.0 - nu) * (base + constraint) + nu * labels + reg;
        let got = inst.objective().loss(&inst.params).unwrap();
        assert_relative_eq!(got.base, base, max_relative = 1e-12);
        assert_relative_eq!(got.total, expected, max_relative = 1e-12);
    }
}

#[test]
fn ari_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..50 {
        let n = rng.random_range(2..60);
        let ka = rng.random_range(1..5);
        let kb = rng.random_range(1..6);
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = if trial % 5 == 0 { a.clone() } else { (0..n).map(|_| rng.random_range(0..kb)).collect() };
        let (mut n11, mut n10, mut n01, mut n00) = (0.0f64, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => n11 += 1.0,
                    (true, false) => n10 += 1.0,
                    (false, true) => n01 += 1.0,
                    (false, false) => n00 += 1.0,
                }
            }
        }
        let denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
        let expected = if denom == 0.0 { 1.0 } else { 2.0 * (n00 * n11 - n01 * n10) / denom };
        let got = adjusted_rand_index(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-12, "trial {trial}: {got} vs {expected}");
    }
}

/// Cyclic Jacobi rotations on a symmetric matrix; returns eigenpairs sorted by
/// decreasing eigenvalue, vectors as columns.
fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[[y, y]].total_cmp(&m[[x, x]]));
    let values = order.iter().map(|&k| m[[k, k]]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| v[[r, order[c]]]);
    (values, vectors)
}

#[test]
fn pca_matches_jacobi_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5 {
        let n = 12;
        let raw = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { rng.random_range(0.5..5.0) });
        let d = symmetrize(raw.view()).unwrap();
        let p = 4;
        let (emb, scores) = pca_embed(d.view(), p).unwrap();

        let mean = d.mean_axis(ndarray::Axis(0)).unwrap();
        let centred = &d - &mean.view().insert_axis(ndarray::Axis(0));
        let cov = centred.t().dot(&centred) / (n - 1) as f64;
        let (values, vectors) = jacobi_eigen(&cov);
        for k in 0..p {
            assert_relative_eq!(emb.variances[k], values[k], max_relative = 1e-9);
            let oracle_col = centred.dot(&vectors.column(k));
            // eigenvectors are defined up to sign
            let sign = if oracle_col.dot(&scores.column(k)) < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                assert!((scores[[i, k]] - sign * oracle_col[i]).abs() < 1e-8);
            }
        }
        // projecting the training rows again reproduces the scores
        let again = emb.project_rows(d.view()).unwrap();
        assert!((&again - &scores).iter().all(|v| v.abs() < 1e-10));
    }
}

/// Exhaustive active-set search: every object is at zero, at the upper
/// bound, or free; the free block solves the equality-constrained KKT system.
fn qp_oracle(k: &Array2<f64>, nu: f64) -> f64 {
    let n = k.nrows();
    let upper = 1.0 / (nu * n as f64);
    let mut best = f64::INFINITY;
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let bound: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let rest = 1.0 - bound.len() as f64 * upper;
        let mut alpha = vec![0.0; n];
        for &i in &bound {
            alpha[i] = upper;
        }
        let feasible = if free.is_empty() {
            rest.abs() < 1e-12
        } else if rest <= 0.0 {
            false
        } else {
            let m = free.len();
            let mut a = DMatrix::zeros(m + 1, m + 1);
            let mut rhs = DVector::zeros(m + 1);
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    a[(r, c)] = k[[i, j]];
                }
                a[(r, m)] = -1.0;
                a[(m, r)] = 1.0;
                rhs[r] = -bound.iter().map(|&j| k[[i, j]] * upper).sum::<f64>();
            }
            rhs[m] = rest;
            match a.lu().solve(&rhs) {
                Some(sol) => {
                    let ok = (0..m).all(|r| sol[r] >= -1e-12 && sol[r] <= upper + 1e-12);
                    for (r, &i) in free.iter().enumerate() {
                        alpha[i] = sol[r];
                    }
                    ok
                }
                None => false,
            }
        };
        if feasible {
            let mut obj = 0.0;
            for i in 0..n {
                for j in 0..n {
                    obj += alpha[i] * alpha[j] * k[[i, j]];
                }
            }
            best = best.min(0.5 * obj);
        }
        // next state in base 3
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            state[pos] += 1;
            if state[pos] < 3 {
                break;
            }
            state[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn svm_dual_matches_exhaustive_qp() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for trial in 0..8 {
        let n = 6 + trial % 5;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
        let nu = [0.2, 0.35, 0.5, 0.8][trial % 4];
        let k = kernel_matrix(x.view(), 0.7);
        let sol = solve_dual(&k, nu, 1e-4, 1_000_000, trial as u64).unwrap();
        let oracle = qp_oracle(&k, nu);
        assert!((sol.objective - oracle).abs() < 1e-6, "n={n} nu={nu}: {} vs {oracle}", sol.objective);
        let upper = 1.0 / (nu * n as f64);
        assert!((sol.alphas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sol.alphas.iter().all(|&a| (0.0..=upper + 1e-15).contains(&a)));
    }
}

#[test]
fn subset_bits_follow_scheme_order() {
    let fs = FocalSets::build(Frame::new(3).unwrap(), FocalScheme::PairsPlus).unwrap();
    let sizes: Vec<usize> = fs.subsets().iter().map(|s| s.len()).collect();
    assert_eq!(sizes, vec![0, 1, 1, 1, 2, 2, 2, 3]);
    assert_eq!(fs.subsets()[7], Subset(0b111));
}
