//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed.
//! `cargo test --release --test acceptance -- 4 5` runs a subset.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{array, s, Array2};
use nnevclus::cli::{cmd_fit, PARTITION_FILE};
use nnevclus::config::RunConfig;
use nnevclus::datasets::{fourclass, iris, relational_clusters, two_moons, Dataset, FOURCLASS_CENTRES};
use nnevclus::dissim::{pca_embed, sample_pairs, symmetrize, Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::focalsets::Subset;
use nnevclus::network::{default_hidden_units, Model, NetworkParams, Standardizer};
use nnevclus::ocsvm::OneClassSvm;
use nnevclus::training::{
    grad_check, train, ConstraintSet, GradCheckOptions, InstanceSpec, LossWeights, Objective, OptimizerKind,
    TrainConfig, TrainingData,
};
use nnevclus::{FocalScheme, FocalSets, Frame, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{kappa_double_sum, pl_same_different, random_mass};

type Criterion = (usize, &'static str, fn() -> Result<Verdict>);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// Best-of-`restarts` batch training on standardized inputs.
struct Fit<'a> {
    fs: &'a FocalSets,
    x: &'a Array2<f64>,
    source: &'a Dissimilarities,
    phi: PhiTransform,
    pairs: &'a nnevclus::dissim::PairSet,
    svm: Option<&'a OneClassSvm>,
    constraints: Option<&'a ConstraintSet>,
    hidden: Vec<usize>,
    weights: LossWeights,
    restarts: usize,
    seed: u64,
}

impl Fit<'_> {
    fn run(&self) -> Result<(Model, nnevclus::training::TrainOutcome)> {
        let scaler = Standardizer::fit(self.x.view())?;
        let z = scaler.apply(self.x.view())?;
        let scores = self.svm.map(|s| s.gate_scores(self.x.view()));
        let data = TrainingData {
            focal: self.fs,
            inputs: z.view(),
            svm_scores: scores.as_deref(),
            source: self.source,
            phi: self.phi,
            pairs: self.pairs,
            constraints: self.constraints,
            labels: None,
        };
        let config = TrainConfig {
            hidden_units: self.hidden.clone(),
            weights: self.weights,
            optimizer: OptimizerKind::default(),
            restarts: self.restarts,
            seed: self.seed,
        };
        let outcome = train(&data, &config)?;
        let model = Model {
            focal: self.fs.clone(),
            params: outcome.params.clone(),
            phi: self.phi,
            svm: self.svm.cloned(),
            pca: None,
            scaler: Some(scaler),
        };
        Ok((model, outcome))
    }
}

fn worked_example() -> Result<Verdict> {
    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::Full)?;
    let mass = |entries: &[(u64, f64)]| {
        let mut m = vec![0.0; fs.len()];
        for &(bits, v) in entries {
            m[fs.index_of(Subset(bits)).unwrap()] = v;
        }
        m
    };
    let m1 = mass(&[(0b001, 0.6), (0b011, 0.3), (0b111, 0.1)]);
    let m2 = mass(&[(0b011, 0.5), (0b100, 0.2), (0b111, 0.3)]);
    let m3 = mass(&[(0b001, 0.1), (0b010, 0.1), (0b100, 0.8)]);
    let k12 = fs.degree_of_conflict(&m1, &m2)?;
    let k13 = fs.degree_of_conflict(&m1, &m3)?;
    let pl12 = fs.plausibility_same(&m1, &m2)?.0;
    let pl13 = fs.plausibility_same(&m1, &m3)?.0;
    let err =
        [(k12, 0.18), (k13, 0.78), (pl12, 0.82), (pl13, 0.22)].iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(
        err < 1e-12,
        format!(
            "kappa12 = {k12:.15}, kappa13 = {k13:.15}, Pl = {pl12:.15} / {pl13:.15}, max error {err:.1e} (tol 1e-12)"
        ),
    )
}

fn gradients() -> Result<Verdict> {
    let shapes =
        [(2, FocalScheme::Full), (3, FocalScheme::SingletonsPlus), (3, FocalScheme::PairsPlus), (3, FocalScheme::Full)];
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    let count = 24u64;
    for seed in 0..count {
        let (clusters, scheme) = shapes[seed as usize % 4];
        let spec = InstanceSpec {
            n: 4 + (seed as usize % 7),
            d: 1 + (seed as usize % 3),
            hidden: vec![1 + (seed as usize % 5)],
            clusters,
            scheme,
            gate: seed % 2 == 0,
            constraints: if seed % 3 == 0 { 0 } else { 1 + seed as usize % 4 },
            labels: if seed % 4 < 2 { 0 } else { 2 },
            lambda: if seed % 5 < 3 { 0.25 } else { 0.0 },
            seed,
            ..Default::default()
        };
        let report = grad_check(&spec.build()?, &GradCheckOptions::default())?;
        worst = worst.max(report.max_rel_error);
        if !report.passed {
            failed.push(seed);
        }
    }
    verdict(
        failed.is_empty(),
        format!("{count} instances (gate on/off, constraints, labels, lambda > 0); max relative error {worst:.2e} (tol 1e-5); failing seeds {failed:?}"),
    )
}

fn matrix_forms() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_kappa: f64 = 0.0;
    let mut worst_pen: f64 = 0.0;
    for (c, scheme) in [(3, FocalScheme::Full), (4, FocalScheme::PairsPlus)] {
        let fs = FocalSets::build(Frame::new(c)?, scheme)?;
        for _ in 0..1000 {
            let a = random_mass(fs.len(), &mut rng);
            let b = random_mass(fs.len(), &mut rng);
            worst_kappa = worst_kappa.max((fs.degree_of_conflict(&a, &b)? - kappa_double_sum(&fs, &a, &b)).abs());
            let masses = Array2::from_shape_fn((2, fs.len()), |(r, q)| if r == 0 { a[q] } else { b[q] });
            let (pl_s, pl_d) = pl_same_different(&fs, &a, &b);
            let ml = ConstraintSet::new(2, vec![(0, 1)], vec![])?;
            let cl = ConstraintSet::new(2, vec![], vec![(0, 1)])?;
            let p_ml = nnevclus::training::penalty_must_cannot(masses.view(), &ml, &fs)?.0;
            let p_cl = nnevclus::training::penalty_must_cannot(masses.view(), &cl, &fs)?.1;
            worst_pen = worst_pen.max((p_ml - (pl_d + 1.0 - pl_s)).abs()).max((p_cl - (pl_s + 1.0 - pl_d)).abs());
        }
    }
    verdict(
        worst_kappa < 1e-12 && worst_pen < 1e-12,
        format!("2 x 1000 random mass pairs; conflict max error {worst_kappa:.1e}, penalty max error {worst_pen:.1e} (tol 1e-12)"),
    )
}

fn iris_reproduction() -> Result<Verdict> {
    let data = iris();
    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    let (model, outcome) = Fit {
        fs: &fs,
        x: &data.x,
        source: &source,
        phi,
        pairs: &view.pairs,
        svm: None,
        constraints: None,
        hidden: vec![default_hidden_units(fs.len())],
        weights: LossWeights::default(),
        restarts: 5,
        seed: 0,
    }
    .run()?;
    let ari = adjusted_rand_index(&model.predict(data.x.view())?.hard_partition(), &data.labels)?;
    verdict(
        ari >= 0.70,
        format!(
            "ARI = {ari:.4} (>= 0.70), loss {:.3e}, n_H = {}",
            outcome.final_loss.total,
            default_hidden_units(fs.len())
        ),
    )
}

/// The fourclass fit shared by criteria 5 and 6.
struct Fourclass {
    data: Dataset,
    model: Model,
    base_loss: f64,
    delta0: f64,
    flagged: usize,
}

fn fit_fourclass() -> Result<Fourclass> {
    let data = fourclass(100, 0);
    let n = data.x.nrows();
    let fs = FocalSets::build(Frame::new(4)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::sampled(&source, phi, &sample_pairs(n, 100, 0)?)?;
    let svm = OneClassSvm::fit_with(data.x.view(), 0.2, 0.2, 0)?;
    let flagged = svm.decision_batch(data.x.view()).iter().filter(|&&s| s < 0.0).count();
    let (model, outcome) = Fit {
        fs: &fs,
        x: &data.x,
        source: &source,
        phi,
        pairs: &view.pairs,
        svm: Some(&svm),
        constraints: None,
        hidden: vec![20],
        weights: LossWeights { lambda: 0.0, ..Default::default() },
        restarts: 5,
        seed: 0,
    }
    .run()?;
    Ok(Fourclass { data, model, base_loss: outcome.final_loss.base, delta0: phi.delta0, flagged })
}

fn fourclass_fit(fc: &Fourclass) -> Result<Verdict> {
    let ari = adjusted_rand_index(&fc.model.predict(fc.data.x.view())?.hard_partition(), &fc.data.labels)?;
    verdict(
        fc.base_loss <= 8e-3 && ari >= 0.85,
        format!("base loss {:.3e} (<= 8e-3), ARI = {ari:.4} (>= 0.85)", fc.base_loss),
    )
}

fn gating(fc: &Fourclass) -> Result<Verdict> {
    // probes on a ring around the data, further than 3 δ₀ from every centre
    let radius = 3.0 * fc.delta0 + 6.0;
    let mid = (3.0, 3.0);
    let probes = Array2::from_shape_fn((8, 2), |(k, j)| {
        let t = std::f64::consts::TAU * k as f64 / 8.0;
        if j == 0 {
            mid.0 + radius * t.cos()
        } else {
            mid.1 + radius * t.sin()
        }
    });
    for row in probes.rows() {
        for c in FOURCLASS_CENTRES {
            assert!(((row[0] - c[0]).powi(2) + (row[1] - c[1]).powi(2)).sqrt() > 3.0 * fc.delta0);
        }
    }
    let masses = fc.model.predict(probes.view())?;
    let lowest = masses.masses().column(0).iter().cloned().fold(f64::INFINITY, f64::min);
    let n = fc.data.x.nrows();
    let fraction = fc.flagged as f64 / n as f64;
    verdict(
        lowest > 0.5 && fraction <= 0.25,
        format!(
            "min m*(empty) over 8 probes beyond 3 delta0 = {:.1}: {lowest:.4} (> 0.5); flagged {}/{n} = {:.3} (<= 0.25)",
            3.0 * fc.delta0,
            fc.flagged,
            fraction
        ),
    )
}

fn constrained_lift() -> Result<Verdict> {
    let data = two_moons(100, 0.1, 0)?;
    let n = data.x.nrows();
    let fs = FocalSets::build(Frame::new(2)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    let ari_of = |constraints: Option<&ConstraintSet>, restarts: usize, seed: u64| -> Result<f64> {
        let (model, _) = Fit {
            fs: &fs,
            x: &data.x,
            source: &source,
            phi,
            pairs: &view.pairs,
            svm: None,
            constraints,
            hidden: vec![default_hidden_units(fs.len())],
            weights: LossWeights { xi: 0.5, ..Default::default() },
            restarts,
            seed,
        }
        .run()?;
        adjusted_rand_index(&model.predict(data.x.view())?.hard_partition(), &data.labels)
    };
    let base = ari_of(None, 5, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let draws = 10;
    let mut total = 0.0;
    for draw in 0..draws {
        let (mut ml, mut cl) = (Vec::new(), Vec::new());
        while ml.len() + cl.len() < 50 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            if i != j {
                if data.labels[i] == data.labels[j] {
                    ml.push((i, j))
                } else {
                    cl.push((i, j))
                }
            }
        }
        total += ari_of(Some(&ConstraintSet::new(n, ml, cl)?), 1, draw + 1)?;
    }
    let mean = total / draws as f64;
    verdict(
        base < 0.6 && mean - base >= 0.1,
        format!("unconstrained ARI = {base:.4} (< 0.6), mean over {draws} draws of 50 constraints = {mean:.4}, lift {:+.4} (>= 0.1)", mean - base),
    )
}

fn relational_generalization() -> Result<Verdict> {
    let (d, labels) = relational_clusters(400, 3, 5, 0)?;
    let d_train = symmetrize(d.slice(s![..200, ..200]))?;
    let (pca, x) = pca_embed(d_train.view(), 5)?;
    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Matrix(d_train);
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    let (mut model, _) = Fit {
        fs: &fs,
        x: &x,
        source: &source,
        phi,
        pairs: &view.pairs,
        svm: None,
        constraints: None,
        hidden: vec![default_hidden_units(fs.len())],
        weights: LossWeights::default(),
        restarts: 5,
        seed: 0,
    }
    .run()?;
    model.pca = Some(pca);
    let train = adjusted_rand_index(&model.predict_raw(d.slice(s![..200, ..200]))?.hard_partition(), &labels[..200])?;
    let test = adjusted_rand_index(&model.predict_raw(d.slice(s![200.., ..200]))?.hard_partition(), &labels[200..])?;
    verdict(
        (train - test).abs() <= 0.1 && test >= 0.8,
        format!("train ARI = {train:.4}, test ARI = {test:.4} (gap <= 0.1, test >= 0.8)"),
    )
}

fn determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir().map_err(|e| nnevclus::Error::io(std::env::temp_dir(), e))?;
    let data = iris();
    let mut text = String::from("sl,sw,pl,pw\n");
    for row in data.x.rows() {
        writeln!(text, "{},{},{},{}", row[0], row[1], row[2], row[3]).unwrap();
    }
    let csv = dir.path().join("iris.csv");
    std::fs::write(&csv, text).map_err(|e| nnevclus::Error::io(&csv, e))?;
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = RunConfig::default();
        cfg.data.attributes = Some(csv.clone());
        cfg.model.clusters = 3;
        cfg.restarts = 3;
        cfg.seed = 11;
        cfg.optimizer.batch.max_epochs = 300;
        cfg.out = dir.path().join(run);
        cmd_fit(&cfg)?;
        let path = cfg.out.join(PARTITION_FILE);
        bytes.push(std::fs::read(&path).map_err(|e| nnevclus::Error::io(&path, e))?);
    }
    verdict(
        bytes[0] == bytes[1],
        format!(
            "two fits with seed 11: partition CSVs of {} and {} bytes, identical = {}",
            bytes[0].len(),
            bytes[1].len(),
            bytes[0] == bytes[1]
        ),
    )
}

fn scaling() -> Result<Verdict> {
    let fs = FocalSets::build(Frame::new(4)?, FocalScheme::PairsPlus)?;
    let centres = array![[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]];
    let mut times = Vec::new();
    for n in [2000, 4000] {
        let data = nnevclus::datasets::gaussian_blobs(&centres, n / 4, 1.0, 1)?;
        let source = Dissimilarities::Euclidean(data.x.clone());
        let phi = PhiTransform::with_delta0(8.0)?;
        let view = DissimilarityView::sampled(&source, phi, &sample_pairs(n, 50, 1)?)?;
        let params = NetworkParams::random(2, &[16], fs.len(), &mut ChaCha8Rng::seed_from_u64(1))?;
        let objective = Objective {
            focal: &fs,
            inputs: data.x.view(),
            svm_scores: None,
            pairs: &view.pairs,
            constraints: None,
            labels: None,
            weights: LossWeights::default(),
        };
        objective.loss(&params)?;
        let mut best = f64::INFINITY;
        for _ in 0..15 {
            let t = Instant::now();
            std::hint::black_box(objective.loss(&params)?);
            best = best.min(t.elapsed().as_secs_f64());
        }
        times.push(best);
    }
    let ratio = times[1] / times[0];
    verdict(
        (1.6..=2.6).contains(&ratio),
        format!(
            "loss evaluation, p = 50, f = {}: t(2000) = {:.2} ms, t(4000) = {:.2} ms, ratio {ratio:.2} (in [1.6, 2.6])",
            fs.len(),
            times[0] * 1e3,
            times[1] * 1e3
        ),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: usize| wanted.is_empty() || wanted.contains(&k);

    let mut failures = 0;
    let mut report = |k: usize, name: &str, started: Instant, result: Result<Verdict>| {
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(v) => {
                if !v.pass {
                    failures += 1;
                }
                println!("{} {k:>2} {name}: {} [{secs:.1} s]", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            Err(e) => {
                failures += 1;
                println!("FAIL {k:>2} {name}: error: {e} [{secs:.1} s]");
            }
        }
    };

    let simple: [Criterion; 4] = [
        (1, "worked conflict example", worked_example),
        (2, "analytic gradients", gradients),
        (3, "matrix-form equivalences", matrix_forms),
        (4, "iris", iris_reproduction),
    ];
    for (k, name, f) in simple {
        if run(k) {
            let t = Instant::now();
            report(k, name, t, f());
        }
    }
    if run(5) || run(6) {
        let t = Instant::now();
        match fit_fourclass() {
            Ok(fc) => {
                if run(5) {
                    report(5, "fourclass fit", t, fourclass_fit(&fc));
                }
                if run(6) {
                    report(6, "outlier gating", t, gating(&fc));
                }
            }
            Err(e) => {
                for (k, name) in [(5, "fourclass fit"), (6, "outlier gating")] {
                    if run(k) {
                        report(k, name, t, Err(nnevclus::Error::InvalidArgument(e.to_string())));
                    }
                }
            }
        }
    }
    let rest: [Criterion; 4] = [
        (7, "constrained lift", constrained_lift),
        (8, "relational generalization", relational_generalization),
        (9, "determinism", determinism),
        (10, "loss scaling", scaling),
    ];
    for (k, name, f) in rest {
        if run(k) {
            let t = Instant::now();
            report(k, name, t, f());
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
