//! Two moons are not separable by distances alone. Fifty random must-link /
//! cannot-link pairs drawn from the true moons pull the partition towards
//! them; the unconstrained fit is shown first for comparison.
//!
//! cargo run --release --example constrained [draws] [seed]

use nnevclus::datasets::two_moons;
use nnevclus::dissim::{Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::network::{default_hidden_units, Model, Standardizer};
use nnevclus::training::{train, ConstraintSet, LossWeights, OptimizerKind, TrainConfig, TrainingData};
use nnevclus::{FocalScheme, FocalSets, Frame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_constraints(labels: &[usize], count: usize, rng: &mut impl Rng) -> nnevclus::Result<ConstraintSet> {
    let n = labels.len();
    let (mut ml, mut cl) = (Vec::new(), Vec::new());
    while ml.len() + cl.len() < count {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i == j {
            continue;
        }
        if labels[i] == labels[j] {
            ml.push((i, j));
        } else {
            cl.push((i, j));
        }
    }
    ConstraintSet::new(n, ml, cl)
}

fn main() -> nnevclus::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let data = two_moons(100, 0.1, seed)?;
    let fs = FocalSets::build(Frame::new(2)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    let scaler = Standardizer::fit(data.x.view())?;
    let z = scaler.apply(data.x.view())?;

    let fit = |constraints: Option<&ConstraintSet>, restarts: usize, seed: u64| -> nnevclus::Result<f64> {
        let training = TrainingData {
            focal: &fs,
            inputs: z.view(),
            svm_scores: None,
            source: &source,
            phi,
            pairs: &view.pairs,
            constraints,
            labels: None,
        };
        let config = TrainConfig {
            hidden_units: vec![default_hidden_units(fs.len())],
            weights: LossWeights::default(),
            optimizer: OptimizerKind::default(),
            restarts,
            seed,
        };
        let outcome = train(&training, &config)?;
        let model = Model {
            focal: fs.clone(),
            params: outcome.params,
            phi,
            svm: None,
            pca: None,
            scaler: Some(scaler.clone()),
        };
        adjusted_rand_index(&model.predict(data.x.view())?.hard_partition(), &data.labels)
    };

    let base = fit(None, 5, seed)?;
    println!("unconstrained best-of-5 ARI = {base:.4}");

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FFEE);
    let mut total = 0.0;
    for draw in 0..draws {
        let constraints = random_constraints(&data.labels, 50, &mut rng)?;
        let ari = fit(Some(&constraints), 1, seed.wrapping_add(draw as u64 + 1))?;
        println!(
            "draw {draw}: {} must-link, {} cannot-link, ARI = {ari:.4}",
            constraints.must_link().len(),
            constraints.cannot_link().len()
        );
        total += ari;
    }
    let mean = total / draws as f64;
    println!("mean constrained ARI = {mean:.4} (lift {:+.4})", mean - base);
    Ok(())
}
