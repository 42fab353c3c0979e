//! Two thousand points in four blobs: too many for full-batch training on all
//! pairs, so each epoch visits the within-group pairs of random object groups
//! and updates with RMSprop, stopping early on a held-out set.
//!
//! cargo run --release --example minibatch [seed]

use ndarray::array;
use nnevclus::datasets::gaussian_blobs;
use nnevclus::dissim::{sample_pairs, Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::network::{default_hidden_units, Model, Standardizer};
use nnevclus::training::{train, EarlyStopping, LossWeights, OptimizerKind, RmsPropOptions, TrainConfig, TrainingData};
use nnevclus::{FocalScheme, FocalSets, Frame};

fn main() -> nnevclus::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let centres = array![[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]];
    let data = gaussian_blobs(&centres, 500, 1.0, seed)?;
    let n = data.x.nrows();
    let fs = FocalSets::build(Frame::new(4)?, FocalScheme::SingletonsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    // restarts are compared on a fixed sample of 100 partners per object
    let ranking = DissimilarityView::sampled(&source, phi, &sample_pairs(n, 100, seed)?)?;
    let scaler = Standardizer::fit(data.x.view())?;
    let z = scaler.apply(data.x.view())?;

    let training = TrainingData {
        focal: &fs,
        inputs: z.view(),
        svm_scores: None,
        source: &source,
        phi,
        pairs: &ranking.pairs,
        constraints: None,
        labels: None,
    };
    let config = TrainConfig {
        hidden_units: vec![default_hidden_units(fs.len())],
        weights: LossWeights::default(),
        optimizer: OptimizerKind::Minibatch(RmsPropOptions {
            blocks: 30,
            max_epochs: 200,
            early_stopping: Some(EarlyStopping::default()),
            ..Default::default()
        }),
        restarts: 2,
        seed,
    };
    let outcome = train(&training, &config)?;
    let last = outcome.history.last().expect("at least the initial record");
    println!("best restart {} stopped after {} epochs", outcome.best_restart, last.epoch);
    println!("loss on the ranking pairs = {:.3e}", outcome.final_loss.total);

    let model = Model { focal: fs, params: outcome.params, phi, svm: None, pca: None, scaler: Some(scaler) };
    let hard = model.predict(data.x.view())?.hard_partition();
    println!("ARI = {:.4}", adjusted_rand_index(&hard, &data.labels)?);
    Ok(())
}
