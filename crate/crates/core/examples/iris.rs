//! Clusters the Iris measurements into three groups with focal sets of size
//! at most two plus Ω, keeps the best of five restarts and scores the result
//! against the species.
//!
//! cargo run --release --example iris [seed]

use nnevclus::datasets::iris;
use nnevclus::dissim::{Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::network::{default_hidden_units, Model, Standardizer};
use nnevclus::training::{train, LossWeights, OptimizerKind, TrainConfig, TrainingData};
use nnevclus::{FocalScheme, FocalSets, Frame};

fn main() -> nnevclus::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = iris();
    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    // the network sees standardized columns; distances stay in centimetres
    let scaler = Standardizer::fit(data.x.view())?;
    let z = scaler.apply(data.x.view())?;

    let training = TrainingData {
        focal: &fs,
        inputs: z.view(),
        svm_scores: None,
        source: &source,
        phi,
        pairs: &view.pairs,
        constraints: None,
        labels: None,
    };
    let config = TrainConfig {
        hidden_units: vec![default_hidden_units(fs.len())],
        weights: LossWeights::default(),
        optimizer: OptimizerKind::default(),
        restarts: 5,
        seed,
    };
    let outcome = train(&training, &config)?;
    for r in &outcome.restarts {
        println!("restart {}: loss {:?} after {} epochs", r.restart, r.final_loss, r.epochs);
    }

    let model = Model { focal: fs, params: outcome.params, phi, svm: None, pca: None, scaler: Some(scaler) };
    let partition = model.predict(data.x.view())?;
    let ari = adjusted_rand_index(&partition.hard_partition(), &data.labels)?;
    println!("delta0 = {:.4}, best loss = {:.4e}", phi.delta0, outcome.final_loss.total);
    println!("ARI against species = {ari:.4}");
    Ok(())
}
