//! Clustering from a non-metric dissimilarity matrix: the training block is
//! symmetrized and embedded on its first five principal components, and new
//! objects are placed through their dissimilarities to the training objects.
//!
//! cargo run --release --example relational [seed]

use ndarray::s;
use nnevclus::datasets::relational_clusters;
use nnevclus::dissim::{pca_embed, symmetrize, Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::network::{default_hidden_units, Model, Standardizer};
use nnevclus::training::{train, LossWeights, OptimizerKind, TrainConfig, TrainingData};
use nnevclus::{FocalScheme, FocalSets, Frame};

fn main() -> nnevclus::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (d, labels) = relational_clusters(400, 3, 5, seed)?;
    let (train_labels, test_labels) = labels.split_at(200);

    let d_train = symmetrize(d.slice(s![..200, ..200]))?;
    let (pca, x) = pca_embed(d_train.view(), 5)?;
    println!("component variances: {:.1?}", pca.variances);

    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Matrix(d_train);
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    let scaler = Standardizer::fit(x.view())?;
    let z = scaler.apply(x.view())?;

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
    let model = Model { focal: fs, params: outcome.params, phi, svm: None, pca: Some(pca), scaler: Some(scaler) };

    let train_part = model.predict(x.view())?;
    // a test object is described by its dissimilarities to the 200 training objects
    let test_part = model.predict_raw(d.slice(s![200.., ..200]))?;
    let train_ari = adjusted_rand_index(&train_part.hard_partition(), train_labels)?;
    let test_ari = adjusted_rand_index(&test_part.hard_partition(), test_labels)?;
    println!("loss = {:.3e}", outcome.final_loss.total);
    println!("train ARI = {train_ari:.4}, test ARI = {test_ari:.4}");
    Ok(())
}
