//! Three overlapping Gaussian clusters, with ten labelled objects per class.
//! The label penalty asks the plausibility of the known class to be high,
//! which also fixes the order of the clusters.
//!
//! cargo run --release --example semi_supervised [seed]

use ndarray::array;
use nnevclus::datasets::gaussian_blobs;
use nnevclus::dissim::{Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::adjusted_rand_index;
use nnevclus::network::{default_hidden_units, Model, Standardizer};
use nnevclus::training::{train, LabelSet, LossWeights, OptimizerKind, TrainConfig, TrainingData};
use nnevclus::{FocalScheme, FocalSets, Frame};

fn main() -> nnevclus::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let centres = array![[0.0, 0.0], [2.5, 0.0], [1.25, 2.2]];
    let data = gaussian_blobs(&centres, 60, 0.9, seed)?;
    let n = data.x.nrows();
    let fs = FocalSets::build(Frame::new(3)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::dense(&source, phi)?;
    let scaler = Standardizer::fit(data.x.view())?;
    let z = scaler.apply(data.x.view())?;

    let mut labelled = Vec::new();
    for class in 0..3 {
        labelled.extend((0..n).filter(|&i| data.labels[i] == class).take(10).map(|i| (i, class)));
    }
    let labels = LabelSet::new(n, 3, labelled)?;

    for (name, side) in [("unsupervised", None), ("with 30 labels", Some(&labels))] {
        let training = TrainingData {
            focal: &fs,
            inputs: z.view(),
            svm_scores: None,
            source: &source,
            phi,
            pairs: &view.pairs,
            constraints: None,
            labels: side,
        };
        let config = TrainConfig {
            hidden_units: vec![default_hidden_units(fs.len())],
            weights: LossWeights { nu: 0.5, ..Default::default() },
            optimizer: OptimizerKind::default(),
            restarts: 3,
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
        let hard = model.predict(data.x.view())?.hard_partition();
        // without labels the cluster numbering is arbitrary, so plain accuracy is only meaningful with them
        let accuracy = hard.iter().zip(&data.labels).filter(|(a, b)| a == b).count() as f64 / n as f64;
        println!(
            "{name}: ARI = {:.4}, accuracy = {accuracy:.3}, label penalty = {:.4}",
            adjusted_rand_index(&hard, &data.labels)?,
            outcome.final_loss.labels
        );
    }
    Ok(())
}
