//! Four Student-t clusters with a one-class SVM gate: trains on 100 sampled
//! partners per object, then checks the Shepard fit and how much mass far
//! away points put on the empty set.
//!
//! cargo run --release --example fourclass_gate [seed]

use ndarray::array;
use nnevclus::datasets::fourclass;
use nnevclus::dissim::{sample_pairs, Dissimilarities, DissimilarityView, PhiTransform};
use nnevclus::eval::{adjusted_rand_index, shepard_data, shepard_stress};
use nnevclus::network::{Model, Standardizer};
use nnevclus::ocsvm::OneClassSvm;
use nnevclus::training::{train, LossWeights, OptimizerKind, TrainConfig, TrainingData};
use nnevclus::{FocalScheme, FocalSets, Frame};

fn main() -> nnevclus::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let data = fourclass(100, seed);
    let n = data.x.nrows();
    let fs = FocalSets::build(Frame::new(4)?, FocalScheme::PairsPlus)?;
    let source = Dissimilarities::Euclidean(data.x.clone());
    let phi = PhiTransform::calibrate(&source.off_diagonal(), 0.9)?;
    let view = DissimilarityView::sampled(&source, phi, &sample_pairs(n, 100, seed)?)?;

    let svm = OneClassSvm::fit_with(data.x.view(), 0.2, 0.2, seed)?;
    let scores = svm.gate_scores(data.x.view());
    let flagged = scores.iter().filter(|&&s| s < 0.0).count();
    println!("SVM: {} support vectors, {flagged} of {n} training points outside", svm.alphas.len());

    let scaler = Standardizer::fit(data.x.view())?;
    let z = scaler.apply(data.x.view())?;
    let training = TrainingData {
        focal: &fs,
        inputs: z.view(),
        svm_scores: Some(&scores),
        source: &source,
        phi,
        pairs: &view.pairs,
        constraints: None,
        labels: None,
    };
    let config = TrainConfig {
        hidden_units: vec![20],
        weights: LossWeights { lambda: 0.0, ..Default::default() },
        optimizer: OptimizerKind::default(),
        restarts: 5,
        seed,
    };
    let outcome = train(&training, &config)?;
    let model = Model { focal: fs, params: outcome.params, phi, svm: Some(svm), pca: None, scaler: Some(scaler) };
    let partition = model.predict(data.x.view())?;
    let shepard = shepard_data(&partition, &view.pairs)?;
    println!("loss = {:.3e} (Shepard residual {:.3e})", outcome.final_loss.total, shepard_stress(&shepard));
    println!("ARI = {:.4}", adjusted_rand_index(&partition.hard_partition(), &data.labels)?);
    println!("beta0 = {:.3}, beta1 = {:.3}", model.params.beta0, model.params.beta1);

    let far = array![[-15.0, -15.0], [3.0, 20.0], [25.0, 3.0], [20.0, 20.0]];
    let far_masses = model.predict(far.view())?;
    for i in 0..far.nrows() {
        println!("m*(empty) at {:?} = {:.3}", far.row(i).to_vec(), far_masses.row(i)[0]);
    }
    Ok(())
}
