//! The fit / predict / evaluate / gradcheck pipelines behind the binary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::bundle;
use crate::config::{DataMode, PairMode, RunConfig};
use crate::dissim::{
    euclidean_distances, pca_embed, sample_pairs, symmetrize, Dissimilarities, DissimilarityView, PhiTransform,
};
use crate::error::{Error, Result};
use crate::eval::{shepard_data, shepard_stress, write_shepard_csv, EvalReport};
use crate::evidential::{EvidentialPartition, RoughPartition};
use crate::focalsets::{FocalSets, Frame};
use crate::io::{self, DissimilarityFormat};
use crate::network::{default_hidden_units, InputKind, Model, Standardizer};
use crate::ocsvm::{OneClassSvm, SvmOptions};
use crate::training::{
    grad_check, train, GradCheckOptions, GradCheckReport, InstanceSpec, LossBreakdown, OptimizerKind, RestartSummary,
    TrainConfig, TrainingData,
};

/// Files written by [`cmd_fit`].
pub const MODEL_FILE: &str = "model.json";
pub const PARTITION_FILE: &str = "partition.csv";
pub const ROUGH_FILE: &str = "rough.json";
pub const REPORT_FILE: &str = "report.jsonl";
pub const RESTARTS_FILE: &str = "restarts.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub objects: usize,
    pub focal_sets: usize,
    pub optimizer: String,
    pub pairs: usize,
    pub final_loss: LossBreakdown,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub outliers: usize,
}

/// Everything a fit produces, before anything is written.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: Model,
    /// Training inputs before standardization (PCA scores for relational data).
    pub inputs: Array2<f64>,
    pub partition: EvidentialPartition,
    pub history: Vec<crate::training::EpochRecord>,
    pub summary: FitSummary,
}

/// Loads the data named by `cfg`, trains and returns the fitted model.
pub fn fit(cfg: &RunConfig) -> Result<Fitted> {
    cfg.validate()?;
    let (inputs, source, pca) = match cfg.data.mode {
        DataMode::Attribute => {
            let path = cfg.data.attributes.as_ref().expect("validated");
            let x = io::read_attributes(path, &cfg.data.exclude_columns)?.values;
            let source = match &cfg.data.dissimilarities {
                Some(p) => {
                    let d = symmetrize(io::read_dissimilarities(p, cfg.data.dissimilarity_format)?.view())?;
                    if d.nrows() != x.nrows() {
                        return Err(Error::dims(x.nrows(), d.nrows(), "dissimilarity rows vs attribute rows"));
                    }
                    Dissimilarities::Matrix(d)
                }
                None => Dissimilarities::Euclidean(x.clone()),
            };
            (x, source, None)
        }
        DataMode::Relational => {
            let path = cfg.data.dissimilarities.as_ref().expect("validated");
            let d = symmetrize(io::read_dissimilarities(path, cfg.data.dissimilarity_format)?.view())?;
            let (embedding, _) = pca_embed(d.view(), cfg.pca.dims.expect("validated"))?;
            let x = embedding.project_rows(d.view())?;
            (x, Dissimilarities::Matrix(d), Some(embedding))
        }
    };
    let n = inputs.nrows();
    let focal = FocalSets::build(Frame::new(cfg.model.clusters)?, cfg.model.scheme)?;
    let phi = PhiTransform::calibrate(&source.off_diagonal(), cfg.model.d0_quantile)?;

    let svm = if cfg.svm.enabled {
        let opts = SvmOptions { nu: cfg.svm.nu, sigma: cfg.svm.sigma, seed: cfg.seed, ..Default::default() };
        Some(OneClassSvm::fit(inputs.view(), &opts)?)
    } else {
        None
    };
    let scores = svm.as_ref().map(|s| s.gate_scores(inputs.view()));
    let scaler = cfg.model.standardize.then(|| Standardizer::fit(inputs.view())).transpose()?;
    let net_inputs = match &scaler {
        Some(s) => s.apply(inputs.view())?,
        None => inputs.clone(),
    };
    let constraints = cfg.data.constraints.as_ref().map(|p| io::read_constraints(p, n)).transpose()?;
    let labels = cfg.data.labels.as_ref().map(|p| io::read_labels(p, n, cfg.model.clusters)).transpose()?;

    let mode = match cfg.pairs.mode {
        PairMode::Auto if n <= cfg.pairs.batch_threshold => PairMode::Dense,
        PairMode::Auto => PairMode::Minibatch,
        m => m,
    };
    let p = cfg.pairs.p.min(n - 1);
    let (view, optimizer) = match mode {
        PairMode::Dense => (DissimilarityView::dense(&source, phi)?, OptimizerKind::Batch(cfg.optimizer.batch)),
        PairMode::Sampled => (
            DissimilarityView::sampled(&source, phi, &sample_pairs(n, p, cfg.seed)?)?,
            OptimizerKind::Batch(cfg.optimizer.batch),
        ),
        _ => (
            DissimilarityView::sampled(&source, phi, &sample_pairs(n, p, cfg.seed)?)?,
            OptimizerKind::Minibatch(cfg.optimizer.minibatch),
        ),
    };
    let data = TrainingData {
        focal: &focal,
        inputs: net_inputs.view(),
        svm_scores: scores.as_deref(),
        source: &source,
        phi,
        pairs: &view.pairs,
        constraints: constraints.as_ref(),
        labels: labels.as_ref(),
    };
    let train_cfg = TrainConfig {
        hidden_units: cfg.model.hidden_units.clone().unwrap_or_else(|| vec![default_hidden_units(focal.len())]),
        weights: cfg.loss,
        optimizer,
        restarts: cfg.restarts,
        seed: cfg.seed,
    };
    let outcome = train(&data, &train_cfg)?;
    let model = Model { focal: focal.clone(), params: outcome.params, phi, svm, pca, scaler };
    let partition = model.predict(inputs.view())?;
    let summary = FitSummary {
        objects: n,
        focal_sets: focal.len(),
        optimizer: match optimizer {
            OptimizerKind::Batch(_) => "batch".into(),
            OptimizerKind::Minibatch(_) => "minibatch".into(),
        },
        pairs: view.pairs.len(),
        final_loss: outcome.final_loss,
        best_restart: outcome.best_restart,
        restarts: outcome.restarts,
        outliers: partition.rough_partition().outliers.len(),
    };
    Ok(Fitted { model, inputs, partition, history: outcome.history, summary })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Rough partition with 1-based object indices, as written to disk.
fn one_based(rough: &RoughPartition) -> RoughPartition {
    let shift = |v: &Vec<usize>| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    RoughPartition {
        lower: rough.lower.iter().map(shift).collect(),
        upper: rough.upper.iter().map(shift).collect(),
        outliers: shift(&rough.outliers),
    }
}

/// Fits and writes the bundle, partition, rough partition, per-epoch report
/// and restart summary into `cfg.out`.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitSummary> {
    let fitted = fit(cfg)?;
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    bundle::save(&fitted.model, &out.join(MODEL_FILE))?;
    fitted.partition.write_csv(create(&out.join(PARTITION_FILE))?)?;
    write_json(&one_based(&fitted.partition.rough_partition()), &out.join(ROUGH_FILE))?;
    let report_path = out.join(REPORT_FILE);
    let mut lines = String::new();
    for rec in &fitted.history {
        lines.push_str(&serde_json::to_string(rec)?);
        lines.push('\n');
    }
    std::fs::write(&report_path, lines).map_err(|e| Error::io(&report_path, e))?;
    write_json(&fitted.summary, &out.join(RESTARTS_FILE))?;
    Ok(fitted.summary)
}

/// Reads model inputs for prediction: attribute rows, or rows of
/// dissimilarities to the training objects for relational models.
pub fn read_inputs(model: &Model, path: &Path, exclude: &[String]) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(Array2::zeros((0, model.input_width())));
    }
    let rows = match model.input_kind() {
        InputKind::Attributes => io::read_attributes(path, exclude)?.values,
        InputKind::Relational => io::read_matrix(path)?,
    };
    if rows.ncols() != model.input_width() && rows.nrows() > 0 {
        return Err(Error::dims(model.input_width(), rows.ncols(), format!("columns of {}", path.display())));
    }
    Ok(rows)
}

/// Predicts masses for new objects and writes the partition CSV to `out`
/// (standard output when `None`).
pub fn cmd_predict(
    bundle_path: &Path,
    data: &Path,
    exclude: &[String],
    out: Option<&Path>,
) -> Result<EvidentialPartition> {
    let model = bundle::load(bundle_path)?;
    let rows = read_inputs(&model, data, exclude)?;
    let partition = if rows.nrows() == 0 {
        EvidentialPartition::new(model.focal.clone(), Array2::zeros((0, model.focal.len())))?
    } else {
        model.predict_raw(rows.view())?
    };
    match out {
        Some(p) => partition.write_csv(create(p)?)?,
        None => partition.write_csv(std::io::stdout().lock())?,
    }
    Ok(partition)
}

/// Optional inputs that enable the Shepard data in [`cmd_evaluate`].
#[derive(Debug, Clone)]
pub struct ShepardSource {
    pub bundle: PathBuf,
    /// The training inputs: attribute CSV, or the dissimilarity matrix for relational models.
    pub data: PathBuf,
    pub exclude: Vec<String>,
    /// Pairs per object; all pairs when `None`.
    pub p: Option<usize>,
    pub seed: u64,
}

/// ARI of a partition file against reference labels; with a bundle and the
/// training data, also the Shepard points and their mean squared residual.
pub fn cmd_evaluate(partition: &Path, truth: &Path, shepard: Option<&ShepardSource>) -> Result<EvalReport> {
    let table = io::read_partition(partition)?;
    let truth = io::read_truth(truth)?;
    if truth.len() != table.labels.len() {
        return Err(Error::dims(table.labels.len(), truth.len(), "reference labels vs partition rows"));
    }
    let mut report = EvalReport {
        ari: crate::eval::adjusted_rand_index(&table.labels, &truth)?,
        final_loss: None,
        outlier_count: table.outliers.iter().filter(|&&o| o).count(),
        objects: truth.len(),
        shepard: Vec::new(),
    };
    if let Some(src) = shepard {
        let model = bundle::load(&src.bundle)?;
        let source = match model.input_kind() {
            InputKind::Attributes => {
                let x = io::read_attributes(&src.data, &src.exclude)?.values;
                Dissimilarities::Matrix(euclidean_distances(x.view())?)
            }
            InputKind::Relational => Dissimilarities::Matrix(symmetrize(
                io::read_dissimilarities(&src.data, DissimilarityFormat::Auto)?.view(),
            )?),
        };
        if source.len() != table.labels.len() {
            return Err(Error::dims(table.labels.len(), source.len(), "data rows vs partition rows"));
        }
        let view = match src.p {
            Some(p) => DissimilarityView::sampled(&source, model.phi, &sample_pairs(source.len(), p, src.seed)?)?,
            None => DissimilarityView::dense(&source, model.phi)?,
        };
        let ep = EvidentialPartition::new(model.focal.clone(), table.masses)?;
        report.shepard = shepard_data(&ep, &view.pairs)?;
        report.final_loss = Some(shepard_stress(&report.shepard));
    }
    Ok(report)
}

/// Writes `eval.json`, and `shepard.csv` when Shepard points are present.
pub fn write_eval(report: &EvalReport, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if !report.shepard.is_empty() {
        write_shepard_csv(&report.shepard, create(&out.join("shepard.csv"))?)?;
    }
    let compact = EvalReport { shepard: Vec::new(), ..report.clone() };
    write_json(&compact, &out.join("eval.json"))
}

pub fn cmd_gradcheck(spec: &InstanceSpec, options: &GradCheckOptions) -> Result<GradCheckReport> {
    grad_check(&spec.build()?, options)
}
