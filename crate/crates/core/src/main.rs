use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nnevclus::cli::{self, ShepardSource};
use nnevclus::config::RunConfig;
use nnevclus::training::{GradCheckOptions, InstanceSpec};
use nnevclus::{Error, FocalScheme};

#[derive(Parser)]
#[command(name = "nnevclus", about = "Evidential clustering with a neural network")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (fit, evaluate) or file (predict).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write the bundle, partition and report.
    Fit {
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Compute masses for new objects with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Non-attribute columns of the data file.
        #[arg(long)]
        exclude: Vec<String>,
    },
    /// Compare a partition with reference labels.
    Evaluate {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Model bundle; with --data also exports Shepard points.
        #[arg(long, requires = "data")]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        exclude: Vec<String>,
        /// Partners per object for the Shepard points (all pairs by default).
        #[arg(long)]
        p: Option<usize>,
    },
    /// Compare analytic and finite-difference gradients on a random instance.
    Gradcheck {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        scheme: Option<FocalScheme>,
        #[arg(long)]
        no_gate: bool,
        #[arg(long)]
        constraints: Option<usize>,
        #[arg(long)]
        labels: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Print the version.
    Version,
}

fn run(cli: Cli) -> Result<bool, Error> {
    if let Some(t) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Fit { restarts } => {
            let path = cli.common.config.ok_or_else(|| Error::InvalidArgument("fit needs --config".into()))?;
            let mut cfg = RunConfig::load(&path)?;
            if let Some(s) = cli.common.seed {
                cfg.seed = s;
            }
            if let Some(o) = cli.common.out {
                cfg.out = o;
            }
            if let Some(r) = restarts {
                cfg.restarts = r;
            }
            let summary = cli::cmd_fit(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Command::Predict { model, data, exclude } => {
            cli::cmd_predict(&model, &data, &exclude, cli.common.out.as_deref())?;
            Ok(true)
        }
        Command::Evaluate { partition, truth, model, data, exclude, p } => {
            let shepard = model.map(|bundle| ShepardSource {
                bundle,
                data: data.expect("required by clap"),
                exclude,
                p,
                seed: cli.common.seed.unwrap_or(0),
            });
            let report = cli::cmd_evaluate(&partition, &truth, shepard.as_ref())?;
            if let Some(out) = &cli.common.out {
                cli::write_eval(&report, out)?;
            }
            println!("ARI = {:.4}", report.ari);
            if let Some(l) = report.final_loss {
                println!("loss = {l:.6e}");
            }
            println!("outliers = {}", report.outlier_count);
            Ok(true)
        }
        Command::Gradcheck { n, d, hidden, clusters, scheme, no_gate, constraints, labels, lambda, inject_fault } => {
            let mut spec = match &cli.common.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    toml::from_str(&text).map_err(|e| Error::Parse {
                        path: p.clone(),
                        line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
                        message: e.message().to_string(),
                    })?
                }
                None => InstanceSpec::default(),
            };
            spec.n = n.unwrap_or(spec.n);
            spec.d = d.unwrap_or(spec.d);
            spec.hidden = hidden.unwrap_or(spec.hidden);
            spec.clusters = clusters.unwrap_or(spec.clusters);
            spec.scheme = scheme.unwrap_or(spec.scheme);
            spec.gate &= !no_gate;
            spec.constraints = constraints.unwrap_or(spec.constraints);
            spec.labels = labels.unwrap_or(spec.labels);
            spec.lambda = lambda.unwrap_or(spec.lambda);
            spec.seed = cli.common.seed.unwrap_or(spec.seed);
            let options = GradCheckOptions { inject_fault, ..Default::default() };
            let report = cli::cmd_gradcheck(&spec, &options)?;
            for b in &report.blocks {
                println!(
                    "{:<6} max rel err {:.3e}  (analytic {:.6e}, numeric {:.6e}, max |g| {:.3e})",
                    b.name, b.max_rel_error, b.analytic, b.numeric, b.max_abs_gradient
                );
            }
            println!("{}", if report.passed { "PASS" } else { "FAIL" });
            Ok(report.passed)
        }
        Command::Version => {
            println!("nnevclus {}", env!("CARGO_PKG_VERSION"));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io_or_parse() { 2 } else { 1 })
        }
    }
}
