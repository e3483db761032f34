//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 for usage or configuration errors, 2 for data errors.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crate::cascade::{train_sdm, CascadeModel};
use crate::error::{Error, Result};
use crate::geometry::{AnnotationSchema, CorrespondenceMap, Shape};
use crate::io::{
    export_pseudo_labels, load_corpus, load_dataset, load_pts, write_corpus, CorrespondenceFile, LoadedDataset,
    RunConfig,
};
use crate::pipeline::report::{eval_csv, matrix_csv, matrix_json, per_sample_csv, target_svg};
use crate::pipeline::{cross_matrix, evaluate_predictions, predict_all, run_tcr, transfer_step, Subset};
use crate::synth::generate_corpus;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tcr",
    version,
    about = "Landmark alignment with cross-protocol annotation transfer"
)]
struct Cli {
    /// Run seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "TOML")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the two-dataset synthetic corpus.
    Synth,
    /// Train a plain cascade on one manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Transfer source-protocol annotations onto a target set and filter them.
    Transfer {
        #[command(flatten)]
        pair: Pair,
    },
    /// Transfer, filter, merge and retrain on the union.
    Fuse {
        #[command(flatten)]
        pair: Pair,
    },
    /// Score a model or a directory of predicted pts files.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
        model: Option<PathBuf>,
        /// Directory holding `<sample id>.pts` predictions.
        #[arg(long, value_name = "DIR")]
        predictions: Option<PathBuf>,
        /// Protocol of the predictions, required with `--predictions`.
        #[arg(long, value_name = "TOML")]
        schema: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SubsetArg::All)]
        subset: SubsetArg,
        /// Needed for common-landmark scoring.
        #[arg(long)]
        correspondence: Option<PathBuf>,
        /// Name written in the report's model column.
        #[arg(long, default_value = "model")]
        label: String,
    },
    /// Run the full cross-dataset matrix over a corpus index.
    Matrix {
        #[arg(long)]
        corpus: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct Pair {
    /// Source-protocol training manifest.
    #[arg(long)]
    source: PathBuf,
    /// Target-protocol training manifest.
    #[arg(long)]
    target: PathBuf,
    /// Correspondence TOML between the two schemas.
    #[arg(long)]
    correspondence: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SubsetArg {
    Common,
    All,
}

impl From<SubsetArg> for Subset {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::Common => Subset::Common,
            SubsetArg::All => Subset::All,
        }
    }
}

/// Parses `argv` (program name first) and runs the command, printing
/// diagnostics on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::ConfigInvalid(_) => e,
            e => Error::ConfigInvalid(e.to_string()),
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn load_split(path: &Path) -> Result<LoadedDataset> {
    let d = load_dataset(path)?;
    if d.skipped > 0 {
        eprintln!("warning: {}: skipped {} entries", path.display(), d.skipped);
    }
    info!("{}: {} samples", path.display(), d.samples.len());
    Ok(d)
}

/// Every schema a dataset refers to, own and extra.
fn known_schemas(d: &LoadedDataset) -> Vec<Arc<AnnotationSchema>> {
    let mut out = vec![d.schema.clone()];
    for s in &d.samples {
        for shape in s.extra.values() {
            if !out.iter().any(|k| k.name() == shape.schema().name()) {
                out.push(shape.schema().clone());
            }
        }
    }
    out
}

fn resolve_pair(pair: &Pair) -> Result<(LoadedDataset, LoadedDataset, CorrespondenceMap)> {
    let source = load_split(&pair.source)?;
    let target = load_split(&pair.target)?;
    let map =
        CorrespondenceFile::load(&pair.correspondence)?.resolve(&[source.schema.clone(), target.schema.clone()])?;
    if map.source().as_ref() != source.schema.as_ref() {
        return Err(Error::SchemaMismatch(format!(
            "correspondence starts at `{}`, source dataset uses `{}`",
            map.source().name(),
            source.schema.name()
        )));
    }
    Ok((source, target, map))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn execute(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    config.validate()?;
    let cascade = config.seeded_cascade();
    let out = cli.out.as_path();
    match &cli.command {
        Command::Synth => {
            let corpus = generate_corpus(&config.synth, config.seed)?;
            out_dir(out)?;
            let index = write_corpus(&corpus, out)?;
            println!("{}", index.display());
        }
        Command::Train { manifest } => {
            let d = load_split(manifest)?;
            let (model, log) = train_sdm(&d.samples, &d.schema, &cascade)?;
            out_dir(out)?;
            model.save(&out.join("model.tcr"))?;
            write_file(&out.join("training_log.json"), to_json(&log)?)?;
            println!("{}", out.join("model.tcr").display());
        }
        Command::Transfer { pair } => {
            let (source, target, map) = resolve_pair(pair)?;
            let outcome = transfer_step(&source.samples, &target.samples, &map, &cascade, &config.pipeline)?;
            out_dir(out)?;
            let images: HashMap<String, PathBuf> = target
                .samples
                .iter()
                .map(|s| s.id.clone())
                .zip(target.image_paths.iter().cloned())
                .collect();
            let export = export_pseudo_labels(&out.join("pseudo"), &outcome, &images)?;
            write_file(&out.join("transductive_log.json"), to_json(&outcome.training)?)?;
            println!(
                "{} transferred, {} retained, {} rejected, {} skipped",
                outcome.pseudo.len(),
                outcome.retained_count(),
                outcome.rejected,
                outcome.skipped
            );
            println!("{}", export.csv.display());
        }
        Command::Fuse { pair } => {
            let (source, target, map) = resolve_pair(pair)?;
            let (model, log) = run_tcr(&source.samples, &target.samples, &map, &cascade, &config.pipeline)?;
            out_dir(out)?;
            model.save(&out.join("model.tcr"))?;
            write_file(&out.join("tcr_log.json"), to_json(&log)?)?;
            if log.fell_back {
                eprintln!("warning: every pseudo-label was filtered out; model trained on the source set only");
            }
            println!("{}", out.join("model.tcr").display());
        }
        Command::Eval {
            manifest,
            model,
            predictions,
            schema,
            subset,
            correspondence,
            label,
        } => {
            let d = load_split(manifest)?;
            let preds = match (model, predictions) {
                (Some(m), _) => predict_all(&CascadeModel::load(m)?, &d.samples)?,
                (None, Some(dir)) => {
                    let schema = match schema {
                        Some(p) => Arc::new(crate::io::load_schema(p)?),
                        None => d.schema.clone(),
                    };
                    d.samples
                        .iter()
                        .map(|s| Shape::new(schema.clone(), load_pts(&dir.join(format!("{}.pts", s.id)))?))
                        .collect::<Result<Vec<_>>>()?
                }
                (None, None) => {
                    return Err(Error::InvalidArgument(
                        "`--model` or `--predictions` is required".into(),
                    ))
                }
            };
            let map = match correspondence {
                Some(p) => {
                    let mut schemas = known_schemas(&d);
                    if let Some(first) = preds.first() {
                        schemas.push(first.schema().clone());
                    }
                    Some(CorrespondenceFile::load(p)?.resolve(&schemas)?)
                }
                None => None,
            };
            let report = evaluate_predictions(
                &preds,
                &d.samples,
                (*subset).into(),
                map.as_ref(),
                config.pipeline.failure_threshold,
            )?;
            out_dir(out)?;
            eval_csv(label, &report, create(&out.join("eval.csv"))?)?;
            let ids: Vec<String> = d.samples.iter().map(|s| s.id.clone()).collect();
            per_sample_csv(&ids, &report, create(&out.join("per_sample.csv"))?)?;
            write_file(&out.join("eval.json"), to_json(&report)?)?;
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(
                stdout,
                "{label} {} mean_error {} failure_rate {} samples {}",
                report.subset,
                report.mean_error,
                report.failure_rate,
                report.sample_count()
            );
        }
        Command::Matrix { corpus } => {
            let c = load_corpus(corpus)?;
            if c.skipped > 0 {
                eprintln!("warning: skipped {} corpus entries", c.skipped);
            }
            let m = cross_matrix(&c.datasets, &c.maps, &cascade, &config.pipeline)?;
            out_dir(out)?;
            matrix_csv(&m, create(&out.join("matrix.csv"))?)?;
            write_file(&out.join("matrix.json"), matrix_json(&m)? + "\n")?;
            for d in &m.datasets {
                write_file(&out.join(format!("target_{d}.svg")), target_svg(&m, d))?;
            }
            for r in m.rows() {
                println!(
                    "{} -> {} {} {}: {:.3} ({:.1}% failures)",
                    r.source,
                    r.target,
                    r.method,
                    r.subset,
                    r.mean_error,
                    100.0 * r.failure_rate
                );
            }
        }
    }
    Ok(())
}
