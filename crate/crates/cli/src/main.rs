mod layer;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use jitlab::evaluate::{
    effort_rank, run_on, spec_from_report, ExperimentSpec, ReportFormat, TrainedPipeline, CONFIG_MARKER,
};
use jitlab::metrics::{precision, recall, ConfusionCounts};
use jitlab::mlp::TrainConfig;
use jitlab::pca::{export_scatter, fit_pca, project};
use jitlab::preprocess::{split, SplitSpec, TransformPlan};
use jitlab::synth::{generate, SynthSpec};
use jitlab::{audit_dataset, summarize, ColumnSchema, Dataset, Metric, Parallelism};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "jitlab", version, about = "Just-in-time defect prediction lab")]
struct Cli {
    /// Base seed for every randomized stage.
    #[arg(long, global = true, env = "JITLAB_SEED", default_value_t = 0)]
    seed: u64,

    /// TOML file whose values override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Suppress the effective-configuration echo on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Summarize a dataset and audit it for raw churn and log-domain zeros.
    Validate {
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Also write the summary and audit here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Principal component analysis over selected features.
    Pca {
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// `all` or a comma-separated list.
        #[arg(long, default_value = "all")]
        features: String,
        #[arg(long, default_value_t = 2)]
        components: usize,
        /// Scale columns to unit variance before fitting.
        #[arg(long)]
        standardize: bool,
        /// Scatter CSV (pc1,pc2,label). Loadings go next to it as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier and save it with its preprocessing.
    Train {
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// `all` or a comma-separated list; defaults to every metric not dropped by the plan.
        #[arg(long)]
        features: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Hold out this fraction of rows and report recall/precision on it.
        #[arg(long)]
        holdout: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a feature-combination experiment described by a TOML spec.
    Experiment {
        spec: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Report path; `.csv` gives CSV, anything else the text table.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluate folds one at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Generate a synthetic Kamei-schema dataset.
    Synth {
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long, default_value_t = 0.5)]
        defect_fraction: f64,
        #[arg(long, default_value_t = 0.0)]
        separation: f64,
        #[arg(long, default_value = "lt,age")]
        signal: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank changes by predicted risk per line of churn.
    Rank {
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SchemaArgs {
    /// Extra header alias, e.g. `defective=label`. Repeatable.
    #[arg(long = "alias", value_name = "ALIAS=COLUMN")]
    aliases: Vec<String>,
    /// Accept canonical column names only.
    #[arg(long)]
    canonical: bool,
}

impl SchemaArgs {
    fn schema(&self) -> Result<ColumnSchema> {
        let mut schema = if self.canonical {
            ColumnSchema::canonical()
        } else {
            ColumnSchema::kamei()
        };
        for a in &self.aliases {
            let (alias, column) = a
                .split_once('=')
                .with_context(|| format!("E_SCHEMA: alias '{a}' is not ALIAS=COLUMN"))?;
            schema = schema.with_alias(alias, column)?;
        }
        Ok(schema)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateRun {
    transform: TransformPlan,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PcaRun {
    features: Vec<Metric>,
    components: usize,
    standardize: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainRun {
    features: Vec<Metric>,
    threshold: f64,
    holdout: Option<f64>,
    split_seed: u64,
    transform: TransformPlan,
    train: TrainConfig,
}

enum Outcome {
    Clean,
    Findings,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Findings) => ExitCode::from(2),
        Err(e) if e.downcast_ref::<jitlab::Error>().is_some() => {
            // library errors already carry their cause in the message
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn echo<T: Serialize>(cli: &Cli, what: &str, value: &T) -> Result<()> {
    if !cli.quiet {
        eprintln!("# effective {what} config");
        eprint!("{}", toml::to_string(value)?);
    }
    Ok(())
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("E_IO: cannot write {}", path.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome> {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Validate { input, schema, out } => {
            let run = layer::resolve(&ValidateRun { transform: TransformPlan::default() }, config)?;
            let data = Dataset::load(input, &schema.schema()?)?;
            let audit = audit_dataset(&data, &run.transform.log_columns);
            let text = format!("{}\n{}", summarize(&data), audit);
            print!("{text}");
            if let Some(path) = out {
                fs::write(path, &text).with_context(|| format!("E_IO: cannot write {}", path.display()))?;
            }
            Ok(if audit.has_findings() { Outcome::Findings } else { Outcome::Clean })
        }
        Command::Pca {
            input,
            schema,
            features,
            components,
            standardize,
            out,
        } => {
            let flags = PcaRun {
                features: Metric::parse_list(features)?,
                components: *components,
                standardize: *standardize,
            };
            let run = layer::resolve(&flags, config)?;
            let data = Dataset::load(input, &schema.schema()?)?;
            let model = fit_pca(&data, &run.features, run.components, run.standardize)?;
            let points = project(&model, &data)?;
            match out {
                Some(path) => {
                    export_scatter(&points, path)?;
                    let loadings = path.with_extension("loadings.json");
                    fs::write(&loadings, model.dump())
                        .with_context(|| format!("E_IO: cannot write {}", loadings.display()))?;
                    eprintln!("wrote {} and {}", path.display(), loadings.display());
                }
                None => print!("{}", model.dump()),
            }
            Ok(Outcome::Clean)
        }
        Command::Train {
            input,
            schema,
            features,
            epochs,
            threshold,
            holdout,
            out,
        } => {
            let transform = TransformPlan::default();
            let mut train = TrainConfig {
                seed: cli.seed,
                ..TrainConfig::default()
            };
            if let Some(e) = epochs {
                train.epochs = *e;
            }
            let flags = TrainRun {
                features: match features {
                    Some(f) => Metric::parse_list(f)?,
                    None => transform.training_features(),
                },
                threshold: *threshold,
                holdout: *holdout,
                split_seed: cli.seed,
                transform,
                train,
            };
            let run = layer::resolve(&flags, config)?;
            echo(cli, "train", &run)?;
            let data = Dataset::load(input, &schema.schema()?)?;
            let (fit_on, test) = match run.holdout {
                Some(h) => {
                    let (a, b) = split(&data, &SplitSpec { train_fraction: 1.0 - h, seed: run.split_seed })?;
                    (a, Some(b))
                }
                None => (data, None),
            };
            let pipeline = TrainedPipeline::fit(&fit_on, &run.features, &run.transform, &run.train, run.threshold)?;
            pipeline.save(out)?;
            if let (Some(first), Some(last)) = (pipeline.loss_trace.first(), pipeline.loss_trace.last()) {
                println!("trained on {} rows: loss {first:.4} -> {last:.4}", fit_on.len());
            }
            if let Some(test) = test {
                let (predicted, _) = pipeline.predict(&test)?;
                let counts = ConfusionCounts::from_predictions(&predicted, &test.labels());
                let show = |r: jitlab::Result<f64>| r.map_or("undefined".to_string(), |v| format!("{:.2}%", 100.0 * v));
                println!(
                    "holdout {} rows: recall {}, precision {}",
                    test.len(),
                    show(recall(&counts)),
                    show(precision(&counts))
                );
            }
            println!("model written to {}", out.display());
            Ok(Outcome::Clean)
        }
        Command::Experiment {
            spec,
            schema,
            out,
            sequential,
        } => {
            let mut table = toml::Table::new();
            table.insert("combine_seed".into(), seed_value(cli.seed)?);
            for section in ["train", "folds"] {
                let mut t = toml::Table::new();
                t.insert("seed".into(), seed_value(cli.seed)?);
                table.insert(section.into(), t.into());
            }
            layer::merge(&mut table, spec_table(spec)?);
            if let Some(path) = config {
                layer::merge(&mut table, layer::read_table(path)?);
            }
            let base = spec.parent().map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p });
            let base = base.map(std::path::absolute).transpose()?;
            let mut parsed = ExperimentSpec::from_toml(&toml::to_string(&table)?, base.as_deref())?;
            if *sequential {
                parsed.parallelism = Parallelism::Sequential;
            }
            echo(cli, "experiment", &parsed)?;
            if parsed.datasets.is_empty() {
                anyhow::bail!("E_SPEC: at least one dataset is required");
            }
            let data = parsed.load_data(&schema.schema()?)?;
            let report = run_on(&data, &parsed)?;
            print!("{}", report.render(ReportFormat::Text)?);
            if let Some(path) = out {
                report.emit(ReportFormat::from_path(path), path)?;
            }
            Ok(Outcome::Clean)
        }
        Command::Synth {
            rows,
            defect_fraction,
            separation,
            signal,
            out,
        } => {
            let flags = SynthSpec {
                n_rows: *rows,
                defect_fraction: *defect_fraction,
                signal_features: Metric::parse_list(signal)?,
                separation: *separation,
                seed: cli.seed,
            };
            let spec = layer::resolve(&flags, config)?;
            echo(cli, "synth", &spec)?;
            let data = generate(&spec)?;
            let mut buf = Vec::new();
            data.to_writer(&mut buf)?;
            write_or_print(out.as_deref(), std::str::from_utf8(&buf)?)?;
            Ok(Outcome::Clean)
        }
        Command::Rank {
            input,
            schema,
            model,
            out,
        } => {
            let pipeline = TrainedPipeline::load(model)?;
            let data = Dataset::load(input, &schema.schema()?)?;
            let scores = pipeline.score(&data)?;
            let ranked = effort_rank(&data, &scores)?;
            let mut text = String::from("rank,row,probability,effort,score,raw_churn\n");
            for (i, r) in ranked.iter().enumerate() {
                text.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    i + 1,
                    r.row,
                    r.probability,
                    r.effort,
                    r.score,
                    r.raw_churn
                ));
            }
            write_or_print(out.as_deref(), &text)?;
            Ok(Outcome::Clean)
        }
    }
}

/// Reads an experiment spec, either a TOML file or a report with an embedded config.
fn spec_table(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).with_context(|| format!("E_IO: cannot read {}", path.display()))?;
    if !text.lines().any(|l| l.trim_start_matches("# ").trim() == CONFIG_MARKER) {
        return layer::read_table(path);
    }
    let spec = spec_from_report(&text)?;
    Ok(spec.to_toml()?.parse()?)
}

fn seed_value(seed: u64) -> Result<toml::Value> {
    let s = i64::try_from(seed).context("E_SPEC: seed must fit in a signed 64-bit integer")?;
    Ok(toml::Value::Integer(s))
}
